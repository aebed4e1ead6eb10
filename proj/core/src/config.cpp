#include "shiftsr/config.hpp"

#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "shiftsr/errors.hpp"
#include "shiftsr/util.hpp"

namespace shiftsr {

using nlohmann::json;

namespace {

/// Typed field access over one JSON object with unknown-key detection.
class Scope {
public:
    Scope(const json& j, std::string path) : j_(j), path_(std::move(path)) {
        if (!j_.is_object()) throw ConfigError(path_ + " must be an object");
    }
    ~Scope() = default;

    std::string at(const std::string& key) const {
        return path_.empty() ? key : path_ + "." + key;
    }

    bool has(const std::string& key) {
        seen_.insert(key);
        return j_.contains(key);
    }

    const json& raw(const std::string& key) {
        seen_.insert(key);
        return j_.at(key);
    }

    void get(const std::string& key, int& target) {
        if (!has(key)) return;
        const json& v = j_.at(key);
        if (!v.is_number_integer()) throw ConfigError(at(key) + " must be an integer");
        target = v.get<int>();
    }
    void get(const std::string& key, std::uint64_t& target) {
        if (!has(key)) return;
        const json& v = j_.at(key);
        if (!v.is_number_integer() || (v.is_number_integer() && v.get<std::int64_t>() < 0 &&
                                       !v.is_number_unsigned()))
            throw ConfigError(at(key) + " must be a non-negative integer");
        target = v.get<std::uint64_t>();
    }
    void get(const std::string& key, double& target) {
        if (!has(key)) return;
        const json& v = j_.at(key);
        if (!v.is_number()) throw ConfigError(at(key) + " must be a number");
        target = v.get<double>();
    }
    void get(const std::string& key, bool& target) {
        if (!has(key)) return;
        const json& v = j_.at(key);
        if (!v.is_boolean()) throw ConfigError(at(key) + " must be a boolean");
        target = v.get<bool>();
    }
    void get(const std::string& key, std::string& target) {
        if (!has(key)) return;
        const json& v = j_.at(key);
        if (!v.is_string()) throw ConfigError(at(key) + " must be a string");
        target = v.get<std::string>();
    }
    void get(const std::string& key, Interval& target) {
        if (!has(key)) return;
        const json& v = j_.at(key);
        if (!v.is_array() || v.size() != 2 || !v[0].is_number() || !v[1].is_number())
            throw ConfigError(at(key) + " must be a [lo, hi] number pair");
        target = Interval{v[0].get<double>(), v[1].get<double>()};
    }
    void get(const std::string& key, IntInterval& target) {
        if (!has(key)) return;
        const json& v = j_.at(key);
        if (!v.is_array() || v.size() != 2 || !v[0].is_number_integer() ||
            !v[1].is_number_integer())
            throw ConfigError(at(key) + " must be a [lo, hi] integer pair");
        target = IntInterval{v[0].get<int>(), v[1].get<int>()};
    }

    void finish() const {
        for (const auto& [key, value] : j_.items())
            if (!seen_.count(key)) throw ConfigError("unknown config key: " + at(key));
    }

private:
    const json& j_;
    std::string path_;
    std::set<std::string> seen_;
};

json interval_json(const Interval& i) { return json::array({i.lo, i.hi}); }
json interval_json(const IntInterval& i) { return json::array({i.lo, i.hi}); }

}  // namespace

void ExperimentConfig::validate() const {
    degrade.validate();
    train.validate();
    Schedule::build(schedule);  // throws on an invalid schedule
    if (dataset.patch < 1) throw ConfigError("dataset.patch must be positive");
    if (dataset.count < 1 || dataset.val_count < 0)
        throw ConfigError("dataset.count must be >= 1 and dataset.val_count >= 0");
    if (dataset.image_size < dataset.patch)
        throw ConfigError("dataset.image_size must be at least dataset.patch");
    if (models.codec != "identity" && models.codec != "tiny_ae")
        throw ConfigError("models.codec must be \"identity\" or \"tiny_ae\"");
    if (models.codec == "identity" && models.latent_channels != 3)
        throw ConfigError("models.latent_channels must be 3 with the identity codec");
    if (models.latent_channels < 1 || models.base_channels < 1 || models.temb_dim < 1 ||
        models.groups < 1 || models.disc_base_channels < 1 || models.ae_base_channels < 1)
        throw ConfigError("models sizes must be positive");
    if (models.base_channels % models.groups != 0)
        throw ConfigError("models.base_channels must be divisible by models.groups");
    if (models.codec_iterations < 1 || models.codec_lr <= 0.0)
        throw ConfigError("models codec training settings must be positive");
    if (models.embedder.input_size < 1 || models.embedder.base_channels < 1 ||
        models.embedder.dim < 1)
        throw ConfigError("models.embedder sizes must be positive");
    if (metrics.rho <= 0.0 || metrics.rho >= 1.0)
        throw ConfigError("metrics.rho must be in (0, 1)");
    if (metrics.lowpass_frac <= 0.0 || metrics.lowpass_frac >= 1.0)
        throw ConfigError("metrics.lowpass_frac must be in (0, 1)");
    if (metrics.analyze_images < 1) throw ConfigError("metrics.analyze_images must be >= 1");
    if (run.method != "student" && run.method != "teacher" && run.method != "bicubic")
        throw ConfigError("run.method must be \"student\", \"teacher\", or \"bicubic\"");
    if (out_dir.empty()) throw ConfigError("out_dir must not be empty");
    const int factor = models.codec == "tiny_ae" ? 4 : 1;
    const int latent = dataset.patch / factor;
    if (latent % 2 != 0)
        throw ConfigError("dataset.patch must yield an even latent size for detail-band losses");
}

ExperimentConfig parse_config(const json& j) {
    ExperimentConfig c;
    Scope root(j, "");

    if (root.has("dataset")) {
        Scope s(root.raw("dataset"), "dataset");
        s.get("dir", c.dataset.dir);
        s.get("val_dir", c.dataset.val_dir);
        s.get("patch", c.dataset.patch);
        s.get("resample_each_epoch", c.dataset.resample_each_epoch);
        s.get("count", c.dataset.count);
        s.get("val_count", c.dataset.val_count);
        s.get("image_size", c.dataset.image_size);
        s.finish();
    }
    if (root.has("degrade")) {
        Scope s(root.raw("degrade"), "degrade");
        s.get("blur_sigma", c.degrade.blur_sigma);
        s.get("scale", c.degrade.scale);
        s.get("noise_sigma", c.degrade.noise_sigma);
        s.get("jpeg_enabled", c.degrade.jpeg_enabled);
        s.get("jpeg_quality", c.degrade.jpeg_quality);
        if (s.has("kernels")) {
            const json& arr = s.raw("kernels");
            if (!arr.is_array() || arr.empty())
                throw ConfigError("degrade.kernels must be a non-empty array");
            c.degrade.kernels.clear();
            for (const json& k : arr) {
                if (!k.is_string())
                    throw ConfigError("degrade.kernels entries must be strings");
                c.degrade.kernels.push_back(resample_kernel_from_string(k.get<std::string>()));
            }
        }
        s.finish();
    }
    if (root.has("schedule")) {
        Scope s(root.raw("schedule"), "schedule");
        s.get("steps", c.schedule.steps);
        s.get("eta_min", c.schedule.eta_min);
        s.get("eta_max", c.schedule.eta_max);
        s.get("kappa", c.schedule.kappa);
        if (s.has("form")) {
            std::string f;
            s.get("form", f);
            c.schedule.form = schedule_form_from_string(f);
        }
        s.finish();
    }
    if (root.has("models")) {
        Scope s(root.raw("models"), "models");
        s.get("codec", c.models.codec);
        s.get("latent_channels", c.models.latent_channels);
        s.get("base_channels", c.models.base_channels);
        s.get("temb_dim", c.models.temb_dim);
        s.get("groups", c.models.groups);
        s.get("disc_base_channels", c.models.disc_base_channels);
        s.get("ae_base_channels", c.models.ae_base_channels);
        s.get("codec_iterations", c.models.codec_iterations);
        s.get("codec_lr", c.models.codec_lr);
        if (s.has("embedder")) {
            Scope e(s.raw("embedder"), "models.embedder");
            e.get("input_size", c.models.embedder.input_size);
            e.get("base_channels", c.models.embedder.base_channels);
            e.get("dim", c.models.embedder.dim);
            e.get("seed", c.models.embedder.seed);
            e.finish();
        }
        s.finish();
    }
    if (root.has("train")) {
        Scope s(root.raw("train"), "train");
        s.get("iterations", c.train.iterations);
        s.get("batch_size", c.train.batch_size);
        s.get("lr_teacher", c.train.lr_teacher);
        s.get("lr_student", c.train.lr_student);
        s.get("lr_disc", c.train.lr_disc);
        s.get("checkpoint_every", c.train.checkpoint_every);
        s.get("weight_by_wt", c.train.weight_by_wt);
        s.get("teacher_single_call", c.train.teacher_single_call);
        s.get("cache_teacher_targets", c.train.cache_teacher_targets);
        if (s.has("weights")) {
            Scope w(s.raw("weights"), "train.weights");
            w.get("hfp", c.train.weights.lambda_hfp);
            w.get("sd", c.train.weights.lambda_sd);
            w.get("adv", c.train.weights.lambda_adv);
            w.finish();
        }
        s.finish();
    }
    if (root.has("metrics")) {
        Scope s(root.raw("metrics"), "metrics");
        s.get("rho", c.metrics.rho);
        s.get("lowpass_frac", c.metrics.lowpass_frac);
        s.get("analyze_images", c.metrics.analyze_images);
        s.finish();
    }
    if (root.has("run")) {
        Scope s(root.raw("run"), "run");
        s.get("teacher_checkpoint", c.run.teacher_checkpoint);
        s.get("student_checkpoint", c.run.student_checkpoint);
        s.get("input_dir", c.run.input_dir);
        s.get("method", c.run.method);
        s.finish();
    }
    root.get("out_dir", c.out_dir);
    root.get("seed", c.seed);
    root.finish();

    c.train.schedule = c.schedule;
    c.models.embedder.image_channels = 3;
    c.validate();
    return c;
}

json to_json(const ExperimentConfig& c) {
    json kernels = json::array();
    for (ResampleKernel k : c.degrade.kernels) kernels.push_back(to_string(k));
    return json{
        {"dataset",
         {{"dir", c.dataset.dir},
          {"val_dir", c.dataset.val_dir},
          {"patch", c.dataset.patch},
          {"resample_each_epoch", c.dataset.resample_each_epoch},
          {"count", c.dataset.count},
          {"val_count", c.dataset.val_count},
          {"image_size", c.dataset.image_size}}},
        {"degrade",
         {{"blur_sigma", interval_json(c.degrade.blur_sigma)},
          {"scale", c.degrade.scale},
          {"noise_sigma", interval_json(c.degrade.noise_sigma)},
          {"jpeg_enabled", c.degrade.jpeg_enabled},
          {"jpeg_quality", interval_json(c.degrade.jpeg_quality)},
          {"kernels", kernels}}},
        {"schedule",
         {{"steps", c.schedule.steps},
          {"eta_min", c.schedule.eta_min},
          {"eta_max", c.schedule.eta_max},
          {"kappa", c.schedule.kappa},
          {"form", to_string(c.schedule.form)}}},
        {"models",
         {{"codec", c.models.codec},
          {"latent_channels", c.models.latent_channels},
          {"base_channels", c.models.base_channels},
          {"temb_dim", c.models.temb_dim},
          {"groups", c.models.groups},
          {"disc_base_channels", c.models.disc_base_channels},
          {"ae_base_channels", c.models.ae_base_channels},
          {"codec_iterations", c.models.codec_iterations},
          {"codec_lr", c.models.codec_lr},
          {"embedder",
           {{"input_size", c.models.embedder.input_size},
            {"base_channels", c.models.embedder.base_channels},
            {"dim", c.models.embedder.dim},
            {"seed", c.models.embedder.seed}}}}},
        {"train",
         {{"iterations", c.train.iterations},
          {"batch_size", c.train.batch_size},
          {"lr_teacher", c.train.lr_teacher},
          {"lr_student", c.train.lr_student},
          {"lr_disc", c.train.lr_disc},
          {"checkpoint_every", c.train.checkpoint_every},
          {"weight_by_wt", c.train.weight_by_wt},
          {"teacher_single_call", c.train.teacher_single_call},
          {"cache_teacher_targets", c.train.cache_teacher_targets},
          {"weights",
           {{"hfp", c.train.weights.lambda_hfp},
            {"sd", c.train.weights.lambda_sd},
            {"adv", c.train.weights.lambda_adv}}}}},
        {"metrics",
         {{"rho", c.metrics.rho},
          {"lowpass_frac", c.metrics.lowpass_frac},
          {"analyze_images", c.metrics.analyze_images}}},
        {"run",
         {{"teacher_checkpoint", c.run.teacher_checkpoint},
          {"student_checkpoint", c.run.student_checkpoint},
          {"input_dir", c.run.input_dir},
          {"method", c.run.method}}},
        {"out_dir", c.out_dir},
        {"seed", c.seed},
    };
}

json default_config_json() { return to_json(ExperimentConfig{}); }

std::string canonical_config_text(const ExperimentConfig& c) { return to_json(c).dump(2); }

std::string config_digest(const std::string& canonical_text) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx",
                  static_cast<unsigned long long>(fnv1a64(canonical_text)));
    return buf;
}

void apply_override(json& j, const std::string& key_value) {
    const auto eq = key_value.find('=');
    if (eq == std::string::npos || eq == 0)
        throw ConfigError("override must look like key.path=value: " + key_value);
    const std::string path = key_value.substr(0, eq);
    const std::string text = key_value.substr(eq + 1);

    json value;
    try {
        value = json::parse(text);
    } catch (const json::exception&) {
        value = text;
    }

    json* node = &j;
    std::istringstream parts(path);
    std::string part;
    std::vector<std::string> keys;
    while (std::getline(parts, part, '.')) {
        if (part.empty()) throw ConfigError("override path has an empty segment: " + path);
        keys.push_back(part);
    }
    for (std::size_t i = 0; i + 1 < keys.size(); ++i) node = &(*node)[keys[i]];
    (*node)[keys.back()] = value;
}

ExperimentConfig load_config(const std::string& path, const std::vector<std::string>& overrides,
                             std::optional<std::uint64_t> seed_flag,
                             const std::optional<std::string>& out_flag) {
    json j = json::object();
    if (!path.empty()) {
        std::ifstream in(path);
        if (!in) throw ConfigError("cannot open config file: " + path);
        try {
            in >> j;
        } catch (const json::exception& e) {
            throw ConfigError("invalid JSON in " + path + ": " + e.what());
        }
        if (!j.is_object()) throw ConfigError("config root must be a JSON object: " + path);
    }
    for (const std::string& o : overrides) apply_override(j, o);
    if (seed_flag) j["seed"] = *seed_flag;
    if (out_flag) j["out_dir"] = *out_flag;
    return parse_config(j);
}

}  // namespace shiftsr
