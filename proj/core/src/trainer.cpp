#include "shiftsr/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_map>

#include "shiftsr/checkpoint.hpp"
#include "shiftsr/errors.hpp"
#include "shiftsr/imageio.hpp"
#include "shiftsr/sampler.hpp"
#include "shiftsr/util.hpp"

namespace shiftsr {

using nn::Graph;
using nn::Tensor;
using nn::Var;

void TrainConfig::validate() const {
    if (iterations < 1) throw ConfigError("iterations must be >= 1");
    if (batch_size < 1) throw ConfigError("batch size must be >= 1");
    if (lr_teacher <= 0.0 || lr_student <= 0.0 || lr_disc <= 0.0)
        throw ConfigError("learning rates must be positive");
    if (checkpoint_every < 1) throw ConfigError("checkpoint cadence must be >= 1");
    if (weights.lambda_hfp < 0.0 || weights.lambda_sd < 0.0 || weights.lambda_adv < 0.0)
        throw ConfigError("loss weights must be non-negative");
}

namespace {

void seek_stream(PairStream& data, std::int64_t iteration) {
    const int per = data.batches_per_epoch();
    data.seek(static_cast<int>(iteration / per), static_cast<int>(iteration % per));
}

std::map<std::string, Tensor> prefixed(const std::map<std::string, Tensor>& in,
                                       const std::string& prefix) {
    std::map<std::string, Tensor> out;
    for (const auto& [k, v] : in) out.emplace(prefix + k, v);
    return out;
}

std::map<std::string, Tensor> strip_prefix(const std::map<std::string, Tensor>& in,
                                           const std::string& prefix) {
    std::map<std::string, Tensor> out;
    for (const auto& [k, v] : in)
        if (k.rfind(prefix, 0) == 0) out.emplace(k.substr(prefix.size()), v);
    return out;
}

std::map<std::string, Tensor> without_prefix(const std::map<std::string, Tensor>& in,
                                             const std::string& prefix) {
    std::map<std::string, Tensor> out;
    for (const auto& [k, v] : in)
        if (k.rfind(prefix, 0) != 0) out.emplace(k, v);
    return out;
}

void restore_codec(Codec& codec, const std::map<std::string, Tensor>& tensors) {
    const auto codec_t = strip_prefix(tensors, "codec.");
    if (!codec_t.empty()) import_params(codec.params(), codec_t);
}

}  // namespace

TeacherTrainResult train_teacher(const TrainConfig& cfg, Codec& codec, MiniUNet& net,
                                 PairStream& data, const std::string& out_dir,
                                 const std::string& resume_dir,
                                 const std::string& config_text) {
    cfg.validate();
    const Schedule sched = Schedule::build(cfg.schedule);
    const int T = sched.steps();
    net.set_trainable(true);
    nn::Adam opt(nn::Adam::Config{.lr = cfg.lr_teacher});
    std::mt19937_64 master(mix_seed(cfg.seed, 0x7EAC11E5ull));
    std::int64_t start = 0;
    if (!resume_dir.empty()) {
        const Checkpoint ck = load_checkpoint(resume_dir);
        restore_codec(codec, ck.tensors);
        import_params(net.params(), without_prefix(ck.tensors, "codec."));
        opt.import_state(ck.opt_tensors, ck.opt_iterations);
        master = rng_from_string(ck.rng_state);
        start = ck.iteration;
    }
    seek_stream(data, start);

    TeacherTrainResult result;
    auto save = [&](std::int64_t done) {
        if (out_dir.empty()) return;
        Checkpoint ck;
        ck.kind = "teacher";
        ck.iteration = done;
        ck.config_text = config_text;
        ck.etas = sched.etas();
        ck.kappa = sched.kappa();
        ck.rng_state = rng_to_string(master);
        ck.tensors = export_params(net.params());
        for (auto& [k, v] : prefixed(export_params(codec.params()), "codec."))
            ck.tensors.emplace(k, std::move(v));
        ck.opt_tensors = opt.export_state();
        ck.opt_iterations = opt.iterations();
        save_checkpoint(out_dir, ck);
    };

    for (std::int64_t it = start; it < cfg.iterations; ++it) {
        const PairBatch pb = data.next();
        const Tensor z0 = codec.encode_eval(pb.hr);
        const Tensor zy = codec.encode_eval(pb.lr_up);
        const int t = std::uniform_int_distribution<int>(1, T)(master);
        const Tensor eps = Tensor::randn(z0.shape, master);
        const Tensor x_t = sched.forward_diffuse(z0, zy, t, eps);

        net.params().zero_grad();
        Graph g(true);
        Var pred = net.predict(g, g.leaf(x_t), g.leaf(zy), t);
        Var loss = nn::mse(g, pred, g.leaf(z0));
        if (cfg.weight_by_wt) {
            const auto w = sched.coeffs(t).weight;
            if (w) loss = nn::scale(g, loss, *w);
        }
        const double lv = loss->value.v[0];
        if (!std::isfinite(lv))
            throw TrainingAbort("teacher_mse",
                                "non-finite at iteration " + std::to_string(it));
        g.backward(loss);
        opt.step(net.params().all());
        result.losses.push_back(lv);
        if ((it + 1) % cfg.checkpoint_every == 0 && it + 1 < cfg.iterations) save(it + 1);
    }
    result.iterations = cfg.iterations;
    save(cfg.iterations);
    return result;
}

DistillResult distill(const TrainConfig& cfg, Codec& codec, Denoiser& teacher,
                      MiniUNet& student, PatchDiscriminator& disc, Embedder& embedder,
                      PairStream& data, const std::string& out_dir,
                      const std::string& resume_dir, const std::string& config_text) {
    cfg.validate();
    const Schedule sched = Schedule::build(cfg.schedule);
    const int T = sched.steps();
    teacher.set_trainable(false);
    student.set_trainable(true);

    DistillResult result;
    const auto teacher_params = export_params(teacher.params());
    const bool same_layout = [&] {
        if (teacher_params.size() != student.params().size()) return false;
        for (const nn::Parameter* p : student.params().all()) {
            const auto it = teacher_params.find(p->name);
            if (it == teacher_params.end() || !(it->second.shape == p->value.shape))
                return false;
        }
        return !teacher_params.empty();
    }();
    if (same_layout && resume_dir.empty()) {
        import_params(student.params(), teacher_params);
        result.teacher_checksum = params_checksum(teacher.params());
        result.student_init_checksum = params_checksum(student.params());
        if (result.teacher_checksum != result.student_init_checksum)
            throw TrainingAbort("init", "student initialization diverged from teacher");
    }

    nn::Adam opt_s(nn::Adam::Config{.lr = cfg.lr_student});
    nn::Adam opt_d(nn::Adam::Config{.lr = cfg.lr_disc});
    std::mt19937_64 master(mix_seed(cfg.seed, 0xD1577ull));
    std::int64_t start = 0;
    if (!resume_dir.empty()) {
        const Checkpoint ck = load_checkpoint(resume_dir);
        restore_codec(codec, ck.tensors);
        import_params(student.params(), strip_prefix(ck.tensors, "student."));
        import_params(disc.params(), strip_prefix(ck.tensors, "disc."));
        opt_s.import_state(strip_prefix(ck.opt_tensors, "student."), ck.opt_iterations);
        opt_d.import_state(strip_prefix(ck.opt_tensors, "disc."), ck.opt_iterations);
        master = rng_from_string(ck.rng_state);
        start = ck.iteration;
    }
    seek_stream(data, start);

    auto save = [&](std::int64_t done) {
        if (out_dir.empty()) return;
        Checkpoint ck;
        ck.kind = "distill";
        ck.iteration = done;
        ck.config_text = config_text;
        ck.etas = sched.etas();
        ck.kappa = sched.kappa();
        ck.rng_state = rng_to_string(master);
        ck.tensors = prefixed(export_params(student.params()), "student.");
        for (auto& [k, v] : prefixed(export_params(disc.params()), "disc."))
            ck.tensors.emplace(k, std::move(v));
        for (auto& [k, v] : prefixed(export_params(codec.params()), "codec."))
            ck.tensors.emplace(k, std::move(v));
        ck.opt_tensors = prefixed(opt_s.export_state(), "student.");
        for (auto& [k, v] : prefixed(opt_d.export_state(), "disc."))
            ck.opt_tensors.emplace(k, std::move(v));
        ck.opt_iterations = opt_s.iterations();
        save_checkpoint(out_dir, ck);
    };

    std::unordered_map<std::uint64_t, Tensor> cache;
    for (std::int64_t it = start; it < cfg.iterations; ++it) {
        const PairBatch pb = data.next();
        const Tensor z0 = codec.encode_eval(pb.hr);
        const Tensor zy = codec.encode_eval(pb.lr_up);
        // per-item pair-keyed noise keeps each item's initial state stable
        // across epochs, so cached teacher targets stay exact under
        // reshuffled batch groupings (predictions are sample-independent)
        Tensor z_T = Tensor::zeros(zy.shape);
        Tensor z_tch = Tensor::zeros(zy.shape);
        const std::size_t per = z_tch.v.size() / static_cast<std::size_t>(zy.shape.n);
        for (int i = 0; i < zy.shape.n; ++i) {
            const Tensor z0i = slice_image(z0, i);
            const Tensor zyi = slice_image(zy, i);
            std::mt19937_64 noise_rng(
                mix_seed(cfg.seed + 0xE95ull, content_hash(z0i), content_hash(zyi)));
            const Tensor eps = Tensor::randn(zyi.shape, noise_rng);
            const Tensor zti = sched.init_state(zyi, eps);
            std::copy(zti.v.begin(), zti.v.end(),
                      z_T.v.begin() + static_cast<std::ptrdiff_t>(per) * i);
            const std::uint64_t key = mix_seed(content_hash(zti), content_hash(zyi));
            Tensor target;
            const auto hit = cfg.cache_teacher_targets ? cache.find(key) : cache.end();
            if (cfg.cache_teacher_targets && hit != cache.end()) {
                target = hit->second;
                ++result.teacher_cache_hits;
            } else {
                SampleOptions opts;
                opts.mode = SampleMode::Deterministic;
                opts.single_call = cfg.teacher_single_call;
                target = teacher_sample(teacher, zti, zyi, sched, opts);
                ++result.teacher_cache_misses;
                if (cfg.cache_teacher_targets) cache.emplace(key, target);
            }
            std::copy(target.v.begin(), target.v.end(),
                      z_tch.v.begin() + static_cast<std::ptrdiff_t>(per) * i);
        }

        student.params().zero_grad();
        LossReport rep;
        Tensor z_stu_value;
        {
            Graph g(true);
            Var z_stu = student.predict(g, g.leaf(z_T), g.leaf(zy), T);
            z_stu_value = z_stu->value;
            Var l_distill = distill_loss(g, g.leaf(z_tch), z_stu);
            Var l_hfp = hfp_loss(g, g.leaf(z_tch), z_stu);
            Var x_sr = codec.decode(g, z_stu);
            Var l_sd = semantic_loss(g, g.leaf(pb.hr), x_sr, embedder);
            Var l_adv = gen_adv_loss(g, disc.score(g, z_stu, false));
            Var total = total_student_loss(g, l_distill, l_hfp, l_sd, l_adv, cfg.weights, &rep);
            g.backward(total);
        }
        opt_s.step(student.params().all());

        disc.params().zero_grad();
        {
            Graph g(true);
            Var s_real = disc.score(g, g.leaf(z0), true);
            Var s_fake = disc.score(g, g.leaf(z_stu_value), true);
            Var dl = disc_loss(g, s_real, s_fake);
            const double dv = dl->value.v[0];
            if (!std::isfinite(dv))
                throw TrainingAbort("disc_hinge",
                                    "non-finite at iteration " + std::to_string(it));
            rep.disc = dv;
            g.backward(dl);
        }
        opt_d.step(disc.params().all());

        result.losses.push_back(rep);
        if ((it + 1) % cfg.checkpoint_every == 0 && it + 1 < cfg.iterations) save(it + 1);
    }
    result.iterations = cfg.iterations;
    save(cfg.iterations);
    return result;
}

}  // namespace shiftsr
