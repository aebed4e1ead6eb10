#include "shiftsr/checkpoint.hpp"

#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "shiftsr/errors.hpp"
#include "shiftsr/util.hpp"

namespace shiftsr {

using nn::Shape;
using nn::Tensor;

namespace {

constexpr char kMagic[4] = {'S', 'S', 'R', 'B'};
constexpr std::uint32_t kVersion = 1;

std::string decimal17(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

std::string config_text_digest(const std::string& text) {
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(fnv1a64(text)));
    return buf;
}

template <typename T>
void write_pod(std::ostream& os, T v) {
    os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T read_pod(std::istream& is) {
    T v{};
    is.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (!is) throw IoError("truncated checkpoint blob");
    return v;
}

void write_tensor(std::ostream& os, const std::string& name, const Tensor& t) {
    write_pod<std::uint32_t>(os, static_cast<std::uint32_t>(name.size()));
    os.write(name.data(), static_cast<std::streamsize>(name.size()));
    write_pod<std::int64_t>(os, t.shape.n);
    write_pod<std::int64_t>(os, t.shape.c);
    write_pod<std::int64_t>(os, t.shape.h);
    write_pod<std::int64_t>(os, t.shape.w);
    write_pod<std::uint64_t>(os, t.v.size());
    os.write(reinterpret_cast<const char*>(t.v.data()),
             static_cast<std::streamsize>(t.v.size() * sizeof(double)));
}

std::pair<std::string, Tensor> read_tensor(std::istream& is) {
    const auto len = read_pod<std::uint32_t>(is);
    std::string name(len, '\0');
    is.read(name.data(), len);
    if (!is) throw IoError("truncated checkpoint blob");
    Shape sh;
    sh.n = read_pod<std::int64_t>(is);
    sh.c = read_pod<std::int64_t>(is);
    sh.h = read_pod<std::int64_t>(is);
    sh.w = read_pod<std::int64_t>(is);
    const auto count = read_pod<std::uint64_t>(is);
    if (static_cast<std::int64_t>(count) != sh.numel())
        throw IoError("checkpoint tensor size disagrees with its shape");
    Tensor t = Tensor::zeros(sh);
    is.read(reinterpret_cast<char*>(t.v.data()),
            static_cast<std::streamsize>(count * sizeof(double)));
    if (!is) throw IoError("truncated checkpoint blob");
    return {std::move(name), std::move(t)};
}

nlohmann::json tensor_entry(const std::string& name, const Tensor& t) {
    nlohmann::json e;
    e["name"] = name;
    e["shape"] = {t.shape.n, t.shape.c, t.shape.h, t.shape.w};
    e["dtype"] = "f64";
    return e;
}

}  // namespace

void save_checkpoint(const std::string& dir, const Checkpoint& c) {
    std::filesystem::create_directories(dir);
    const std::filesystem::path base(dir);
    {
        std::ofstream blob(base / "params.bin", std::ios::binary);
        if (!blob) throw IoError("cannot open checkpoint blob for writing in " + dir);
        blob.write(kMagic, 4);
        write_pod<std::uint32_t>(blob, kVersion);
        write_pod<std::uint64_t>(blob, c.tensors.size() + c.opt_tensors.size());
        for (const auto& [name, t] : c.tensors) write_tensor(blob, name, t);
        for (const auto& [name, t] : c.opt_tensors) write_tensor(blob, "opt::" + name, t);
        if (!blob) throw IoError("failed writing checkpoint blob in " + dir);
    }
    nlohmann::json m;
    m["schema_version"] = 1;
    m["kind"] = c.kind;
    m["iteration"] = c.iteration;
    m["config"] = c.config_text;
    m["config_hash"] = config_text_digest(c.config_text);
    m["kappa"] = decimal17(c.kappa);
    m["etas"] = nlohmann::json::array();
    for (double e : c.etas) m["etas"].push_back(decimal17(e));
    m["rng_state"] = c.rng_state;
    m["opt_iterations"] = c.opt_iterations;
    m["tensors"] = nlohmann::json::array();
    for (const auto& [name, t] : c.tensors) m["tensors"].push_back(tensor_entry(name, t));
    m["opt_tensors"] = nlohmann::json::array();
    for (const auto& [name, t] : c.opt_tensors)
        m["opt_tensors"].push_back(tensor_entry(name, t));
    std::ofstream mf(base / "manifest.json");
    if (!mf) throw IoError("cannot open checkpoint manifest for writing in " + dir);
    mf << m.dump(2) << '\n';
    if (!mf.good()) throw IoError("failed writing checkpoint manifest in " + dir);
}

Checkpoint load_checkpoint(const std::string& dir) {
    const std::filesystem::path base(dir);
    std::ifstream mf(base / "manifest.json");
    if (!mf) throw IoError("missing checkpoint manifest in " + dir);
    nlohmann::json m;
    try {
        mf >> m;
    } catch (const nlohmann::json::exception& e) {
        throw IoError("unreadable checkpoint manifest in " + dir + ": " + e.what());
    }
    Checkpoint c;
    c.kind = m.at("kind").get<std::string>();
    c.iteration = m.at("iteration").get<std::int64_t>();
    c.config_text = m.at("config").get<std::string>();
    c.kappa = std::strtod(m.at("kappa").get<std::string>().c_str(), nullptr);
    for (const auto& e : m.at("etas"))
        c.etas.push_back(std::strtod(e.get<std::string>().c_str(), nullptr));
    c.rng_state = m.at("rng_state").get<std::string>();
    c.opt_iterations = m.at("opt_iterations").get<std::int64_t>();

    std::ifstream blob(base / "params.bin", std::ios::binary);
    if (!blob) throw IoError("missing checkpoint blob in " + dir);
    char magic[4];
    blob.read(magic, 4);
    if (!blob || std::memcmp(magic, kMagic, 4) != 0)
        throw IoError("bad checkpoint blob magic in " + dir);
    const auto version = read_pod<std::uint32_t>(blob);
    if (version != kVersion) throw IoError("unsupported checkpoint blob version");
    const auto count = read_pod<std::uint64_t>(blob);
    for (std::uint64_t i = 0; i < count; ++i) {
        auto [name, t] = read_tensor(blob);
        if (name.rfind("opt::", 0) == 0)
            c.opt_tensors.emplace(name.substr(5), std::move(t));
        else
            c.tensors.emplace(std::move(name), std::move(t));
    }
    if (c.tensors.size() != m.at("tensors").size() ||
        c.opt_tensors.size() != m.at("opt_tensors").size())
        throw IoError("checkpoint manifest and blob disagree in " + dir);
    for (const auto& e : m.at("tensors")) {
        const auto it = c.tensors.find(e.at("name").get<std::string>());
        if (it == c.tensors.end())
            throw IoError("manifest tensor missing from blob: " + e.at("name").get<std::string>());
        const auto sh = e.at("shape");
        if (it->second.shape.n != sh[0].get<std::int64_t>() ||
            it->second.shape.c != sh[1].get<std::int64_t>() ||
            it->second.shape.h != sh[2].get<std::int64_t>() ||
            it->second.shape.w != sh[3].get<std::int64_t>())
            throw IoError("manifest shape disagrees with blob for " + it->first);
    }
    return c;
}

std::map<std::string, Tensor> export_params(const nn::ParamRegistry& reg) {
    std::map<std::string, Tensor> out;
    for (const nn::Parameter* p : reg.all()) out.emplace(p->name, p->value);
    return out;
}

void import_params(nn::ParamRegistry& reg, const std::map<std::string, Tensor>& t) {
    if (t.size() != reg.size())
        throw IoError("parameter count mismatch on import: have " + std::to_string(t.size()) +
                      ", registry expects " + std::to_string(reg.size()));
    for (nn::Parameter* p : reg.all()) {
        const auto it = t.find(p->name);
        if (it == t.end()) throw IoError("parameter missing on import: " + p->name);
        if (!(it->second.shape == p->value.shape))
            throw IoError("parameter shape mismatch on import: " + p->name);
        p->value = it->second;
    }
}

std::uint64_t params_checksum(const nn::ParamRegistry& reg) {
    std::uint64_t acc = 0xcbf29ce484222325ull;
    for (const nn::Parameter* p : reg.all()) {
        for (char ch : p->name) acc = (acc ^ static_cast<unsigned char>(ch)) * 0x100000001b3ull;
        acc = mix_seed(acc, content_hash(p->value));
    }
    return acc;
}

std::string rng_to_string(const std::mt19937_64& rng) {
    std::ostringstream os;
    os << rng;
    return os.str();
}

std::mt19937_64 rng_from_string(const std::string& s) {
    std::mt19937_64 rng;
    std::istringstream is(s);
    is >> rng;
    if (is.fail()) throw IoError("invalid RNG state string");
    return rng;
}

}  // namespace shiftsr
