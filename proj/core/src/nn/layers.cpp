#include "shiftsr/nn/layers.hpp"

#include <cmath>
#include <random>

#include "shiftsr/errors.hpp"

namespace shiftsr::nn {

std::uint64_t param_seed(std::uint64_t base_seed, const std::string& name) {
    std::uint64_t h = 14695981039346656037ull ^ base_seed;
    for (unsigned char c : name) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

Tensor he_normal(Shape s, int fan_in, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    Tensor t = Tensor::randn(s, rng);
    const double std_dev = std::sqrt(2.0 / static_cast<double>(fan_in));
    for (double& v : t.v) v *= std_dev;
    return t;
}

Tensor uniform_init(Shape s, double lo, double hi, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    return Tensor::uniform(s, lo, hi, rng);
}

Parameter& ParamRegistry::add(const std::string& name, Tensor init) {
    if (by_name_.count(name)) throw ConfigError("duplicate parameter name: " + name);
    order_.push_back(name);
    auto [it, ok] = by_name_.emplace(name, Parameter(name, std::move(init)));
    (void)ok;
    return it->second;
}

std::vector<Parameter*> ParamRegistry::all() {
    std::vector<Parameter*> out;
    out.reserve(order_.size());
    for (const auto& n : order_) out.push_back(&by_name_.at(n));
    return out;
}

std::vector<const Parameter*> ParamRegistry::all() const {
    std::vector<const Parameter*> out;
    out.reserve(order_.size());
    for (const auto& n : order_) out.push_back(&by_name_.at(n));
    return out;
}

Parameter& ParamRegistry::at(const std::string& name) {
    auto it = by_name_.find(name);
    if (it == by_name_.end()) throw ConfigError("unknown parameter: " + name);
    return it->second;
}

const Parameter& ParamRegistry::at(const std::string& name) const {
    auto it = by_name_.find(name);
    if (it == by_name_.end()) throw ConfigError("unknown parameter: " + name);
    return it->second;
}

bool ParamRegistry::contains(const std::string& name) const { return by_name_.count(name) > 0; }

void ParamRegistry::zero_grad() {
    for (const auto& n : order_) by_name_.at(n).zero_grad();
}

std::int64_t ParamRegistry::numel() const {
    std::int64_t total = 0;
    for (const auto& n : order_) total += by_name_.at(n).value.shape.numel();
    return total;
}

Conv2dLayer Conv2dLayer::make(ParamRegistry& reg, const std::string& name, int in_ch, int out_ch,
                              int ksize, int stride, int pad, std::uint64_t seed, bool zero_init) {
    Conv2dLayer l;
    const Shape ws{out_ch, in_ch, ksize, ksize};
    Tensor w = zero_init ? Tensor::zeros(ws)
                         : he_normal(ws, in_ch * ksize * ksize, param_seed(seed, name + ".w"));
    l.w = &reg.add(name + ".w", std::move(w));
    l.b = &reg.add(name + ".b", Tensor::zeros(Shape{out_ch, 1, 1, 1}));
    l.stride = stride;
    l.pad = pad;
    return l;
}

Var Conv2dLayer::forward(Graph& g, const Var& x, bool trainable) const {
    return conv2d(g, x, g.param(*w, trainable), g.param(*b, trainable), stride, pad);
}

LinearLayer LinearLayer::make(ParamRegistry& reg, const std::string& name, int in_dim, int out_dim,
                              std::uint64_t seed, bool zero_init) {
    LinearLayer l;
    const Shape ws{out_dim, in_dim, 1, 1};
    Tensor w = zero_init ? Tensor::zeros(ws) : he_normal(ws, in_dim, param_seed(seed, name + ".w"));
    l.w = &reg.add(name + ".w", std::move(w));
    l.b = &reg.add(name + ".b", Tensor::zeros(Shape{out_dim, 1, 1, 1}));
    return l;
}

Var LinearLayer::forward(Graph& g, const Var& x, bool trainable) const {
    return linear(g, x, g.param(*w, trainable), g.param(*b, trainable));
}

GroupNormLayer GroupNormLayer::make(ParamRegistry& reg, const std::string& name, int channels,
                                    int groups) {
    GroupNormLayer l;
    l.gamma = &reg.add(name + ".gamma", Tensor::full(Shape{channels, 1, 1, 1}, 1.0));
    l.beta = &reg.add(name + ".beta", Tensor::zeros(Shape{channels, 1, 1, 1}));
    l.groups = groups;
    return l;
}

Var GroupNormLayer::forward(Graph& g, const Var& x, bool trainable) const {
    return group_norm(g, x, g.param(*gamma, trainable), g.param(*beta, trainable), groups);
}

void Adam::step(const std::vector<Parameter*>& params) {
    ++t_;
    const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
    for (Parameter* p : params) {
        auto mi = m_.find(p->name);
        if (mi == m_.end()) {
            mi = m_.emplace(p->name, Tensor::zeros(p->value.shape)).first;
            v_.emplace(p->name, Tensor::zeros(p->value.shape));
        }
        Tensor& m = mi->second;
        Tensor& v = v_.at(p->name);
        for (std::size_t i = 0; i < p->value.v.size(); ++i) {
            const double gr = p->grad.v[i];
            m.v[i] = cfg_.beta1 * m.v[i] + (1.0 - cfg_.beta1) * gr;
            v.v[i] = cfg_.beta2 * v.v[i] + (1.0 - cfg_.beta2) * gr * gr;
            const double mh = m.v[i] / bc1;
            const double vh = v.v[i] / bc2;
            p->value.v[i] -= cfg_.lr * mh / (std::sqrt(vh) + cfg_.eps);
        }
    }
}

std::map<std::string, Tensor> Adam::export_state() const {
    std::map<std::string, Tensor> out;
    for (const auto& [name, t] : m_) out.emplace("adam.m." + name, t);
    for (const auto& [name, t] : v_) out.emplace("adam.v." + name, t);
    return out;
}

void Adam::import_state(const std::map<std::string, Tensor>& state, std::int64_t iterations) {
    m_.clear();
    v_.clear();
    t_ = iterations;
    const std::string mp = "adam.m.";
    const std::string vp = "adam.v.";
    for (const auto& [name, t] : state) {
        if (name.rfind(mp, 0) == 0) m_.emplace(name.substr(mp.size()), t);
        else if (name.rfind(vp, 0) == 0) v_.emplace(name.substr(vp.size()), t);
    }
}

}  // namespace shiftsr::nn
