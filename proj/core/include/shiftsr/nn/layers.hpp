#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "shiftsr/nn/graph.hpp"
#include "shiftsr/nn/tensor.hpp"

namespace shiftsr::nn {

/// A named, persistent trainable tensor. Gradients accumulate into `grad`
/// across Graph::backward calls until zero_grad().
struct Parameter {
    std::string name;
    Tensor value{Shape{}};
    Tensor grad{Shape{}};

    Parameter() = default;
    Parameter(std::string n, Tensor v)
        : name(std::move(n)), value(std::move(v)), grad(Tensor::zeros(value.shape)) {}

    void zero_grad() { std::fill(grad.v.begin(), grad.v.end(), 0.0); }
};

/// Deterministic per-parameter init seed: mixes a base seed with the
/// parameter name so layout changes do not shuffle unrelated layers.
std::uint64_t param_seed(std::uint64_t base_seed, const std::string& name);

Tensor he_normal(Shape s, int fan_in, std::uint64_t seed);
Tensor uniform_init(Shape s, double lo, double hi, std::uint64_t seed);

/// Flat registry of parameters owned by a model. Stable iteration order
/// (registration order) keeps optimizer updates and checkpoints deterministic.
class ParamRegistry {
public:
    Parameter& add(const std::string& name, Tensor init);
    std::vector<Parameter*> all();
    std::vector<const Parameter*> all() const;
    Parameter& at(const std::string& name);
    const Parameter& at(const std::string& name) const;
    bool contains(const std::string& name) const;
    std::size_t size() const { return order_.size(); }
    void zero_grad();
    std::int64_t numel() const;

private:
    std::vector<std::string> order_;
    std::map<std::string, Parameter> by_name_;
};

struct Conv2dLayer {
    Parameter* w = nullptr;
    Parameter* b = nullptr;
    int stride = 1;
    int pad = 0;

    /// He-normal weight init, zero bias. `zero_init` zeroes the weight too
    /// (used for output projections that must start as the identity map).
    static Conv2dLayer make(ParamRegistry& reg, const std::string& name, int in_ch, int out_ch,
                            int ksize, int stride, int pad, std::uint64_t seed,
                            bool zero_init = false);
    Var forward(Graph& g, const Var& x, bool trainable) const;
};

struct LinearLayer {
    Parameter* w = nullptr;
    Parameter* b = nullptr;

    static LinearLayer make(ParamRegistry& reg, const std::string& name, int in_dim, int out_dim,
                            std::uint64_t seed, bool zero_init = false);
    Var forward(Graph& g, const Var& x, bool trainable) const;
};

struct GroupNormLayer {
    Parameter* gamma = nullptr;
    Parameter* beta = nullptr;
    int groups = 1;

    static GroupNormLayer make(ParamRegistry& reg, const std::string& name, int channels,
                               int groups);
    Var forward(Graph& g, const Var& x, bool trainable) const;
};

/// Adam with bias correction. First/second moments are keyed by parameter
/// name so optimizer state survives checkpoint round-trips.
class Adam {
public:
    struct Config {
        double lr = 1e-4;
        double beta1 = 0.9;
        double beta2 = 0.999;
        double eps = 1e-8;
    };

    explicit Adam(Config cfg) : cfg_(cfg) {}

    void step(const std::vector<Parameter*>& params);
    std::int64_t iterations() const { return t_; }
    const Config& config() const { return cfg_; }
    void set_lr(double lr) { cfg_.lr = lr; }

    /// State export for checkpointing: moment tensors plus the step counter.
    std::map<std::string, Tensor> export_state() const;
    void import_state(const std::map<std::string, Tensor>& state, std::int64_t iterations);

private:
    Config cfg_;
    std::int64_t t_ = 0;
    std::map<std::string, Tensor> m_, v_;
};

}  // namespace shiftsr::nn
