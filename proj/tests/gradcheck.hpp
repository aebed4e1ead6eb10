#pragma once

#include <functional>
#include <vector>

#include "shiftsr/nn/graph.hpp"
#include "shiftsr/nn/tensor.hpp"

namespace shiftsr::testing {

/// Builds a scalar loss from differentiable wrappers of `inputs`.
using LossBuilder =
    std::function<nn::Var(nn::Graph&, const std::vector<nn::Var>&)>;

struct GradCheckReport {
    double max_rel_err = 0.0;
    double max_abs_err = 0.0;
};

/// Central-difference gradient check of every element of every input.
/// Relative error uses |a - n| / max(|a|, |n|, floor) so near-zero gradients
/// are judged on an absolute scale.
inline GradCheckReport grad_check(const std::vector<nn::Tensor>& inputs, const LossBuilder& build,
                                  double h = 1e-6, double floor_scale = 1e-3) {
    using namespace shiftsr::nn;
    std::vector<Tensor> analytic;
    {
        Graph g(true);
        std::vector<Var> vars;
        vars.reserve(inputs.size());
        for (const auto& t : inputs) vars.push_back(g.leaf(t, true));
        Var loss = build(g, vars);
        g.backward(loss);
        for (auto& v : vars) analytic.push_back(v->ensure_grad());
    }
    auto eval = [&](const std::vector<Tensor>& pts) {
        Graph g(false);
        std::vector<Var> vars;
        vars.reserve(pts.size());
        for (const auto& t : pts) vars.push_back(g.leaf(t, false));
        return build(g, vars)->value.v[0];
    };
    GradCheckReport rep;
    std::vector<Tensor> work = inputs;
    for (std::size_t i = 0; i < inputs.size(); ++i) {
        for (std::size_t j = 0; j < inputs[i].v.size(); ++j) {
            const double orig = work[i].v[j];
            work[i].v[j] = orig + h;
            const double lp = eval(work);
            work[i].v[j] = orig - h;
            const double lm = eval(work);
            work[i].v[j] = orig;
            const double num = (lp - lm) / (2.0 * h);
            const double ana = analytic[i].v[j];
            const double abs_err = std::abs(ana - num);
            const double denom = std::max({std::abs(ana), std::abs(num), floor_scale});
            rep.max_abs_err = std::max(rep.max_abs_err, abs_err);
            rep.max_rel_err = std::max(rep.max_rel_err, abs_err / denom);
        }
    }
    return rep;
}

/// Gaussian tensor with values pushed away from |v| < margin (for ops with
/// kinks at zero).
inline nn::Tensor randn_away_from_zero(nn::Shape s, std::mt19937_64& rng, double margin = 0.2) {
    nn::Tensor t = nn::Tensor::randn(s, rng);
    for (double& v : t.v) {
        if (v >= 0.0 && v < margin) v += margin;
        if (v < 0.0 && v > -margin) v -= margin;
    }
    return t;
}

}  // namespace shiftsr::testing
