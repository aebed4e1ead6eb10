#pragma once

#include <utility>

#include "shiftsr/models.hpp"

namespace shiftsr::testing {

/// Embedder test double returning a fixed (batch, d) matrix regardless of
/// input; rows need not be unit-norm so cosine normalization is exercised.
class StubEmbedder : public Embedder {
public:
    explicit StubEmbedder(nn::Tensor rows) : rows_(std::move(rows)) {}
    nn::Var embed(nn::Graph& g, const nn::Var& x) override {
        if (x->value.shape.n != rows_.shape.n)
            throw ShapeError("stub embedder batch mismatch");
        return g.leaf(rows_, false);
    }
    int dim() const override { return rows_.shape.c; }
    int input_size() const override { return 1; }
    bool frozen() const override { return true; }
    nn::ParamRegistry& params() override { return reg_; }
    const nn::ParamRegistry& params() const override { return reg_; }

private:
    nn::Tensor rows_;
    nn::ParamRegistry reg_;
};

/// Denoiser test double that returns a stored clean latent regardless of
/// (x_t, y, t) - the "exact predictor" used to probe sampler algebra.
class OracleDenoiser : public Denoiser {
public:
    explicit OracleDenoiser(nn::Tensor x0) : x0_(std::move(x0)) {}
    nn::Var predict(nn::Graph& g, const nn::Var& x_t, const nn::Var& y, int t) override {
        (void)y;
        (void)t;
        nn::check_same_shape(x_t->value, x0_, "oracle denoiser");
        ++eval_calls_;
        return g.leaf(x0_, false);
    }
    void set_trainable(bool) override {}
    bool trainable() const override { return false; }
    std::int64_t eval_calls() const override { return eval_calls_; }
    nn::ParamRegistry& params() override { return reg_; }
    const nn::ParamRegistry& params() const override { return reg_; }

private:
    nn::Tensor x0_;
    std::int64_t eval_calls_ = 0;
    nn::ParamRegistry reg_;
};

}  // namespace shiftsr::testing
