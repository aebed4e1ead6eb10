#pragma once

#include <functional>
#include <memory>
#include <vector>

#include "shiftsr/nn/tensor.hpp"

namespace shiftsr::nn {

struct Parameter;
struct Node;
using Var = std::shared_ptr<Node>;

/// One value in the computation tape. Holds the forward result and, after
/// Graph::backward, the gradient of the loss with respect to it.
struct Node {
    Tensor value;
    Tensor grad;
    bool requires_grad = false;
    bool grad_alloc = false;
    Parameter* bound = nullptr;
    std::vector<Var> parents;
    std::function<void(Node&)> backward;

    Tensor& ensure_grad() {
        if (!grad_alloc) {
            grad = Tensor::zeros(value.shape);
            grad_alloc = true;
        }
        return grad;
    }
    void accumulate(const Tensor& g) {
        Tensor& dst = ensure_grad();
        for (std::size_t i = 0; i < dst.v.size(); ++i) dst.v[i] += g.v[i];
    }
};

/// Reverse-mode tape. One Graph per training step; backward() may be called once.
/// A Graph constructed with grad_enabled=false evaluates forward only and
/// records nothing (inference mode).
class Graph {
public:
    explicit Graph(bool grad_enabled = true) : grad_on_(grad_enabled) {}

    bool grad_enabled() const { return grad_on_; }

    Var leaf(Tensor v, bool requires_grad = false);
    /// Wrap a persistent parameter. Its gradient lands in p.grad after backward()
    /// when trainable; a frozen wrap is a plain constant.
    Var param(Parameter& p, bool trainable = true);

    /// Backpropagate from a scalar node through the recorded tape.
    void backward(const Var& loss);

    Var record(Tensor value, std::vector<Var> parents, std::function<void(Node&)> backward_fn);

    std::size_t tape_size() const { return tape_.size(); }

private:
    bool grad_on_;
    bool backward_done_ = false;
    std::vector<Var> tape_;
};

// ---- elementwise / arithmetic ----
Var add(Graph& g, const Var& a, const Var& b);
Var sub(Graph& g, const Var& a, const Var& b);
Var mul(Graph& g, const Var& a, const Var& b);
/// k*x + m, elementwise with scalars k, m.
Var affine(Graph& g, const Var& x, double k, double m);
inline Var scale(Graph& g, const Var& x, double k) { return affine(g, x, k, 0.0); }
Var relu(Graph& g, const Var& x);
Var leaky_relu(Graph& g, const Var& x, double slope);
Var silu(Graph& g, const Var& x);
Var sigmoid(Graph& g, const Var& x);
Var clamp01(Graph& g, const Var& x);

// ---- structure ----
Var concat_channels(Graph& g, const Var& a, const Var& b);
Var upsample_nearest2(Graph& g, const Var& x);
Var add_channel_bias(Graph& g, const Var& x, const Var& bias_nc);
Var bilinear_resize(Graph& g, const Var& x, int out_h, int out_w);

// ---- neural net primitives ----
Var conv2d(Graph& g, const Var& x, const Var& w, const Var& b, int stride, int pad);
Var linear(Graph& g, const Var& x, const Var& w, const Var& b);
Var group_norm(Graph& g, const Var& x, const Var& gamma, const Var& beta, int groups,
               double eps = 1e-5);
Var global_avg_pool(Graph& g, const Var& x);
Var l2_normalize_rows(Graph& g, const Var& x, double eps = 1e-12);

// ---- wavelet bands (orthonormal single-level Haar; see wavelet.hpp for the
// band convention) ----
enum class HaarBand { LL, LH, HL, HH };
Var haar_band(Graph& g, const Var& x, HaarBand band);

// ---- reductions ----
Var mean_all(Graph& g, const Var& x);
Var mse(Graph& g, const Var& a, const Var& b);
/// Per-row cosine similarity of (n, d) matrices with an epsilon-guarded
/// denominator: dot / (|a||b| + eps). Result shape (n, 1, 1, 1).
Var rowwise_cosine(Graph& g, const Var& a, const Var& b, double eps);

}  // namespace shiftsr::nn
