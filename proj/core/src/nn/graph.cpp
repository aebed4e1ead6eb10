#include "shiftsr/nn/graph.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <cstring>

#include "shiftsr/errors.hpp"
#include "shiftsr/nn/layers.hpp"

namespace shiftsr::nn {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapRow = Eigen::Map<RowMat>;
using MapRowC = Eigen::Map<const RowMat>;

bool any_grad(const std::vector<Var>& parents) {
    for (const auto& p : parents)
        if (p->requires_grad) return true;
    return false;
}

void require(bool ok, const char* op, const std::string& what) {
    if (!ok) throw ShapeError(std::string(op) + ": " + what);
}

}  // namespace

Var Graph::leaf(Tensor v, bool requires_grad) {
    auto n = std::make_shared<Node>();
    n->value = std::move(v);
    n->requires_grad = grad_on_ && requires_grad;
    if (n->requires_grad) tape_.push_back(n);
    return n;
}

Var Graph::param(Parameter& p, bool trainable) {
    auto n = std::make_shared<Node>();
    n->value = p.value;
    n->requires_grad = grad_on_ && trainable;
    if (n->requires_grad) {
        n->bound = &p;
        tape_.push_back(n);
    }
    return n;
}

Var Graph::record(Tensor value, std::vector<Var> parents, std::function<void(Node&)> backward_fn) {
    auto n = std::make_shared<Node>();
    n->value = std::move(value);
    n->requires_grad = grad_on_ && any_grad(parents);
    if (n->requires_grad) {
        n->parents = std::move(parents);
        n->backward = std::move(backward_fn);
        tape_.push_back(n);
    }
    return n;
}

void Graph::backward(const Var& loss) {
    if (!grad_on_) throw ShapeError("backward: graph was built with gradients disabled");
    if (backward_done_) throw ShapeError("backward: tape already consumed");
    backward_done_ = true;
    require(loss->value.shape.numel() == 1, "backward", "loss must be scalar");
    loss->ensure_grad().v[0] = 1.0;
    for (auto it = tape_.rbegin(); it != tape_.rend(); ++it) {
        Node& n = **it;
        if (!n.grad_alloc) continue;
        if (n.backward) n.backward(n);
        if (n.bound) {
            Tensor& pg = n.bound->grad;
            for (std::size_t i = 0; i < pg.v.size(); ++i) pg.v[i] += n.grad.v[i];
        }
    }
}

// ---------------------------------------------------------------------------
// elementwise
// ---------------------------------------------------------------------------

Var add(Graph& g, const Var& a, const Var& b) {
    check_same_shape(a->value, b->value, "add");
    Tensor out = a->value;
    for (std::size_t i = 0; i < out.v.size(); ++i) out.v[i] += b->value.v[i];
    return g.record(std::move(out), {a, b}, [a, b](Node& n) {
        if (a->requires_grad) a->accumulate(n.grad);
        if (b->requires_grad) b->accumulate(n.grad);
    });
}

Var sub(Graph& g, const Var& a, const Var& b) {
    check_same_shape(a->value, b->value, "sub");
    Tensor out = a->value;
    for (std::size_t i = 0; i < out.v.size(); ++i) out.v[i] -= b->value.v[i];
    return g.record(std::move(out), {a, b}, [a, b](Node& n) {
        if (a->requires_grad) a->accumulate(n.grad);
        if (b->requires_grad) {
            Tensor& dst = b->ensure_grad();
            for (std::size_t i = 0; i < dst.v.size(); ++i) dst.v[i] -= n.grad.v[i];
        }
    });
}

Var mul(Graph& g, const Var& a, const Var& b) {
    check_same_shape(a->value, b->value, "mul");
    Tensor out = a->value;
    for (std::size_t i = 0; i < out.v.size(); ++i) out.v[i] *= b->value.v[i];
    return g.record(std::move(out), {a, b}, [a, b](Node& n) {
        if (a->requires_grad) {
            Tensor& dst = a->ensure_grad();
            for (std::size_t i = 0; i < dst.v.size(); ++i) dst.v[i] += n.grad.v[i] * b->value.v[i];
        }
        if (b->requires_grad) {
            Tensor& dst = b->ensure_grad();
            for (std::size_t i = 0; i < dst.v.size(); ++i) dst.v[i] += n.grad.v[i] * a->value.v[i];
        }
    });
}

Var affine(Graph& g, const Var& x, double k, double m) {
    Tensor out = x->value;
    for (double& v : out.v) v = k * v + m;
    return g.record(std::move(out), {x}, [x, k](Node& n) {
        Tensor& dst = x->ensure_grad();
        for (std::size_t i = 0; i < dst.v.size(); ++i) dst.v[i] += k * n.grad.v[i];
    });
}

Var relu(Graph& g, const Var& x) {
    Tensor out = x->value;
    for (double& v : out.v) v = v > 0.0 ? v : 0.0;
    return g.record(std::move(out), {x}, [x](Node& n) {
        Tensor& dst = x->ensure_grad();
        for (std::size_t i = 0; i < dst.v.size(); ++i)
            if (x->value.v[i] > 0.0) dst.v[i] += n.grad.v[i];
    });
}

Var leaky_relu(Graph& g, const Var& x, double slope) {
    Tensor out = x->value;
    for (double& v : out.v) v = v > 0.0 ? v : slope * v;
    return g.record(std::move(out), {x}, [x, slope](Node& n) {
        Tensor& dst = x->ensure_grad();
        for (std::size_t i = 0; i < dst.v.size(); ++i)
            dst.v[i] += n.grad.v[i] * (x->value.v[i] > 0.0 ? 1.0 : slope);
    });
}

Var silu(Graph& g, const Var& x) {
    Tensor out = x->value;
    for (double& v : out.v) v = v / (1.0 + std::exp(-v));
    return g.record(std::move(out), {x}, [x](Node& n) {
        Tensor& dst = x->ensure_grad();
        for (std::size_t i = 0; i < dst.v.size(); ++i) {
            const double v = x->value.v[i];
            const double s = 1.0 / (1.0 + std::exp(-v));
            dst.v[i] += n.grad.v[i] * (s * (1.0 + v * (1.0 - s)));
        }
    });
}

Var sigmoid(Graph& g, const Var& x) {
    Tensor out = x->value;
    for (double& v : out.v) v = 1.0 / (1.0 + std::exp(-v));
    Tensor saved = out;
    return g.record(std::move(out), {x}, [x, saved = std::move(saved)](Node& n) {
        Tensor& dst = x->ensure_grad();
        for (std::size_t i = 0; i < dst.v.size(); ++i) {
            const double y = saved.v[i];
            dst.v[i] += n.grad.v[i] * y * (1.0 - y);
        }
    });
}

Var clamp01(Graph& g, const Var& x) {
    Tensor out = x->value;
    for (double& v : out.v) v = v < 0.0 ? 0.0 : (v > 1.0 ? 1.0 : v);
    return g.record(std::move(out), {x}, [x](Node& n) {
        Tensor& dst = x->ensure_grad();
        for (std::size_t i = 0; i < dst.v.size(); ++i) {
            const double v = x->value.v[i];
            if (v > 0.0 && v < 1.0) dst.v[i] += n.grad.v[i];
        }
    });
}

// ---------------------------------------------------------------------------
// structure
// ---------------------------------------------------------------------------

Var concat_channels(Graph& g, const Var& a, const Var& b) {
    const Shape& sa = a->value.shape;
    const Shape& sb = b->value.shape;
    require(sa.n == sb.n && sa.h == sb.h && sa.w == sb.w, "concat_channels",
            "batch/spatial mismatch " + sa.str() + " vs " + sb.str());
    Tensor out(Shape{sa.n, sa.c + sb.c, sa.h, sa.w});
    const std::size_t plane = static_cast<std::size_t>(sa.h) * sa.w;
    const std::size_t a_blk = static_cast<std::size_t>(sa.c) * plane;
    const std::size_t b_blk = static_cast<std::size_t>(sb.c) * plane;
    for (int n = 0; n < sa.n; ++n) {
        std::memcpy(out.v.data() + n * (a_blk + b_blk), a->value.v.data() + n * a_blk,
                    a_blk * sizeof(double));
        std::memcpy(out.v.data() + n * (a_blk + b_blk) + a_blk, b->value.v.data() + n * b_blk,
                    b_blk * sizeof(double));
    }
    return g.record(std::move(out), {a, b}, [a, b, a_blk, b_blk, N = sa.n](Node& n) {
        if (a->requires_grad) {
            Tensor& da = a->ensure_grad();
            for (int i = 0; i < N; ++i)
                for (std::size_t j = 0; j < a_blk; ++j)
                    da.v[i * a_blk + j] += n.grad.v[i * (a_blk + b_blk) + j];
        }
        if (b->requires_grad) {
            Tensor& db = b->ensure_grad();
            for (int i = 0; i < N; ++i)
                for (std::size_t j = 0; j < b_blk; ++j)
                    db.v[i * b_blk + j] += n.grad.v[i * (a_blk + b_blk) + a_blk + j];
        }
    });
}

Var upsample_nearest2(Graph& g, const Var& x) {
    const Shape s = x->value.shape;
    Tensor out(Shape{s.n, s.c, 2 * s.h, 2 * s.w});
    for (int n = 0; n < s.n; ++n)
        for (int c = 0; c < s.c; ++c)
            for (int y = 0; y < 2 * s.h; ++y)
                for (int w = 0; w < 2 * s.w; ++w)
                    out.at(n, c, y, w) = x->value.at(n, c, y / 2, w / 2);
    return g.record(std::move(out), {x}, [x, s](Node& n) {
        Tensor& dst = x->ensure_grad();
        for (int b = 0; b < s.n; ++b)
            for (int c = 0; c < s.c; ++c)
                for (int y = 0; y < 2 * s.h; ++y)
                    for (int w = 0; w < 2 * s.w; ++w)
                        dst.at(b, c, y / 2, w / 2) += n.grad.at(b, c, y, w);
    });
}

Var add_channel_bias(Graph& g, const Var& x, const Var& bias_nc) {
    const Shape s = x->value.shape;
    const Shape sb = bias_nc->value.shape;
    require(sb.n == s.n && sb.c == s.c && sb.h == 1 && sb.w == 1, "add_channel_bias",
            "bias must be (n, c, 1, 1) matching " + s.str() + ", got " + sb.str());
    Tensor out = x->value;
    for (int n = 0; n < s.n; ++n)
        for (int c = 0; c < s.c; ++c) {
            const double b = bias_nc->value.at(n, c, 0, 0);
            for (int y = 0; y < s.h; ++y)
                for (int w = 0; w < s.w; ++w) out.at(n, c, y, w) += b;
        }
    return g.record(std::move(out), {x, bias_nc}, [x, bias_nc, s](Node& n) {
        if (x->requires_grad) x->accumulate(n.grad);
        if (bias_nc->requires_grad) {
            Tensor& db = bias_nc->ensure_grad();
            for (int b = 0; b < s.n; ++b)
                for (int c = 0; c < s.c; ++c) {
                    double acc = 0.0;
                    for (int y = 0; y < s.h; ++y)
                        for (int w = 0; w < s.w; ++w) acc += n.grad.at(b, c, y, w);
                    db.at(b, c, 0, 0) += acc;
                }
        }
    });
}

namespace {

/// Axis sampling plan for bilinear resize (half-pixel centers, clamped).
struct LerpAxis {
    std::vector<int> i0, i1;
    std::vector<double> w1;  // weight of i1; weight of i0 is 1-w1
};

LerpAxis lerp_axis(int in, int out) {
    LerpAxis ax;
    ax.i0.resize(out);
    ax.i1.resize(out);
    ax.w1.resize(out);
    const double scale = static_cast<double>(in) / out;
    for (int o = 0; o < out; ++o) {
        double src = (o + 0.5) * scale - 0.5;
        if (src < 0.0) src = 0.0;
        if (src > in - 1.0) src = in - 1.0;
        const int lo = static_cast<int>(std::floor(src));
        ax.i0[o] = lo;
        ax.i1[o] = lo + 1 < in ? lo + 1 : lo;
        ax.w1[o] = src - lo;
    }
    return ax;
}

}  // namespace

Var bilinear_resize(Graph& g, const Var& x, int out_h, int out_w) {
    const Shape s = x->value.shape;
    require(out_h > 0 && out_w > 0, "bilinear_resize", "output size must be positive");
    if (out_h == s.h && out_w == s.w) {
        Tensor out = x->value;
        return g.record(std::move(out), {x}, [x](Node& n) { x->accumulate(n.grad); });
    }
    const LerpAxis ay = lerp_axis(s.h, out_h);
    const LerpAxis axw = lerp_axis(s.w, out_w);
    Tensor out(Shape{s.n, s.c, out_h, out_w});
    for (int n = 0; n < s.n; ++n)
        for (int c = 0; c < s.c; ++c)
            for (int y = 0; y < out_h; ++y) {
                const int y0 = ay.i0[y], y1 = ay.i1[y];
                const double fy = ay.w1[y];
                for (int w = 0; w < out_w; ++w) {
                    const int x0 = axw.i0[w], x1 = axw.i1[w];
                    const double fx = axw.w1[w];
                    const double top = (1.0 - fx) * x->value.at(n, c, y0, x0) +
                                       fx * x->value.at(n, c, y0, x1);
                    const double bot = (1.0 - fx) * x->value.at(n, c, y1, x0) +
                                       fx * x->value.at(n, c, y1, x1);
                    out.at(n, c, y, w) = (1.0 - fy) * top + fy * bot;
                }
            }
    return g.record(std::move(out), {x}, [x, s, ay, axw, out_h, out_w](Node& n) {
        Tensor& dst = x->ensure_grad();
        for (int b = 0; b < s.n; ++b)
            for (int c = 0; c < s.c; ++c)
                for (int y = 0; y < out_h; ++y) {
                    const int y0 = ay.i0[y], y1 = ay.i1[y];
                    const double fy = ay.w1[y];
                    for (int w = 0; w < out_w; ++w) {
                        const int x0 = axw.i0[w], x1 = axw.i1[w];
                        const double fx = axw.w1[w];
                        const double gv = n.grad.at(b, c, y, w);
                        dst.at(b, c, y0, x0) += gv * (1.0 - fy) * (1.0 - fx);
                        dst.at(b, c, y0, x1) += gv * (1.0 - fy) * fx;
                        dst.at(b, c, y1, x0) += gv * fy * (1.0 - fx);
                        dst.at(b, c, y1, x1) += gv * fy * fx;
                    }
                }
    });
}

// ---------------------------------------------------------------------------
// conv / linear / norm
// ---------------------------------------------------------------------------

namespace {

void im2col(const Tensor& x, int n, int k, int stride, int pad, int out_h, int out_w,
            Eigen::MatrixXd& col) {
    const Shape s = x.shape;
    const int K = s.c * k * k;
    const int M = out_h * out_w;
    col.resize(K, M);
    for (int c = 0; c < s.c; ++c)
        for (int ky = 0; ky < k; ++ky)
            for (int kx = 0; kx < k; ++kx) {
                const int row = (c * k + ky) * k + kx;
                for (int oy = 0; oy < out_h; ++oy) {
                    const int iy = oy * stride - pad + ky;
                    for (int ox = 0; ox < out_w; ++ox) {
                        const int ix = ox * stride - pad + kx;
                        const bool in = iy >= 0 && iy < s.h && ix >= 0 && ix < s.w;
                        col(row, oy * out_w + ox) =
                            in ? x.v[((static_cast<std::size_t>(n) * s.c + c) * s.h + iy) * s.w + ix]
                               : 0.0;
                    }
                }
            }
}

void col2im_add(const Eigen::MatrixXd& col, int n, int k, int stride, int pad, int out_h,
                int out_w, Tensor& dx) {
    const Shape s = dx.shape;
    for (int c = 0; c < s.c; ++c)
        for (int ky = 0; ky < k; ++ky)
            for (int kx = 0; kx < k; ++kx) {
                const int row = (c * k + ky) * k + kx;
                for (int oy = 0; oy < out_h; ++oy) {
                    const int iy = oy * stride - pad + ky;
                    if (iy < 0 || iy >= s.h) continue;
                    for (int ox = 0; ox < out_w; ++ox) {
                        const int ix = ox * stride - pad + kx;
                        if (ix < 0 || ix >= s.w) continue;
                        dx.v[((static_cast<std::size_t>(n) * s.c + c) * s.h + iy) * s.w + ix] +=
                            col(row, oy * out_w + ox);
                    }
                }
            }
}

}  // namespace

Var conv2d(Graph& g, const Var& x, const Var& w, const Var& b, int stride, int pad) {
    const Shape sx = x->value.shape;
    const Shape sw = w->value.shape;  // (out_ch, in_ch, k, k)
    require(sw.h == sw.w, "conv2d", "kernel must be square, got " + sw.str());
    require(sw.c == sx.c, "conv2d",
            "in-channel mismatch: input " + sx.str() + " vs weight " + sw.str());
    const int k = sw.h;
    require(stride >= 1 && pad >= 0, "conv2d", "bad stride/pad");
    const int out_h = (sx.h + 2 * pad - k) / stride + 1;
    const int out_w = (sx.w + 2 * pad - k) / stride + 1;
    require(out_h > 0 && out_w > 0, "conv2d", "kernel larger than padded input");
    const Shape sb = b->value.shape;
    require(sb.numel() == sw.n, "conv2d", "bias must have one entry per output channel");

    const int K = sx.c * k * k;
    const int M = out_h * out_w;
    Tensor out(Shape{sx.n, sw.n, out_h, out_w});
    MapRowC Wm(w->value.v.data(), sw.n, K);
    Eigen::MatrixXd col;
    for (int n = 0; n < sx.n; ++n) {
        im2col(x->value, n, k, stride, pad, out_h, out_w, col);
        MapRow Y(out.v.data() + static_cast<std::size_t>(n) * sw.n * M, sw.n, M);
        Y.noalias() = Wm * col;
        for (int co = 0; co < sw.n; ++co) Y.row(co).array() += b->value.v[co];
    }
    return g.record(std::move(out), {x, w, b},
                    [x, w, b, k, stride, pad, out_h, out_w, K, M, sx, sw](Node& n) {
                        MapRowC Wm(w->value.v.data(), sw.n, K);
                        Eigen::MatrixXd col;
                        for (int i = 0; i < sx.n; ++i) {
                            MapRowC dY(n.grad.v.data() + static_cast<std::size_t>(i) * sw.n * M,
                                       sw.n, M);
                            if (w->requires_grad) {
                                im2col(x->value, i, k, stride, pad, out_h, out_w, col);
                                MapRow dW(w->ensure_grad().v.data(), sw.n, K);
                                dW.noalias() += dY * col.transpose();
                            }
                            if (b->requires_grad) {
                                Tensor& db = b->ensure_grad();
                                for (int co = 0; co < sw.n; ++co) db.v[co] += dY.row(co).sum();
                            }
                            if (x->requires_grad) {
                                Eigen::MatrixXd dcol = Wm.transpose() * dY;
                                col2im_add(dcol, i, k, stride, pad, out_h, out_w, x->ensure_grad());
                            }
                        }
                    });
}

Var linear(Graph& g, const Var& x, const Var& w, const Var& b) {
    const Shape sx = x->value.shape;  // (n, d, 1, 1)
    const Shape sw = w->value.shape;  // (m, d, 1, 1)
    require(sx.h == 1 && sx.w == 1 && sw.h == 1 && sw.w == 1, "linear",
            "expects (n, d) inputs and (m, d) weight");
    require(sx.c == sw.c, "linear", "dim mismatch " + sx.str() + " vs " + sw.str());
    require(b->value.shape.numel() == sw.n, "linear", "bias size mismatch");
    Tensor out(Shape{sx.n, sw.n, 1, 1});
    MapRowC X(x->value.v.data(), sx.n, sx.c);
    MapRowC Wm(w->value.v.data(), sw.n, sw.c);
    MapRow Y(out.v.data(), sx.n, sw.n);
    Y.noalias() = X * Wm.transpose();
    for (int r = 0; r < sx.n; ++r)
        for (int c = 0; c < sw.n; ++c) Y(r, c) += b->value.v[c];
    return g.record(std::move(out), {x, w, b}, [x, w, b, sx, sw](Node& n) {
        MapRowC dY(n.grad.v.data(), sx.n, sw.n);
        if (x->requires_grad) {
            MapRowC Wm(w->value.v.data(), sw.n, sw.c);
            MapRow dX(x->ensure_grad().v.data(), sx.n, sx.c);
            dX.noalias() += dY * Wm;
        }
        if (w->requires_grad) {
            MapRowC X(x->value.v.data(), sx.n, sx.c);
            MapRow dW(w->ensure_grad().v.data(), sw.n, sw.c);
            dW.noalias() += dY.transpose() * X;
        }
        if (b->requires_grad) {
            Tensor& db = b->ensure_grad();
            for (int c = 0; c < sw.n; ++c) db.v[c] += dY.col(c).sum();
        }
    });
}

Var group_norm(Graph& g, const Var& x, const Var& gamma, const Var& beta, int groups, double eps) {
    const Shape s = x->value.shape;
    require(groups >= 1 && s.c % groups == 0, "group_norm", "channels must divide by groups");
    require(gamma->value.shape.numel() == s.c && beta->value.shape.numel() == s.c, "group_norm",
            "gamma/beta must have one entry per channel");
    const int cpg = s.c / groups;
    const std::size_t plane = static_cast<std::size_t>(s.h) * s.w;
    const std::size_t gsize = cpg * plane;

    Tensor out(s);
    Tensor xhat(s);
    std::vector<double> inv_std(static_cast<std::size_t>(s.n) * groups);
    for (int n = 0; n < s.n; ++n)
        for (int gi = 0; gi < groups; ++gi) {
            const std::size_t base = (static_cast<std::size_t>(n) * s.c + gi * cpg) * plane;
            double mean = 0.0;
            for (std::size_t i = 0; i < gsize; ++i) mean += x->value.v[base + i];
            mean /= static_cast<double>(gsize);
            double var = 0.0;
            for (std::size_t i = 0; i < gsize; ++i) {
                const double d = x->value.v[base + i] - mean;
                var += d * d;
            }
            var /= static_cast<double>(gsize);
            const double is = 1.0 / std::sqrt(var + eps);
            inv_std[n * groups + gi] = is;
            for (int cc = 0; cc < cpg; ++cc) {
                const int c = gi * cpg + cc;
                const double ga = gamma->value.v[c];
                const double be = beta->value.v[c];
                for (std::size_t i = 0; i < plane; ++i) {
                    const std::size_t idx = base + cc * plane + i;
                    const double xh = (x->value.v[idx] - mean) * is;
                    xhat.v[idx] = xh;
                    out.v[idx] = ga * xh + be;
                }
            }
        }
    return g.record(
        std::move(out), {x, gamma, beta},
        [x, gamma, beta, s, groups, cpg, plane, gsize, xhat = std::move(xhat),
         inv_std = std::move(inv_std)](Node& n) {
            if (gamma->requires_grad || beta->requires_grad) {
                for (int c = 0; c < s.c; ++c) {
                    double dg = 0.0, db = 0.0;
                    for (int b = 0; b < s.n; ++b) {
                        const std::size_t base = (static_cast<std::size_t>(b) * s.c + c) * plane;
                        for (std::size_t i = 0; i < plane; ++i) {
                            dg += n.grad.v[base + i] * xhat.v[base + i];
                            db += n.grad.v[base + i];
                        }
                    }
                    if (gamma->requires_grad) gamma->ensure_grad().v[c] += dg;
                    if (beta->requires_grad) beta->ensure_grad().v[c] += db;
                }
            }
            if (!x->requires_grad) return;
            Tensor& dx = x->ensure_grad();
            for (int b = 0; b < s.n; ++b)
                for (int gi = 0; gi < groups; ++gi) {
                    const std::size_t base = (static_cast<std::size_t>(b) * s.c + gi * cpg) * plane;
                    const double is = inv_std[b * groups + gi];
                    double sum_dxh = 0.0, sum_dxh_xh = 0.0;
                    for (int cc = 0; cc < cpg; ++cc) {
                        const double ga = gamma->value.v[gi * cpg + cc];
                        for (std::size_t i = 0; i < plane; ++i) {
                            const std::size_t idx = base + cc * plane + i;
                            const double dxh = n.grad.v[idx] * ga;
                            sum_dxh += dxh;
                            sum_dxh_xh += dxh * xhat.v[idx];
                        }
                    }
                    const double inv_m = 1.0 / static_cast<double>(gsize);
                    for (int cc = 0; cc < cpg; ++cc) {
                        const double ga = gamma->value.v[gi * cpg + cc];
                        for (std::size_t i = 0; i < plane; ++i) {
                            const std::size_t idx = base + cc * plane + i;
                            const double dxh = n.grad.v[idx] * ga;
                            dx.v[idx] +=
                                is * (dxh - inv_m * sum_dxh - xhat.v[idx] * inv_m * sum_dxh_xh);
                        }
                    }
                }
        });
}

Var global_avg_pool(Graph& g, const Var& x) {
    const Shape s = x->value.shape;
    const std::size_t plane = static_cast<std::size_t>(s.h) * s.w;
    Tensor out(Shape{s.n, s.c, 1, 1});
    for (int n = 0; n < s.n; ++n)
        for (int c = 0; c < s.c; ++c) {
            const std::size_t base = (static_cast<std::size_t>(n) * s.c + c) * plane;
            double acc = 0.0;
            for (std::size_t i = 0; i < plane; ++i) acc += x->value.v[base + i];
            out.at(n, c, 0, 0) = acc / static_cast<double>(plane);
        }
    return g.record(std::move(out), {x}, [x, s, plane](Node& n) {
        Tensor& dx = x->ensure_grad();
        const double inv = 1.0 / static_cast<double>(plane);
        for (int b = 0; b < s.n; ++b)
            for (int c = 0; c < s.c; ++c) {
                const std::size_t base = (static_cast<std::size_t>(b) * s.c + c) * plane;
                const double gv = n.grad.at(b, c, 0, 0) * inv;
                for (std::size_t i = 0; i < plane; ++i) dx.v[base + i] += gv;
            }
    });
}

Var l2_normalize_rows(Graph& g, const Var& x, double eps) {
    const Shape s = x->value.shape;
    require(s.h == 1 && s.w == 1, "l2_normalize_rows", "expects (n, d) input");
    Tensor out(s);
    std::vector<double> norms(s.n);
    for (int n = 0; n < s.n; ++n) {
        const std::size_t base = static_cast<std::size_t>(n) * s.c;
        double q = 0.0;
        for (int c = 0; c < s.c; ++c) q += x->value.v[base + c] * x->value.v[base + c];
        const double r = std::sqrt(q);
        const double denom = r + eps;
        norms[n] = denom;
        for (int c = 0; c < s.c; ++c) out.v[base + c] = x->value.v[base + c] / denom;
    }
    return g.record(std::move(out), {x}, [x, s, norms = std::move(norms), eps](Node& n) {
        Tensor& dx = x->ensure_grad();
        for (int b = 0; b < s.n; ++b) {
            const std::size_t base = static_cast<std::size_t>(b) * s.c;
            const double denom = norms[b];
            const double r = denom - eps > 1e-30 ? denom - eps : 1e-30;
            double dot = 0.0;
            for (int c = 0; c < s.c; ++c) dot += n.grad.v[base + c] * x->value.v[base + c];
            const double k = dot / (denom * denom * r);
            for (int c = 0; c < s.c; ++c)
                dx.v[base + c] += n.grad.v[base + c] / denom - x->value.v[base + c] * k;
        }
    });
}

// ---------------------------------------------------------------------------
// wavelet bands
// ---------------------------------------------------------------------------

namespace {

void band_signs(HaarBand band, double& sb, double& sc, double& sd) {
    switch (band) {
        case HaarBand::LL: sb = 1.0; sc = 1.0; sd = 1.0; return;
        case HaarBand::LH: sb = -1.0; sc = 1.0; sd = -1.0; return;
        case HaarBand::HL: sb = 1.0; sc = -1.0; sd = -1.0; return;
        case HaarBand::HH: sb = -1.0; sc = -1.0; sd = 1.0; return;
    }
    sb = sc = sd = 0.0;
}

}  // namespace

Var haar_band(Graph& g, const Var& x, HaarBand band) {
    const Shape s = x->value.shape;
    require(s.h % 2 == 0 && s.w % 2 == 0, "haar_band",
            "spatial dims must be even, got " + s.str());
    double sb, sc, sd;
    band_signs(band, sb, sc, sd);
    Tensor out(Shape{s.n, s.c, s.h / 2, s.w / 2});
    for (int n = 0; n < s.n; ++n)
        for (int c = 0; c < s.c; ++c)
            for (int y = 0; y < s.h / 2; ++y)
                for (int w = 0; w < s.w / 2; ++w) {
                    const double a = x->value.at(n, c, 2 * y, 2 * w);
                    const double b = x->value.at(n, c, 2 * y, 2 * w + 1);
                    const double cc = x->value.at(n, c, 2 * y + 1, 2 * w);
                    const double d = x->value.at(n, c, 2 * y + 1, 2 * w + 1);
                    out.at(n, c, y, w) = 0.5 * (a + sb * b + sc * cc + sd * d);
                }
    return g.record(std::move(out), {x}, [x, s, sb, sc, sd](Node& n) {
        Tensor& dx = x->ensure_grad();
        for (int b = 0; b < s.n; ++b)
            for (int c = 0; c < s.c; ++c)
                for (int y = 0; y < s.h / 2; ++y)
                    for (int w = 0; w < s.w / 2; ++w) {
                        const double gv = 0.5 * n.grad.at(b, c, y, w);
                        dx.at(b, c, 2 * y, 2 * w) += gv;
                        dx.at(b, c, 2 * y, 2 * w + 1) += sb * gv;
                        dx.at(b, c, 2 * y + 1, 2 * w) += sc * gv;
                        dx.at(b, c, 2 * y + 1, 2 * w + 1) += sd * gv;
                    }
    });
}

// ---------------------------------------------------------------------------
// reductions
// ---------------------------------------------------------------------------

Var mean_all(Graph& g, const Var& x) {
    const std::int64_t m = x->value.shape.numel();
    double acc = 0.0;
    for (double v : x->value.v) acc += v;
    Tensor out = Tensor::scalar(acc / static_cast<double>(m));
    return g.record(std::move(out), {x}, [x, m](Node& n) {
        Tensor& dx = x->ensure_grad();
        const double gv = n.grad.v[0] / static_cast<double>(m);
        for (double& d : dx.v) d += gv;
    });
}

Var mse(Graph& g, const Var& a, const Var& b) {
    check_same_shape(a->value, b->value, "mse");
    const std::int64_t m = a->value.shape.numel();
    double acc = 0.0;
    for (std::size_t i = 0; i < a->value.v.size(); ++i) {
        const double d = a->value.v[i] - b->value.v[i];
        acc += d * d;
    }
    Tensor out = Tensor::scalar(acc / static_cast<double>(m));
    return g.record(std::move(out), {a, b}, [a, b, m](Node& n) {
        const double k = 2.0 * n.grad.v[0] / static_cast<double>(m);
        if (a->requires_grad) {
            Tensor& da = a->ensure_grad();
            for (std::size_t i = 0; i < da.v.size(); ++i)
                da.v[i] += k * (a->value.v[i] - b->value.v[i]);
        }
        if (b->requires_grad) {
            Tensor& db = b->ensure_grad();
            for (std::size_t i = 0; i < db.v.size(); ++i)
                db.v[i] -= k * (a->value.v[i] - b->value.v[i]);
        }
    });
}

Var rowwise_cosine(Graph& g, const Var& a, const Var& b, double eps) {
    const Shape sa = a->value.shape;
    const Shape sb = b->value.shape;
    require(sa == sb && sa.h == 1 && sa.w == 1, "rowwise_cosine",
            "expects matching (n, d) inputs, got " + sa.str() + " vs " + sb.str());
    Tensor out(Shape{sa.n, 1, 1, 1});
    std::vector<double> dots(sa.n), nas(sa.n), nbs(sa.n);
    for (int n = 0; n < sa.n; ++n) {
        const std::size_t base = static_cast<std::size_t>(n) * sa.c;
        double dot = 0.0, qa = 0.0, qb = 0.0;
        for (int c = 0; c < sa.c; ++c) {
            const double av = a->value.v[base + c];
            const double bv = b->value.v[base + c];
            dot += av * bv;
            qa += av * av;
            qb += bv * bv;
        }
        dots[n] = dot;
        nas[n] = std::sqrt(qa);
        nbs[n] = std::sqrt(qb);
        out.v[n] = dot / (nas[n] * nbs[n] + eps);
    }
    return g.record(std::move(out), {a, b},
                    [a, b, sa, eps, dots = std::move(dots), nas = std::move(nas),
                     nbs = std::move(nbs)](Node& n) {
                        for (int r = 0; r < sa.n; ++r) {
                            const std::size_t base = static_cast<std::size_t>(r) * sa.c;
                            const double den = nas[r] * nbs[r] + eps;
                            const double gv = n.grad.v[r];
                            const double na = nas[r] > 1e-30 ? nas[r] : 1e-30;
                            const double nb = nbs[r] > 1e-30 ? nbs[r] : 1e-30;
                            const double ka = dots[r] * nbs[r] / (na * den * den);
                            const double kb = dots[r] * nas[r] / (nb * den * den);
                            if (a->requires_grad) {
                                Tensor& da = a->ensure_grad();
                                for (int c = 0; c < sa.c; ++c)
                                    da.v[base + c] += gv * (b->value.v[base + c] / den -
                                                            a->value.v[base + c] * ka);
                            }
                            if (b->requires_grad) {
                                Tensor& db = b->ensure_grad();
                                for (int c = 0; c < sa.c; ++c)
                                    db.v[base + c] += gv * (a->value.v[base + c] / den -
                                                            b->value.v[base + c] * kb);
                            }
                        }
                    });
}

}  // namespace shiftsr::nn
