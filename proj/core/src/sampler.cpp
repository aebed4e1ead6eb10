#include "shiftsr/sampler.hpp"

#include <cmath>
#include <random>
#include <string>

#include "shiftsr/errors.hpp"

namespace shiftsr {

using nn::Graph;
using nn::Tensor;
using nn::Var;

namespace {

void check_triple(const Tensor& x_t, const Tensor& x0_hat, const Tensor& y) {
    if (x0_hat.shape != x_t.shape || y.shape != x_t.shape)
        throw ShapeError("reverse step operands must share one shape");
}

void check_t(int t, const Schedule& s) {
    if (t < 1 || t > s.steps())
        throw IndexError("reverse step t=" + std::to_string(t) + " outside [1, " +
                         std::to_string(s.steps()) + "]");
}

}  // namespace

Tensor reverse_step_det(const Tensor& x_t, const Tensor& x0_hat, const Tensor& y, int t,
                        const Schedule& s) {
    check_triple(x_t, x0_hat, y);
    check_t(t, s);
    const StepCoeffs c = s.coeffs(t);
    Tensor out = Tensor::zeros(x_t.shape);
    for (std::size_t i = 0; i < out.v.size(); ++i)
        out.v[i] = c.k * x0_hat.v[i] + c.m * x_t.v[i] + c.j * y.v[i];
    return out;
}

Tensor reverse_step_stoch(const Tensor& x_t, const Tensor& x0_hat, const Tensor& y, int t,
                          const Tensor& noise, const Schedule& s) {
    check_triple(x_t, x0_hat, y);
    if (noise.shape != x_t.shape) throw ShapeError("stochastic step noise shape mismatch");
    check_t(t, s);
    const StepCoeffs c = s.coeffs(t);
    const double sd = std::sqrt(c.post_var);
    Tensor out = Tensor::zeros(x_t.shape);
    for (std::size_t i = 0; i < out.v.size(); ++i)
        out.v[i] = c.post_mean_xt * x_t.v[i] + c.post_mean_x0 * x0_hat.v[i] + sd * noise.v[i];
    return out;
}

Tensor teacher_sample(Denoiser& d, const Tensor& z_T, const Tensor& y, const Schedule& s,
                      const SampleOptions& opts, StepTrace* trace) {
    if (z_T.shape != y.shape) throw ShapeError("teacher_sample: z_T and y shapes differ");
    if (trace) {
        trace->entries.clear();
        trace->z0 = Tensor();
    }
    std::mt19937_64 rng(opts.noise_seed);
    const int T = s.steps();
    Tensor x = z_T;
    const int first = opts.single_call ? 1 : T;
    for (int t = first; t >= 1; --t) {
        Tensor x0_hat;
        {
            Graph g(false);
            x0_hat = d.predict(g, g.leaf(x), g.leaf(y), opts.single_call ? T : t)->value;
        }
        if (!x0_hat.all_finite())
            throw SamplingAbort(t, "denoiser output is not finite");
        Tensor x_prev;
        if (opts.single_call) {
            x_prev = x0_hat;
        } else if (opts.mode == SampleMode::Deterministic) {
            x_prev = reverse_step_det(x, x0_hat, y, t, s);
        } else {
            Tensor noise = t > 1 ? Tensor::randn(x.shape, rng) : Tensor::zeros(x.shape);
            x_prev = reverse_step_stoch(x, x0_hat, y, t, noise, s);
        }
        if (!x_prev.all_finite())
            throw SamplingAbort(t, "reverse step produced a non-finite state");
        if (trace && opts.capture)
            trace->entries.push_back({opts.single_call ? T : t, x0_hat, x_prev});
        x = std::move(x_prev);
    }
    if (trace) trace->z0 = x;
    return x;
}

Tensor student_infer(Denoiser& student, Codec& codec, const Tensor& lr_upsampled,
                     const Schedule& s, const Tensor& noise) {
    const Tensor z_y = codec.encode_eval(lr_upsampled);
    if (noise.shape != z_y.shape)
        throw ShapeError("student_infer: noise shape must match the latent shape");
    const double scale = s.kappa() * std::sqrt(s.eta(s.steps()));
    Tensor z_T = z_y;
    for (std::size_t i = 0; i < z_T.v.size(); ++i) z_T.v[i] += scale * noise.v[i];
    Tensor z0;
    {
        Graph g(false);
        z0 = student.predict(g, g.leaf(z_T), g.leaf(z_y), s.steps())->value;
    }
    if (!z0.all_finite()) throw SamplingAbort(s.steps(), "student output is not finite");
    return codec.decode_eval(z0);
}

}  // namespace shiftsr
