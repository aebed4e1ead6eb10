#pragma once

#include <optional>
#include <string>
#include <vector>

#include "shiftsr/nn/tensor.hpp"

namespace shiftsr {

/// How the shift sequence eta_1..eta_T is spaced between its endpoints.
enum class ScheduleForm { GeometricSqrt, Linear };

ScheduleForm schedule_form_from_string(const std::string& s);
std::string to_string(ScheduleForm f);

struct ScheduleConfig {
    int steps = 15;
    double eta_min = 0.04;
    double eta_max = 0.999;
    double kappa = 2.0;
    ScheduleForm form = ScheduleForm::GeometricSqrt;
};

/// Per-step reverse-transition coefficients, all derived from consecutive
/// shift values. The deterministic update is
///   x_{t-1} = k * x0_hat + m * x_t + j * y
/// and the stochastic posterior is
///   N(post_mean_xt * x_t + post_mean_x0 * x0_hat, post_var I).
struct StepCoeffs {
    int t = 0;
    double eta_prev = 0.0;
    double eta = 0.0;
    double alpha = 0.0;  // eta_t - eta_{t-1}
    double m = 0.0;      // sqrt(eta_{t-1} / eta_t)
    double j = 0.0;      // eta_{t-1} - sqrt(eta_{t-1} * eta_t)
    double k = 0.0;      // 1 - m - j
    double post_mean_xt = 0.0;  // eta_{t-1} / eta_t
    double post_mean_x0 = 0.0;  // alpha_t / eta_t
    double post_var = 0.0;      // kappa^2 * (eta_{t-1} / eta_t) * alpha_t
    /// Timestep loss weight alpha_t / (2 kappa^2 eta_{t-1} eta_t); unset when
    /// eta_{t-1} is too small for the expression to be well conditioned.
    std::optional<double> weight;
};

/// Coefficients from raw shift values; no monotonicity requirement, so the
/// degenerate eta_prev == eta case (identity step) is expressible.
StepCoeffs step_coeffs(double eta_prev, double eta, double kappa, int t = 0);

/// Monotone shift sequence eta_0 < eta_1 < ... < eta_T with the noise scale
/// kappa. Index 0 is the synthetic terminal value used to close the final
/// reverse step; indices 1..T come from the configured spacing.
class Schedule {
public:
    static Schedule build(const ScheduleConfig& cfg);
    /// Rebuild from an explicit eta array (eta_0..eta_T), e.g. restored from
    /// a checkpoint manifest. Validates shape and monotonicity.
    static Schedule from_etas(std::vector<double> etas, double kappa);

    int steps() const { return static_cast<int>(eta_.size()) - 1; }
    double kappa() const { return kappa_; }
    /// t in [0, steps()].
    double eta(int t) const;
    /// t in [1, steps()].
    double alpha(int t) const { return eta(t) - eta(t - 1); }
    StepCoeffs coeffs(int t) const;

    /// x_t = x0 + eta_t (y - x0) + kappa sqrt(eta_t) eps, t in [1, steps()].
    nn::Tensor forward_diffuse(const nn::Tensor& x0, const nn::Tensor& y, int t,
                               const nn::Tensor& eps) const;
    /// Mean of the forward marginal (eps = 0); accepts t in [0, steps()].
    nn::Tensor forward_mean(const nn::Tensor& x0, const nn::Tensor& y, int t) const;
    /// Reverse-process start: x_T = y + kappa sqrt(eta_T) eps.
    nn::Tensor init_state(const nn::Tensor& y, const nn::Tensor& eps) const;

    const std::vector<double>& etas() const { return eta_; }
    /// Shortest decimal strings that round-trip to the exact doubles.
    std::vector<std::string> etas_decimal() const;

private:
    Schedule(std::vector<double> etas, double kappa);
    std::vector<double> eta_;  // size steps + 1, index = t
    double kappa_ = 0.0;
};

}  // namespace shiftsr
