#include "shiftsr/schedule.hpp"

#include <cmath>
#include <cstdio>

#include "shiftsr/errors.hpp"

namespace shiftsr {

namespace {

constexpr double kEtaZeroCap = 1e-6;
constexpr double kWeightEtaFloor = 1e-5;

}  // namespace

ScheduleForm schedule_form_from_string(const std::string& s) {
    if (s == "geometric_sqrt") return ScheduleForm::GeometricSqrt;
    if (s == "linear") return ScheduleForm::Linear;
    throw ConfigError("unknown schedule form: " + s + " (expected geometric_sqrt or linear)");
}

std::string to_string(ScheduleForm f) {
    return f == ScheduleForm::GeometricSqrt ? "geometric_sqrt" : "linear";
}

Schedule::Schedule(std::vector<double> etas, double kappa)
    : eta_(std::move(etas)), kappa_(kappa) {}

Schedule Schedule::build(const ScheduleConfig& cfg) {
    if (cfg.steps < 1) throw ConfigError("schedule steps must be >= 1");
    if (!(cfg.eta_min > 0.0) || !(cfg.eta_max <= 1.0) || !(cfg.eta_min < cfg.eta_max))
        throw ConfigError("schedule requires 0 < eta_min < eta_max <= 1");
    if (!(cfg.eta_max >= 0.999))
        throw ConfigError("schedule requires eta_max >= 0.999 (terminal shift must reach ~1)");
    if (!(cfg.kappa > 0.0)) throw ConfigError("schedule kappa must be > 0");

    std::vector<double> etas(static_cast<std::size_t>(cfg.steps) + 1);
    etas[0] = std::min(cfg.eta_min * cfg.eta_min, kEtaZeroCap);
    if (cfg.steps == 1) {
        etas[1] = cfg.eta_max;
    } else if (cfg.form == ScheduleForm::GeometricSqrt) {
        const double r0 = std::sqrt(cfg.eta_min);
        const double r1 = std::sqrt(cfg.eta_max);
        for (int t = 1; t <= cfg.steps; ++t) {
            const double u = static_cast<double>(t - 1) / static_cast<double>(cfg.steps - 1);
            const double rt = r0 * std::pow(r1 / r0, u);
            etas[static_cast<std::size_t>(t)] = rt * rt;
        }
    } else {
        for (int t = 1; t <= cfg.steps; ++t) {
            const double u = static_cast<double>(t - 1) / static_cast<double>(cfg.steps - 1);
            etas[static_cast<std::size_t>(t)] = cfg.eta_min + (cfg.eta_max - cfg.eta_min) * u;
        }
    }
    return from_etas(std::move(etas), cfg.kappa);
}

Schedule Schedule::from_etas(std::vector<double> etas, double kappa) {
    if (etas.size() < 2) throw ConfigError("eta array must hold eta_0 and at least one step");
    if (!(kappa > 0.0)) throw ConfigError("schedule kappa must be > 0");
    for (std::size_t i = 0; i < etas.size(); ++i) {
        if (!(etas[i] > 0.0) || !(etas[i] <= 1.0))
            throw ConfigError("eta values must lie in (0, 1]");
        if (i > 0 && !(etas[i] > etas[i - 1]))
            throw ConfigError("eta values must be strictly increasing");
    }
    return Schedule(std::move(etas), kappa);
}

double Schedule::eta(int t) const {
    if (t < 0 || t > steps()) throw IndexError("eta index out of range");
    return eta_[static_cast<std::size_t>(t)];
}

StepCoeffs step_coeffs(double eta_prev, double eta, double kappa, int t) {
    if (!(eta_prev > 0.0) || !(eta > 0.0)) throw ConfigError("step_coeffs requires positive etas");
    StepCoeffs c;
    c.t = t;
    c.eta_prev = eta_prev;
    c.eta = eta;
    c.alpha = eta - eta_prev;
    c.m = std::sqrt(eta_prev / eta);
    c.j = eta_prev - std::sqrt(eta_prev * eta);
    c.k = 1.0 - c.m - c.j;
    c.post_mean_xt = eta_prev / eta;
    c.post_mean_x0 = c.alpha / eta;
    c.post_var = kappa * kappa * (eta_prev / eta) * c.alpha;
    if (eta_prev > kWeightEtaFloor) c.weight = c.alpha / (2.0 * kappa * kappa * eta_prev * eta);
    return c;
}

StepCoeffs Schedule::coeffs(int t) const {
    if (t < 1 || t > steps()) throw IndexError("coeffs index must be in [1, steps]");
    return step_coeffs(eta(t - 1), eta(t), kappa_, t);
}

nn::Tensor Schedule::forward_diffuse(const nn::Tensor& x0, const nn::Tensor& y, int t,
                                     const nn::Tensor& eps) const {
    if (t < 1 || t > steps()) throw IndexError("forward_diffuse t must be in [1, steps]");
    nn::check_same_shape(x0, y, "forward_diffuse");
    nn::check_same_shape(x0, eps, "forward_diffuse");
    const double e = eta(t);
    const double sd = kappa_ * std::sqrt(e);
    nn::Tensor out = x0;
    for (std::size_t i = 0; i < out.v.size(); ++i)
        out.v[i] += e * (y.v[i] - x0.v[i]) + sd * eps.v[i];
    return out;
}

nn::Tensor Schedule::forward_mean(const nn::Tensor& x0, const nn::Tensor& y, int t) const {
    if (t < 0 || t > steps()) throw IndexError("forward_mean t must be in [0, steps]");
    nn::check_same_shape(x0, y, "forward_mean");
    const double e = eta(t);
    nn::Tensor out = x0;
    for (std::size_t i = 0; i < out.v.size(); ++i) out.v[i] += e * (y.v[i] - x0.v[i]);
    return out;
}

nn::Tensor Schedule::init_state(const nn::Tensor& y, const nn::Tensor& eps) const {
    nn::check_same_shape(y, eps, "init_state");
    const double sd = kappa_ * std::sqrt(eta(steps()));
    nn::Tensor out = y;
    for (std::size_t i = 0; i < out.v.size(); ++i) out.v[i] += sd * eps.v[i];
    return out;
}

std::vector<std::string> Schedule::etas_decimal() const {
    std::vector<std::string> out;
    out.reserve(eta_.size());
    char buf[64];
    for (double e : eta_) {
        std::snprintf(buf, sizeof(buf), "%.17g", e);
        out.emplace_back(buf);
    }
    return out;
}

}  // namespace shiftsr
