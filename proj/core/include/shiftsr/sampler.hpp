#pragma once

#include <optional>
#include <vector>

#include "shiftsr/models.hpp"
#include "shiftsr/schedule.hpp"

namespace shiftsr {

struct StepTraceEntry {
    int t = 0;
    nn::Tensor x0_hat;
    nn::Tensor x_prev;
};

struct StepTrace {
    std::vector<StepTraceEntry> entries;
    nn::Tensor z0;
};

enum class SampleMode { Deterministic, Stochastic };

struct SampleOptions {
    SampleMode mode = SampleMode::Deterministic;
    bool capture = false;
    bool single_call = false;
    std::uint64_t noise_seed = 0;
};

nn::Tensor reverse_step_det(const nn::Tensor& x_t, const nn::Tensor& x0_hat, const nn::Tensor& y,
                            int t, const Schedule& s);

nn::Tensor reverse_step_stoch(const nn::Tensor& x_t, const nn::Tensor& x0_hat,
                              const nn::Tensor& y, int t, const nn::Tensor& noise,
                              const Schedule& s);

nn::Tensor teacher_sample(Denoiser& d, const nn::Tensor& z_T, const nn::Tensor& y,
                          const Schedule& s, const SampleOptions& opts = {},
                          StepTrace* trace = nullptr);

nn::Tensor student_infer(Denoiser& student, Codec& codec, const nn::Tensor& lr_upsampled,
                         const Schedule& s, const nn::Tensor& noise);

}  // namespace shiftsr
