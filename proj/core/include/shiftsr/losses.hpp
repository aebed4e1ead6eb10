#pragma once

#include <optional>

#include "shiftsr/models.hpp"
#include "shiftsr/nn/graph.hpp"

namespace shiftsr {

struct LossWeights {
    double lambda_hfp = 0.1;
    double lambda_sd = 1.0;
    double lambda_adv = 0.1;
};

struct LossReport {
    double distill = 0.0;
    double hfp = 0.0;
    double sd = 0.0;
    double adv_gen = 0.0;
    double total = 0.0;
    std::optional<double> disc;
};

/// Mean squared error between teacher and student latents.
nn::Var distill_loss(nn::Graph& g, const nn::Var& z_tch, const nn::Var& z_stu);

/// Sum over the three Haar detail bands (horizontal, vertical, diagonal) of
/// the per-band mean-squared difference; the batch mean is folded into the
/// per-band mean since every sample contributes the same element count.
nn::Var hfp_loss(nn::Graph& g, const nn::Var& z_tch, const nn::Var& z_stu);

/// Batch mean of 1 - cos(v_sr, v_gt) with an epsilon-guarded denominator.
nn::Var semantic_loss(nn::Graph& g, const nn::Var& x_gt, const nn::Var& x_sr, Embedder& e,
                      double eps = 1e-8);

/// Generator adversarial term: negative mean of the fake score map.
nn::Var gen_adv_loss(nn::Graph& g, const nn::Var& scores_fake);

/// Discriminator hinge: E[max(0, 1 - real)] + E[max(0, 1 + fake)].
nn::Var disc_loss(nn::Graph& g, const nn::Var& scores_real, const nn::Var& scores_fake);

/// Weighted student objective. Validates that every part is finite, throwing
/// a training abort that names the offending term otherwise. When `report`
/// is given, fills in the component values and the total.
nn::Var total_student_loss(nn::Graph& g, const nn::Var& distill, const nn::Var& hfp,
                           const nn::Var& sd, const nn::Var& adv_gen, const LossWeights& w,
                           LossReport* report = nullptr);

}  // namespace shiftsr
