#include "shiftsr/losses.hpp"

#include <cmath>

#include "shiftsr/errors.hpp"

namespace shiftsr {

using namespace nn;

Var distill_loss(Graph& g, const Var& z_tch, const Var& z_stu) { return mse(g, z_tch, z_stu); }

Var hfp_loss(Graph& g, const Var& z_tch, const Var& z_stu) {
    check_same_shape(z_tch->value, z_stu->value, "hfp_loss");
    Var diff = sub(g, z_tch, z_stu);
    Var acc;
    for (HaarBand band : {HaarBand::LH, HaarBand::HL, HaarBand::HH}) {
        Var b = haar_band(g, diff, band);
        Var term = mean_all(g, mul(g, b, b));
        acc = acc ? add(g, acc, term) : term;
    }
    return acc;
}

Var semantic_loss(Graph& g, const Var& x_gt, const Var& x_sr, Embedder& e, double eps) {
    check_same_shape(x_gt->value, x_sr->value, "semantic_loss");
    Var v_gt = e.embed(g, x_gt);
    Var v_sr = e.embed(g, x_sr);
    Var cos = rowwise_cosine(g, v_sr, v_gt, eps);
    return mean_all(g, affine(g, cos, -1.0, 1.0));
}

Var gen_adv_loss(Graph& g, const Var& scores_fake) {
    return affine(g, mean_all(g, scores_fake), -1.0, 0.0);
}

Var disc_loss(Graph& g, const Var& scores_real, const Var& scores_fake) {
    Var real_term = mean_all(g, relu(g, affine(g, scores_real, -1.0, 1.0)));
    Var fake_term = mean_all(g, relu(g, affine(g, scores_fake, 1.0, 1.0)));
    return add(g, real_term, fake_term);
}

Var total_student_loss(Graph& g, const Var& distill, const Var& hfp, const Var& sd,
                       const Var& adv_gen, const LossWeights& w, LossReport* report) {
    const auto check_finite = [](const Var& v, const char* term) {
        if (v->value.shape.numel() != 1)
            throw ShapeError(std::string("total_student_loss: ") + term + " must be scalar");
        if (!std::isfinite(v->value.v[0])) throw TrainingAbort(term, "non-finite loss term");
    };
    check_finite(distill, "distill");
    check_finite(hfp, "hfp");
    check_finite(sd, "sd");
    check_finite(adv_gen, "adv_gen");
    if (!(w.lambda_hfp >= 0.0 && w.lambda_sd >= 0.0 && w.lambda_adv >= 0.0))
        throw ConfigError("loss weights must be non-negative");

    Var total = add(g, distill,
                    add(g, scale(g, hfp, w.lambda_hfp),
                        add(g, scale(g, sd, w.lambda_sd), scale(g, adv_gen, w.lambda_adv))));
    if (!std::isfinite(total->value.v[0])) throw TrainingAbort("total", "non-finite loss total");
    if (report) {
        report->distill = distill->value.v[0];
        report->hfp = hfp->value.v[0];
        report->sd = sd->value.v[0];
        report->adv_gen = adv_gen->value.v[0];
        report->total = total->value.v[0];
    }
    return total;
}

}  // namespace shiftsr
