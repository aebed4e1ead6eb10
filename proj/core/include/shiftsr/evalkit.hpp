#pragma once

#include <string>
#include <vector>

#include "shiftsr/models.hpp"
#include "shiftsr/sampler.hpp"

namespace shiftsr {

// Peak signal-to-noise ratio per image in dB; identical images yield +inf.
std::vector<double> psnr(const nn::Tensor& x, const nn::Tensor& ref);

// Single-scale SSIM with an 11-tap Gaussian window (sigma 1.5), k1=0.01,
// k2=0.03, unit dynamic range; channel results are averaged per image.
std::vector<double> ssim(const nn::Tensor& x, const nn::Tensor& ref);

// Embedding cosine per image; complements the semantic loss term.
std::vector<double> semantic_consistency(const nn::Tensor& x_sr, const nn::Tensor& x_gt,
                                         Embedder& e);

// Fraction of non-DC spectral energy outside the normalized radius rho,
// computed on the channel-mean image; all-constant images map to 0.
std::vector<double> hf_energy_ratio(const nn::Tensor& x, double rho);

// Ideal circular low-pass in the Fourier domain, radius frac of Nyquist.
nn::Tensor lowpass_filter(const nn::Tensor& x, double frac);

// Centered log(1 + |F|) spectrum of the channel-mean image, shape (n,1,h,w).
nn::Tensor log_spectrum(const nn::Tensor& x);

// Rank correlation with average ranks for ties.
double spearman(const std::vector<double>& a, const std::vector<double>& b);

struct MetricsRow {
    std::string image_id;
    double psnr_db = 0.0;
    double ssim = 0.0;
    double semantic = 0.0;
    double seconds = 0.0;
};

struct MetricsReport {
    int schema_version = 1;
    std::string method;
    int steps = 0;
    std::vector<MetricsRow> rows;
    double mean_psnr_db = 0.0;
    double mean_ssim = 0.0;
    double mean_semantic = 0.0;
    double mean_seconds = 0.0;

    void finalize();
};

std::string metrics_csv(const MetricsReport& r);
std::string metrics_json(const MetricsReport& r);

struct SpectrumReport {
    double rho = 0.5;
    double lowpass_frac = 0.25;
    std::vector<int> ts;
    std::vector<nn::Tensor> log_spectra;
    std::vector<nn::Tensor> diff_maps;
    std::vector<nn::Tensor> lowpass;
    std::vector<std::vector<double>> hf_ratio;
};

// Per-step spectra, consecutive spectral difference maps, low-pass components,
// and the HF-energy trajectory of a sampling trace. Decodes predictions to
// pixels unless on_latents is set (then the raw latent channel mean is used).
SpectrumReport analyze_steps(const StepTrace& trace, Codec& codec, double rho,
                             double lowpass_frac, bool on_latents = false);

}  // namespace shiftsr
