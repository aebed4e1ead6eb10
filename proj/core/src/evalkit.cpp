#include "shiftsr/evalkit.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <numeric>
#include <sstream>

#include <fftw3.h>
#include <nlohmann/json.hpp>

#include "shiftsr/dataio.hpp"
#include "shiftsr/errors.hpp"
#include "shiftsr/nn/graph.hpp"

namespace shiftsr {

using nn::Graph;
using nn::Shape;
using nn::Tensor;

namespace {

std::vector<std::complex<double>> fft2(const std::vector<double>& panel, int h, int w,
                                       bool inverse = false) {
    std::vector<std::complex<double>> in(panel.size());
    for (std::size_t i = 0; i < panel.size(); ++i) in[i] = panel[i];
    std::vector<std::complex<double>> out(panel.size());
    fftw_plan plan = fftw_plan_dft_2d(h, w, reinterpret_cast<fftw_complex*>(in.data()),
                                      reinterpret_cast<fftw_complex*>(out.data()),
                                      inverse ? FFTW_BACKWARD : FFTW_FORWARD, FFTW_ESTIMATE);
    fftw_execute(plan);
    fftw_destroy_plan(plan);
    return out;
}

std::vector<std::complex<double>> fft2c(const std::vector<std::complex<double>>& in_data, int h,
                                        int w, bool inverse) {
    std::vector<std::complex<double>> in = in_data;
    std::vector<std::complex<double>> out(in.size());
    fftw_plan plan = fftw_plan_dft_2d(h, w, reinterpret_cast<fftw_complex*>(in.data()),
                                      reinterpret_cast<fftw_complex*>(out.data()),
                                      inverse ? FFTW_BACKWARD : FFTW_FORWARD, FFTW_ESTIMATE);
    fftw_execute(plan);
    fftw_destroy_plan(plan);
    return out;
}

std::vector<double> gray_panel(const Tensor& x, int n) {
    std::vector<double> panel(static_cast<std::size_t>(x.shape.h) * x.shape.w, 0.0);
    for (int c = 0; c < x.shape.c; ++c)
        for (int y = 0; y < x.shape.h; ++y)
            for (int xx = 0; xx < x.shape.w; ++xx)
                panel[static_cast<std::size_t>(y) * x.shape.w + xx] +=
                    x.at(n, c, y, xx) / x.shape.c;
    return panel;
}

// normalized radial distance of an unshifted FFT bin: 1.0 sits at Nyquist
double bin_radius(int i, int j, int h, int w) {
    const int fi = i <= h / 2 ? i : i - h;
    const int fj = j <= w / 2 ? j : j - w;
    const double ry = h > 1 ? fi / (h / 2.0) : 0.0;
    const double rx = w > 1 ? fj / (w / 2.0) : 0.0;
    return std::sqrt(ry * ry + rx * rx);
}

double mean_of(const std::vector<MetricsRow>& rows, double MetricsRow::* field) {
    if (rows.empty()) return 0.0;
    double acc = 0.0;
    for (const MetricsRow& r : rows) acc += r.*field;
    return acc / static_cast<double>(rows.size());
}

std::string num_or_inf(double v) {
    if (std::isfinite(v)) {
        std::ostringstream os;
        os.precision(10);
        os << v;
        return os.str();
    }
    return v > 0 ? "inf" : "-inf";
}

}  // namespace

std::vector<double> psnr(const Tensor& x, const Tensor& ref) {
    nn::check_same_shape(x, ref, "psnr");
    const std::size_t per = static_cast<std::size_t>(x.numel() / x.shape.n);
    std::vector<double> out;
    for (int n = 0; n < x.shape.n; ++n) {
        double mse = 0.0;
        for (std::size_t i = 0; i < per; ++i) {
            const double d = x.v[per * n + i] - ref.v[per * n + i];
            mse += d * d;
        }
        mse /= static_cast<double>(per);
        out.push_back(mse == 0.0 ? std::numeric_limits<double>::infinity()
                                 : 10.0 * std::log10(1.0 / mse));
    }
    return out;
}

std::vector<double> ssim(const Tensor& x, const Tensor& ref) {
    nn::check_same_shape(x, ref, "ssim");
    const double c1 = 0.01 * 0.01;
    const double c2 = 0.03 * 0.03;
    const double sigma = 1.5;
    Tensor mu_x = gaussian_blur(x, sigma);
    Tensor mu_y = gaussian_blur(ref, sigma);
    Tensor xx = x;
    Tensor yy = ref;
    Tensor xy = x;
    for (std::size_t i = 0; i < xx.v.size(); ++i) {
        xy.v[i] = x.v[i] * ref.v[i];
        xx.v[i] = x.v[i] * x.v[i];
        yy.v[i] = ref.v[i] * ref.v[i];
    }
    Tensor e_xx = gaussian_blur(xx, sigma);
    Tensor e_yy = gaussian_blur(yy, sigma);
    Tensor e_xy = gaussian_blur(xy, sigma);
    std::vector<double> out;
    const std::size_t per = static_cast<std::size_t>(x.numel() / x.shape.n);
    for (int n = 0; n < x.shape.n; ++n) {
        double acc = 0.0;
        for (std::size_t i = per * n; i < per * (n + 1); ++i) {
            const double mx = mu_x.v[i];
            const double my = mu_y.v[i];
            const double vx = e_xx.v[i] - mx * mx;
            const double vy = e_yy.v[i] - my * my;
            const double cxy = e_xy.v[i] - mx * my;
            acc += ((2.0 * mx * my + c1) * (2.0 * cxy + c2)) /
                   ((mx * mx + my * my + c1) * (vx + vy + c2));
        }
        out.push_back(acc / static_cast<double>(per));
    }
    return out;
}

std::vector<double> semantic_consistency(const Tensor& x_sr, const Tensor& x_gt, Embedder& e) {
    nn::check_same_shape(x_sr, x_gt, "semantic_consistency");
    Graph g(false);
    nn::Var v_gt = e.embed(g, g.leaf(x_gt));
    nn::Var v_sr = e.embed(g, g.leaf(x_sr));
    nn::Var cos = nn::rowwise_cosine(g, v_sr, v_gt, 1e-8);
    return {cos->value.v.begin(), cos->value.v.end()};
}

std::vector<double> hf_energy_ratio(const Tensor& x, double rho) {
    if (rho <= 0.0 || rho >= 1.0) throw ConfigError("hf_energy_ratio rho must be in (0, 1)");
    std::vector<double> out;
    const int h = x.shape.h;
    const int w = x.shape.w;
    for (int n = 0; n < x.shape.n; ++n) {
        const auto spec = fft2(gray_panel(x, n), h, w);
        double total = 0.0;
        double high = 0.0;
        for (int i = 0; i < h; ++i)
            for (int j = 0; j < w; ++j) {
                if (i == 0 && j == 0) continue;
                const double e = std::norm(spec[static_cast<std::size_t>(i) * w + j]);
                total += e;
                if (bin_radius(i, j, h, w) > rho) high += e;
            }
        out.push_back(total > 0.0 ? high / total : 0.0);
    }
    return out;
}

Tensor lowpass_filter(const Tensor& x, double frac) {
    if (frac <= 0.0 || frac > 1.0) throw ConfigError("lowpass frac must be in (0, 1]");
    const int h = x.shape.h;
    const int w = x.shape.w;
    Tensor out = Tensor::zeros(x.shape);
    for (int n = 0; n < x.shape.n; ++n)
        for (int c = 0; c < x.shape.c; ++c) {
            std::vector<double> panel(static_cast<std::size_t>(h) * w);
            for (int y = 0; y < h; ++y)
                for (int xx = 0; xx < w; ++xx)
                    panel[static_cast<std::size_t>(y) * w + xx] = x.at(n, c, y, xx);
            auto spec = fft2(panel, h, w);
            for (int i = 0; i < h; ++i)
                for (int j = 0; j < w; ++j)
                    if (bin_radius(i, j, h, w) > frac)
                        spec[static_cast<std::size_t>(i) * w + j] = 0.0;
            const auto back = fft2c(spec, h, w, true);
            const double scale = 1.0 / (static_cast<double>(h) * w);
            for (int y = 0; y < h; ++y)
                for (int xx = 0; xx < w; ++xx)
                    out.at(n, c, y, xx) =
                        back[static_cast<std::size_t>(y) * w + xx].real() * scale;
        }
    return out;
}

Tensor log_spectrum(const Tensor& x) {
    const int h = x.shape.h;
    const int w = x.shape.w;
    Tensor out = Tensor::zeros(Shape{x.shape.n, 1, h, w});
    for (int n = 0; n < x.shape.n; ++n) {
        const auto spec = fft2(gray_panel(x, n), h, w);
        for (int i = 0; i < h; ++i)
            for (int j = 0; j < w; ++j) {
                const int si = (i + h / 2) % h;
                const int sj = (j + w / 2) % w;
                out.at(n, 0, si, sj) =
                    std::log1p(std::abs(spec[static_cast<std::size_t>(i) * w + j]));
            }
    }
    return out;
}

double spearman(const std::vector<double>& a, const std::vector<double>& b) {
    if (a.size() != b.size() || a.size() < 2)
        throw ConfigError("spearman needs two equal-length series of size >= 2");
    auto ranks = [](const std::vector<double>& v) {
        const std::size_t n = v.size();
        std::vector<std::size_t> idx(n);
        std::iota(idx.begin(), idx.end(), 0);
        std::sort(idx.begin(), idx.end(), [&](std::size_t i, std::size_t j) { return v[i] < v[j]; });
        std::vector<double> r(n, 0.0);
        std::size_t i = 0;
        while (i < n) {
            std::size_t j = i;
            while (j + 1 < n && v[idx[j + 1]] == v[idx[i]]) ++j;
            const double avg = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
            for (std::size_t k = i; k <= j; ++k) r[idx[k]] = avg;
            i = j + 1;
        }
        return r;
    };
    const std::vector<double> ra = ranks(a);
    const std::vector<double> rb = ranks(b);
    const double n = static_cast<double>(a.size());
    double ma = 0.0, mb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        ma += ra[i];
        mb += rb[i];
    }
    ma /= n;
    mb /= n;
    double cov = 0.0, va = 0.0, vb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        cov += (ra[i] - ma) * (rb[i] - mb);
        va += (ra[i] - ma) * (ra[i] - ma);
        vb += (rb[i] - mb) * (rb[i] - mb);
    }
    if (va == 0.0 || vb == 0.0) return 0.0;
    return cov / std::sqrt(va * vb);
}

void MetricsReport::finalize() {
    mean_psnr_db = mean_of(rows, &MetricsRow::psnr_db);
    mean_ssim = mean_of(rows, &MetricsRow::ssim);
    mean_semantic = mean_of(rows, &MetricsRow::semantic);
    mean_seconds = mean_of(rows, &MetricsRow::seconds);
}

std::string metrics_csv(const MetricsReport& r) {
    std::ostringstream os;
    os << "image_id,method,steps,psnr_db,ssim,semantic,seconds\n";
    for (const MetricsRow& row : r.rows)
        os << row.image_id << ',' << r.method << ',' << r.steps << ',' << num_or_inf(row.psnr_db)
           << ',' << num_or_inf(row.ssim) << ',' << num_or_inf(row.semantic) << ','
           << num_or_inf(row.seconds) << '\n';
    os << "mean," << r.method << ',' << r.steps << ',' << num_or_inf(r.mean_psnr_db) << ','
       << num_or_inf(r.mean_ssim) << ',' << num_or_inf(r.mean_semantic) << ','
       << num_or_inf(r.mean_seconds) << '\n';
    return os.str();
}

std::string metrics_json(const MetricsReport& r) {
    nlohmann::json j;
    j["schema_version"] = r.schema_version;
    j["method"] = r.method;
    j["steps"] = r.steps;
    j["rows"] = nlohmann::json::array();
    auto put = [](nlohmann::json& obj, const char* key, double v) {
        if (std::isfinite(v))
            obj[key] = v;
        else
            obj[key] = v > 0 ? "inf" : "-inf";
    };
    for (const MetricsRow& row : r.rows) {
        nlohmann::json o;
        o["image_id"] = row.image_id;
        put(o, "psnr_db", row.psnr_db);
        put(o, "ssim", row.ssim);
        put(o, "semantic", row.semantic);
        put(o, "seconds", row.seconds);
        j["rows"].push_back(o);
    }
    nlohmann::json agg;
    put(agg, "psnr_db", r.mean_psnr_db);
    put(agg, "ssim", r.mean_ssim);
    put(agg, "semantic", r.mean_semantic);
    put(agg, "seconds", r.mean_seconds);
    j["aggregates"] = agg;
    return j.dump(2);
}

SpectrumReport analyze_steps(const StepTrace& trace, Codec& codec, double rho,
                             double lowpass_frac, bool on_latents) {
    if (trace.entries.empty()) throw ConfigError("analyze_steps needs a non-empty trace");
    SpectrumReport rep;
    rep.rho = rho;
    rep.lowpass_frac = lowpass_frac;
    for (const StepTraceEntry& e : trace.entries) {
        const Tensor img = on_latents ? e.x0_hat : codec.decode_eval(e.x0_hat);
        rep.ts.push_back(e.t);
        rep.log_spectra.push_back(log_spectrum(img));
        rep.lowpass.push_back(lowpass_filter(img, lowpass_frac));
        rep.hf_ratio.push_back(hf_energy_ratio(img, rho));
    }
    for (std::size_t k = 0; k + 1 < rep.log_spectra.size(); ++k) {
        Tensor d = rep.log_spectra[k + 1];
        for (std::size_t i = 0; i < d.v.size(); ++i) d.v[i] -= rep.log_spectra[k].v[i];
        rep.diff_maps.push_back(std::move(d));
    }
    return rep;
}

}  // namespace shiftsr
