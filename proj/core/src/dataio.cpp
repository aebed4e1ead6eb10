#include "shiftsr/dataio.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "shiftsr/errors.hpp"
#include "shiftsr/imageio.hpp"
#include "shiftsr/util.hpp"

namespace shiftsr {

using nn::Shape;
using nn::Tensor;

ResampleKernel resample_kernel_from_string(const std::string& s) {
    if (s == "bicubic") return ResampleKernel::Bicubic;
    if (s == "bilinear") return ResampleKernel::Bilinear;
    if (s == "area") return ResampleKernel::Area;
    throw ConfigError("unknown resample kernel: " + s);
}

std::string to_string(ResampleKernel k) {
    switch (k) {
        case ResampleKernel::Bicubic: return "bicubic";
        case ResampleKernel::Bilinear: return "bilinear";
        case ResampleKernel::Area: return "area";
    }
    throw ConfigError("invalid resample kernel value");
}

void DegradeParams::validate() const {
    if (scale < 1) throw ConfigError("degrade scale must be >= 1");
    if (blur_sigma.lo > blur_sigma.hi || blur_sigma.lo < 0.0)
        throw ConfigError("blur sigma range must satisfy 0 <= lo <= hi");
    if (noise_sigma.lo > noise_sigma.hi || noise_sigma.lo < 0.0)
        throw ConfigError("noise sigma range must satisfy 0 <= lo <= hi");
    if (jpeg_enabled &&
        (jpeg_quality.lo > jpeg_quality.hi || jpeg_quality.lo < 1 || jpeg_quality.hi > 100))
        throw ConfigError("jpeg quality range must lie in [1, 100]");
    if (kernels.empty()) throw ConfigError("at least one resample kernel is required");
}

namespace {

struct Tap {
    int i;
    double w;
};
using AxisPlan = std::vector<std::vector<Tap>>;

double cubic_keys(double t) {
    const double a = -0.5;
    t = std::abs(t);
    if (t <= 1.0) return ((a + 2.0) * t - (a + 3.0)) * t * t + 1.0;
    if (t < 2.0) return (((t - 5.0) * t + 8.0) * t - 4.0) * a;
    return 0.0;
}

int clamp_index(int i, int n) { return std::clamp(i, 0, n - 1); }

AxisPlan interp_plan(int in, int out, bool cubic) {
    AxisPlan plan(static_cast<std::size_t>(out));
    const double step = static_cast<double>(in) / out;
    for (int j = 0; j < out; ++j) {
        const double src = (j + 0.5) * step - 0.5;
        const int base = static_cast<int>(std::floor(src));
        if (cubic) {
            for (int di = -1; di <= 2; ++di)
                plan[j].push_back({clamp_index(base + di, in), cubic_keys(src - (base + di))});
        } else {
            const double f = src - base;
            plan[j].push_back({clamp_index(base, in), 1.0 - f});
            plan[j].push_back({clamp_index(base + 1, in), f});
        }
    }
    return plan;
}

AxisPlan area_plan(int in, int out) {
    AxisPlan plan(static_cast<std::size_t>(out));
    const double step = static_cast<double>(in) / out;
    for (int j = 0; j < out; ++j) {
        const double lo = j * step;
        const double hi = (j + 1) * step;
        const int i0 = static_cast<int>(std::floor(lo));
        const int i1 = static_cast<int>(std::ceil(hi));
        for (int i = i0; i < i1; ++i) {
            const double overlap = std::min(hi, i + 1.0) - std::max(lo, static_cast<double>(i));
            if (overlap > 0.0) plan[j].push_back({clamp_index(i, in), overlap / step});
        }
    }
    return plan;
}

AxisPlan make_plan(int in, int out, ResampleKernel k) {
    switch (k) {
        case ResampleKernel::Bicubic: return interp_plan(in, out, true);
        case ResampleKernel::Bilinear: return interp_plan(in, out, false);
        case ResampleKernel::Area:
            return out > in ? interp_plan(in, out, false) : area_plan(in, out);
    }
    throw ConfigError("invalid resample kernel value");
}

Tensor resample_width(const Tensor& x, const AxisPlan& plan) {
    const int out_w = static_cast<int>(plan.size());
    Tensor out = Tensor::zeros(Shape{x.shape.n, x.shape.c, x.shape.h, out_w});
    for (int n = 0; n < x.shape.n; ++n)
        for (int c = 0; c < x.shape.c; ++c)
            for (int y = 0; y < x.shape.h; ++y)
                for (int j = 0; j < out_w; ++j) {
                    double acc = 0.0;
                    for (const Tap& t : plan[j]) acc += t.w * x.at(n, c, y, t.i);
                    out.at(n, c, y, j) = acc;
                }
    return out;
}

Tensor resample_height(const Tensor& x, const AxisPlan& plan) {
    const int out_h = static_cast<int>(plan.size());
    Tensor out = Tensor::zeros(Shape{x.shape.n, x.shape.c, out_h, x.shape.w});
    for (int n = 0; n < x.shape.n; ++n)
        for (int c = 0; c < x.shape.c; ++c)
            for (int j = 0; j < out_h; ++j)
                for (int xw = 0; xw < x.shape.w; ++xw) {
                    double acc = 0.0;
                    for (const Tap& t : plan[j]) acc += t.w * x.at(n, c, t.i, xw);
                    out.at(n, c, j, xw) = acc;
                }
    return out;
}

int reflect101(int i, int n) {
    if (n == 1) return 0;
    while (i < 0 || i >= n) {
        if (i < 0) i = -i;
        if (i >= n) i = 2 * n - 2 - i;
    }
    return i;
}

void clamp01_inplace(Tensor& t) {
    for (double& v : t.v) v = std::clamp(v, 0.0, 1.0);
}

}  // namespace

Tensor resize_image(const Tensor& img, int out_h, int out_w, ResampleKernel k) {
    if (out_h < 1 || out_w < 1) throw ShapeError("resize target must be positive");
    if (out_h == img.shape.h && out_w == img.shape.w) return img;
    Tensor cur = img;
    if (out_w != img.shape.w) cur = resample_width(cur, make_plan(img.shape.w, out_w, k));
    if (out_h != img.shape.h) cur = resample_height(cur, make_plan(img.shape.h, out_h, k));
    return cur;
}

Tensor gaussian_blur(const Tensor& img, double sigma) {
    if (sigma <= 1e-12) return img;
    const int radius = std::max(1, static_cast<int>(std::ceil(3.0 * sigma)));
    std::vector<double> w(static_cast<std::size_t>(2 * radius + 1));
    double total = 0.0;
    for (int i = -radius; i <= radius; ++i) {
        w[i + radius] = std::exp(-(i * i) / (2.0 * sigma * sigma));
        total += w[i + radius];
    }
    for (double& x : w) x /= total;

    Tensor mid = Tensor::zeros(img.shape);
    for (int n = 0; n < img.shape.n; ++n)
        for (int c = 0; c < img.shape.c; ++c)
            for (int y = 0; y < img.shape.h; ++y)
                for (int x = 0; x < img.shape.w; ++x) {
                    double acc = 0.0;
                    for (int i = -radius; i <= radius; ++i)
                        acc += w[i + radius] * img.at(n, c, y, reflect101(x + i, img.shape.w));
                    mid.at(n, c, y, x) = acc;
                }
    Tensor out = Tensor::zeros(img.shape);
    for (int n = 0; n < img.shape.n; ++n)
        for (int c = 0; c < img.shape.c; ++c)
            for (int y = 0; y < img.shape.h; ++y)
                for (int x = 0; x < img.shape.w; ++x) {
                    double acc = 0.0;
                    for (int i = -radius; i <= radius; ++i)
                        acc += w[i + radius] * mid.at(n, c, reflect101(y + i, img.shape.h), x);
                    out.at(n, c, y, x) = acc;
                }
    return out;
}

Tensor upsample(const Tensor& lr, int scale) {
    if (scale < 1) throw ConfigError("upsample scale must be >= 1");
    if (scale == 1) return lr;
    Tensor out =
        resize_image(lr, lr.shape.h * scale, lr.shape.w * scale, ResampleKernel::Bicubic);
    clamp01_inplace(out);
    return out;
}

Tensor degrade(const Tensor& hr, const DegradeParams& p, std::uint64_t seed) {
    p.validate();
    if (hr.shape.h % p.scale != 0 || hr.shape.w % p.scale != 0)
        throw ShapeError("degrade input size must be divisible by scale");
    const int oh = hr.shape.h / p.scale;
    const int ow = hr.shape.w / p.scale;
    Tensor out = Tensor::zeros(Shape{hr.shape.n, hr.shape.c, oh, ow});
    for (int i = 0; i < hr.shape.n; ++i) {
        std::mt19937_64 rng(mix_seed(seed, static_cast<std::uint64_t>(i)));
        const double sigma_b =
            std::uniform_real_distribution<double>(p.blur_sigma.lo, p.blur_sigma.hi)(rng);
        const ResampleKernel kernel =
            p.kernels[std::uniform_int_distribution<std::size_t>(0, p.kernels.size() - 1)(rng)];
        const double sigma_n =
            std::uniform_real_distribution<double>(p.noise_sigma.lo, p.noise_sigma.hi)(rng);
        Tensor img = slice_image(hr, i);
        if (sigma_b > 1e-12) img = gaussian_blur(img, sigma_b);
        if (p.scale > 1) img = resize_image(img, oh, ow, kernel);
        if (sigma_n > 1e-12) {
            std::normal_distribution<double> nd(0.0, sigma_n);
            for (double& v : img.v) v += nd(rng);
        }
        clamp01_inplace(img);
        if (p.jpeg_enabled) {
            const int q =
                std::uniform_int_distribution<int>(p.jpeg_quality.lo, p.jpeg_quality.hi)(rng);
            img = jpeg_roundtrip(img, q);
        }
        std::copy(img.v.begin(), img.v.end(),
                  out.v.begin() + static_cast<std::ptrdiff_t>(img.v.size()) * i);
    }
    return out;
}

PairStream::PairStream(const std::string& dir, DegradeParams p, Config cfg)
    : params_(std::move(p)), cfg_(cfg) {
    params_.validate();
    if (cfg_.batch < 1) throw ConfigError("batch size must be >= 1");
    if (cfg_.patch < 1 || cfg_.patch % params_.scale != 0)
        throw ConfigError("patch size must be a positive multiple of scale");
    for (const std::string& path : list_images(dir)) {
        try {
            Tensor img = load_image(path);
            if (img.shape.h < cfg_.patch || img.shape.w < cfg_.patch) {
                warnings_.push_back("skipped undersized image: " + path);
                continue;
            }
            files_.push_back(path);
            images_.push_back(std::move(img));
        } catch (const IoError&) {
            warnings_.push_back("skipped unreadable image: " + path);
        }
    }
    if (images_.empty()) throw ConfigError("no usable images in " + dir);
    batches_per_epoch_ = static_cast<int>(images_.size()) / cfg_.batch;
    if (batches_per_epoch_ == 0)
        throw ConfigError("dataset holds fewer images than one batch");
    reshuffle();
}

void PairStream::reshuffle() {
    order_.resize(images_.size());
    std::iota(order_.begin(), order_.end(), 0);
    std::mt19937_64 rng(mix_seed(cfg_.seed, 0x0EDEull, static_cast<std::uint64_t>(epoch_)));
    std::shuffle(order_.begin(), order_.end(), rng);
}

void PairStream::seek(int epoch, int cursor) {
    if (epoch < 0 || cursor < 0 || cursor > batches_per_epoch_)
        throw ConfigError("seek position out of range");
    epoch_ = epoch;
    cursor_ = cursor;
    reshuffle();
}

PairBatch PairStream::next() {
    if (cursor_ >= batches_per_epoch_) {
        ++epoch_;
        cursor_ = 0;
        reshuffle();
    }
    const int b = cfg_.batch;
    const int patch = cfg_.patch;
    const int lp = patch / params_.scale;
    const std::uint64_t draw_epoch =
        cfg_.resample_each_epoch ? static_cast<std::uint64_t>(epoch_) : 0;
    Tensor hr = Tensor::zeros(Shape{b, 3, patch, patch});
    Tensor lr = Tensor::zeros(Shape{b, 3, lp, lp});
    for (int slot = 0; slot < b; ++slot) {
        const int item = order_[cursor_ * b + slot];
        const Tensor& src = images_[static_cast<std::size_t>(item)];
        std::mt19937_64 rng(
            mix_seed(cfg_.seed + 1, draw_epoch, static_cast<std::uint64_t>(item)));
        const int y0 =
            std::uniform_int_distribution<int>(0, src.shape.h - patch)(rng);
        const int x0 =
            std::uniform_int_distribution<int>(0, src.shape.w - patch)(rng);
        Tensor one = Tensor::zeros(Shape{1, 3, patch, patch});
        for (int c = 0; c < 3; ++c)
            for (int y = 0; y < patch; ++y)
                for (int x = 0; x < patch; ++x) {
                    const double v = src.at(0, c, y0 + y, x0 + x);
                    one.at(0, c, y, x) = v;
                    hr.at(slot, c, y, x) = v;
                }
        Tensor lone = degrade(
            one, params_,
            mix_seed(cfg_.seed + 2, draw_epoch, static_cast<std::uint64_t>(item)));
        for (int c = 0; c < 3; ++c)
            for (int y = 0; y < lp; ++y)
                for (int x = 0; x < lp; ++x) lr.at(slot, c, y, x) = lone.at(0, c, y, x);
    }
    ++cursor_;
    PairBatch out;
    out.hr = std::move(hr);
    out.lr = std::move(lr);
    out.lr_up = upsample(out.lr, params_.scale);
    return out;
}

}  // namespace shiftsr
