#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "shiftsr/nn/tensor.hpp"

namespace shiftsr {

enum class ResampleKernel { Bicubic, Bilinear, Area };
ResampleKernel resample_kernel_from_string(const std::string& s);
std::string to_string(ResampleKernel k);

struct Interval {
    double lo = 0.0;
    double hi = 0.0;
};

struct IntInterval {
    int lo = 0;
    int hi = 0;
};

struct DegradeParams {
    Interval blur_sigma{0.3, 1.5};
    int scale = 4;
    Interval noise_sigma{0.0, 0.02};
    bool jpeg_enabled = false;
    IntInterval jpeg_quality{60, 95};
    std::vector<ResampleKernel> kernels{ResampleKernel::Bicubic, ResampleKernel::Bilinear,
                                        ResampleKernel::Area};
    void validate() const;
};

// Separable resampling in double precision. Same-size calls are exact copies;
// area upsampling falls back to bilinear.
nn::Tensor resize_image(const nn::Tensor& img, int out_h, int out_w, ResampleKernel k);

// Separable Gaussian blur with mirrored borders; sigma <= 0 is an exact copy.
nn::Tensor gaussian_blur(const nn::Tensor& img, double sigma);

// Bicubic upsample by an integer factor, clipped to [0, 1].
nn::Tensor upsample(const nn::Tensor& lr, int scale);

// blur -> downsample -> noise -> optional JPEG, clipped to [0, 1]; a pure
// function of (hr, p, seed) with one parameter draw stream per image.
nn::Tensor degrade(const nn::Tensor& hr, const DegradeParams& p, std::uint64_t seed);

struct PairBatch {
    nn::Tensor hr;
    nn::Tensor lr;
    nn::Tensor lr_up;
};

class PairStream {
public:
    struct Config {
        int patch = 64;
        int batch = 16;
        std::uint64_t seed = 0;
        // false: each image yields one fixed (crop, degradation) pair, so the
        // stream iterates a frozen paired dataset in shuffled order; true:
        // crops and degradations are redrawn every epoch as augmentation.
        bool resample_each_epoch = false;
    };

    PairStream(const std::string& dir, DegradeParams p, Config cfg);

    PairBatch next();
    void seek(int epoch, int cursor);
    int batches_per_epoch() const { return batches_per_epoch_; }
    int epoch() const { return epoch_; }
    int cursor() const { return cursor_; }
    int image_count() const { return static_cast<int>(images_.size()); }
    const std::vector<std::string>& files() const { return files_; }
    const std::vector<std::string>& warnings() const { return warnings_; }

private:
    DegradeParams params_;
    Config cfg_;
    std::vector<std::string> files_;
    std::vector<nn::Tensor> images_;
    std::vector<std::string> warnings_;
    int batches_per_epoch_ = 0;
    int epoch_ = 0;
    int cursor_ = 0;
    std::vector<int> order_;

    void reshuffle();
};

}  // namespace shiftsr
