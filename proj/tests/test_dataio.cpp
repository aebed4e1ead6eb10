#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <string>
#include <vector>

#include "doctest.h"
#include "shiftsr/dataio.hpp"
#include "shiftsr/errors.hpp"
#include "shiftsr/imageio.hpp"
#include "shiftsr/util.hpp"

using namespace shiftsr;
using namespace shiftsr::nn;

namespace {

struct TempDir {
    std::filesystem::path path;
    TempDir() {
        static int counter = 0;
        path = std::filesystem::temp_directory_path() /
               ("shiftsr_dataio_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
        std::filesystem::create_directories(path);
    }
    ~TempDir() { std::filesystem::remove_all(path); }
    std::string str() const { return path.string(); }
};

Tensor smooth_image(int h, int w, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    const double ax = u(rng), ay = u(rng), ph = u(rng);
    Tensor img = Tensor::zeros(Shape{1, 3, h, w});
    for (int c = 0; c < 3; ++c)
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x)
                img.at(0, c, y, x) =
                    0.5 + 0.45 * std::sin(2.0 * ax * x / w + 3.0 * ay * y / h + ph + c);
    return img;
}

Tensor quantized(const Tensor& t) {
    Tensor out = t;
    for (double& v : out.v)
        v = std::clamp(std::round(v * 255.0), 0.0, 255.0) / 255.0;
    return out;
}

double variance(const Tensor& t) {
    const double m = t.mean();
    double acc = 0.0;
    for (double v : t.v) acc += (v - m) * (v - m);
    return acc / static_cast<double>(t.numel());
}

}  // namespace

TEST_CASE("png round trip") {
    TempDir dir;
    std::mt19937_64 rng(3);
    Tensor img = Tensor::uniform(Shape{1, 3, 12, 17}, 0.0, 1.0, rng);
    const std::string path = (dir.path / "a.png").string();
    save_png(path, img);
    Tensor back = load_image(path);
    CHECK(back.shape == img.shape);
    SUBCASE("within one quantization step of the source") {
        CHECK(back.max_abs_diff(img) <= 0.5 / 255.0 + 1e-12);
    }
    SUBCASE("exact for values already on the 8-bit grid") {
        Tensor q = quantized(img);
        save_png(path, q);
        CHECK(load_image(path).max_abs_diff(q) == 0.0);
    }
    SUBCASE("channel order is preserved") {
        Tensor red = Tensor::zeros(Shape{1, 3, 4, 4});
        for (int y = 0; y < 4; ++y)
            for (int x = 0; x < 4; ++x) red.at(0, 0, y, x) = 1.0;
        save_png(path, red);
        Tensor b = load_image(path);
        CHECK(b.at(0, 0, 1, 1) == doctest::Approx(1.0));
        CHECK(b.at(0, 1, 1, 1) == doctest::Approx(0.0));
        CHECK(b.at(0, 2, 1, 1) == doctest::Approx(0.0));
    }
}

TEST_CASE("jpeg round trip") {
    Tensor img = smooth_image(24, 24, 5);
    SUBCASE("high quality stays close on smooth content") {
        Tensor back = jpeg_roundtrip(img, 95);
        CHECK(back.shape == img.shape);
        CHECK(back.max_abs_diff(img) < 0.12);
    }
    SUBCASE("deterministic") {
        CHECK(content_hash(jpeg_roundtrip(img, 80)) == content_hash(jpeg_roundtrip(img, 80)));
    }
    SUBCASE("quality bounds enforced") {
        CHECK_THROWS_AS(jpeg_roundtrip(img, 0), ConfigError);
        CHECK_THROWS_AS(jpeg_roundtrip(img, 101), ConfigError);
    }
}

TEST_CASE("image directory listing") {
    TempDir dir;
    save_png((dir.path / "b.png").string(), smooth_image(8, 8, 1));
    save_png((dir.path / "a.png").string(), smooth_image(8, 8, 2));
    std::ofstream(dir.path / "notes.txt") << "not an image";
    auto files = list_images(dir.str());
    REQUIRE(files.size() == 2);
    CHECK(files[0] < files[1]);
    CHECK(files[0].find("a.png") != std::string::npos);
    CHECK_THROWS_AS(list_images((dir.path / "missing").string()), IoError);
}

TEST_CASE("resampling") {
    std::mt19937_64 rng(9);
    Tensor img = Tensor::uniform(Shape{2, 3, 16, 16}, 0.0, 1.0, rng);
    SUBCASE("same size is an exact copy for every kernel") {
        for (ResampleKernel k :
             {ResampleKernel::Bicubic, ResampleKernel::Bilinear, ResampleKernel::Area})
            CHECK(content_hash(resize_image(img, 16, 16, k)) == content_hash(img));
    }
    SUBCASE("constant images stay constant") {
        Tensor flat = Tensor::full(Shape{1, 3, 16, 16}, 0.37);
        for (ResampleKernel k :
             {ResampleKernel::Bicubic, ResampleKernel::Bilinear, ResampleKernel::Area}) {
            for (double v : resize_image(flat, 64, 64, k).v)
                CHECK(v == doctest::Approx(0.37).epsilon(1e-9));
            for (double v : resize_image(flat, 4, 4, k).v)
                CHECK(v == doctest::Approx(0.37).epsilon(1e-9));
        }
    }
    SUBCASE("area downsample by an integer factor equals the block mean") {
        Tensor small = resize_image(img, 4, 4, ResampleKernel::Area);
        for (int n = 0; n < 2; ++n)
            for (int c = 0; c < 3; ++c)
                for (int y = 0; y < 4; ++y)
                    for (int x = 0; x < 4; ++x) {
                        double acc = 0.0;
                        for (int dy = 0; dy < 4; ++dy)
                            for (int dx = 0; dx < 4; ++dx)
                                acc += img.at(n, c, 4 * y + dy, 4 * x + dx);
                        CHECK(small.at(n, c, y, x) ==
                              doctest::Approx(acc / 16.0).epsilon(1e-12));
                    }
    }
    SUBCASE("area upsample falls back to bilinear") {
        CHECK(content_hash(resize_image(img, 32, 32, ResampleKernel::Area)) ==
              content_hash(resize_image(img, 32, 32, ResampleKernel::Bilinear)));
    }
    SUBCASE("shape contract") {
        CHECK(resize_image(img, 64, 48, ResampleKernel::Bicubic).shape ==
              Shape{2, 3, 64, 48});
        CHECK_THROWS_AS(resize_image(img, 0, 4, ResampleKernel::Bicubic), ShapeError);
    }
    SUBCASE("upsample helper clips and scales") {
        Tensor up = upsample(img, 4);
        CHECK(up.shape == Shape{2, 3, 64, 64});
        for (double v : up.v) {
            CHECK(v >= 0.0);
            CHECK(v <= 1.0);
        }
        CHECK(content_hash(upsample(img, 1)) == content_hash(img));
    }
}

TEST_CASE("gaussian blur") {
    Tensor img = smooth_image(16, 16, 21);
    SUBCASE("zero sigma is an exact copy") {
        CHECK(content_hash(gaussian_blur(img, 0.0)) == content_hash(img));
    }
    SUBCASE("constants are preserved") {
        Tensor flat = Tensor::full(Shape{1, 3, 8, 8}, 0.61);
        CHECK(gaussian_blur(flat, 1.3).max_abs_diff(flat) < 1e-12);
    }
    SUBCASE("smoothing strictly reduces variance and more sigma smooths more") {
        const double v0 = variance(img);
        const double v1 = variance(gaussian_blur(img, 0.8));
        const double v2 = variance(gaussian_blur(img, 2.0));
        CHECK(v1 < v0);
        CHECK(v2 < v1);
    }
    SUBCASE("mean is approximately preserved") {
        CHECK(gaussian_blur(img, 1.1).mean() == doctest::Approx(img.mean()).epsilon(1e-3));
    }
}

TEST_CASE("degradation pipeline") {
    std::mt19937_64 rng(31);
    Tensor hr = Tensor::uniform(Shape{3, 3, 32, 32}, 0.0, 1.0, rng);
    SUBCASE("identity parameters reproduce the input bit-exactly") {
        DegradeParams p;
        p.blur_sigma = {0.0, 0.0};
        p.noise_sigma = {0.0, 0.0};
        p.scale = 1;
        p.jpeg_enabled = false;
        CHECK(content_hash(degrade(hr, p, 7)) == content_hash(hr));
    }
    SUBCASE("shape contract") {
        DegradeParams p;
        Tensor lr = degrade(hr, p, 7);
        CHECK(lr.shape == Shape{3, 3, 8, 8});
        Tensor odd = Tensor::zeros(Shape{1, 3, 30, 32});
        CHECK_THROWS_AS(degrade(odd, p, 7), ShapeError);
    }
    SUBCASE("pure function of seed") {
        DegradeParams p;
        p.noise_sigma = {0.0, 0.04};
        CHECK(content_hash(degrade(hr, p, 11)) == content_hash(degrade(hr, p, 11)));
        CHECK(content_hash(degrade(hr, p, 11)) != content_hash(degrade(hr, p, 12)));
    }
    SUBCASE("outputs stay in unit range with noise and jpeg") {
        DegradeParams p;
        p.noise_sigma = {0.05, 0.05};
        p.jpeg_enabled = true;
        p.jpeg_quality = {40, 90};
        Tensor lr = degrade(hr, p, 3);
        for (double v : lr.v) {
            CHECK(v >= 0.0);
            CHECK(v <= 1.0);
        }
        CHECK(content_hash(lr) == content_hash(degrade(hr, p, 3)));
    }
    SUBCASE("parameter validation") {
        DegradeParams p;
        p.scale = 0;
        CHECK_THROWS_AS(p.validate(), ConfigError);
        p = DegradeParams{};
        p.blur_sigma = {2.0, 1.0};
        CHECK_THROWS_AS(p.validate(), ConfigError);
        p = DegradeParams{};
        p.kernels.clear();
        CHECK_THROWS_AS(p.validate(), ConfigError);
        p = DegradeParams{};
        p.jpeg_enabled = true;
        p.jpeg_quality = {0, 90};
        CHECK_THROWS_AS(p.validate(), ConfigError);
    }
}

TEST_CASE("pair stream") {
    TempDir dir;
    for (int i = 0; i < 10; ++i)
        save_png((dir.path / ("img_" + std::to_string(i) + ".png")).string(),
                 smooth_image(80, 80, 100 + i));
    DegradeParams p;
    p.noise_sigma = {0.0, 0.01};
    PairStream::Config cfg;
    cfg.patch = 32;
    cfg.batch = 3;
    cfg.seed = 42;
    SUBCASE("drop-last batch arithmetic") {
        PairStream s(dir.str(), p, cfg);
        CHECK(s.batches_per_epoch() == 3);
        CHECK(s.files().size() == 10);
    }
    SUBCASE("emitted tensors have the contracted shapes and ranges") {
        PairStream s(dir.str(), p, cfg);
        PairBatch b = s.next();
        CHECK(b.hr.shape == Shape{3, 3, 32, 32});
        CHECK(b.lr.shape == Shape{3, 3, 8, 8});
        CHECK(b.lr_up.shape == Shape{3, 3, 32, 32});
        for (const Tensor* t : {&b.hr, &b.lr, &b.lr_up})
            for (double v : t->v) {
                CHECK(v >= 0.0);
                CHECK(v <= 1.0);
            }
    }
    SUBCASE("lr_up is exactly the declared upsample of lr") {
        PairStream s(dir.str(), p, cfg);
        PairBatch b = s.next();
        CHECK(content_hash(b.lr_up) == content_hash(upsample(b.lr, p.scale)));
    }
    SUBCASE("same seed reproduces the whole batch sequence") {
        PairStream s1(dir.str(), p, cfg);
        PairStream s2(dir.str(), p, cfg);
        for (int i = 0; i < 7; ++i) {
            PairBatch a = s1.next();
            PairBatch b = s2.next();
            CHECK(content_hash(a.hr) == content_hash(b.hr));
            CHECK(content_hash(a.lr) == content_hash(b.lr));
        }
        PairStream::Config other = cfg;
        other.seed = 43;
        PairStream s3(dir.str(), p, other);
        CHECK(content_hash(s3.next().hr) != content_hash(s1.next().hr));
    }
    SUBCASE("epochs reshuffle") {
        PairStream s(dir.str(), p, cfg);
        std::vector<std::uint64_t> first;
        for (int i = 0; i < 3; ++i) first.push_back(content_hash(s.next().hr));
        std::vector<std::uint64_t> second;
        for (int i = 0; i < 3; ++i) second.push_back(content_hash(s.next().hr));
        CHECK(s.epoch() == 1);
        CHECK(first != second);
    }
    SUBCASE("unusable files are skipped with warnings") {
        save_png((dir.path / "tiny.png").string(), smooth_image(8, 8, 5));
        std::ofstream(dir.path / "broken.png") << "not a png";
        PairStream s(dir.str(), p, cfg);
        CHECK(s.files().size() == 10);
        CHECK(s.warnings().size() == 2);
    }
    SUBCASE("each item keeps one fixed pair across epochs by default") {
        PairStream::Config full = cfg;
        full.batch = 5;
        PairStream s(dir.str(), p, full);
        auto epoch_hashes = [&] {
            std::vector<std::uint64_t> h;
            for (int b = 0; b < 2; ++b) {
                PairBatch pb = s.next();
                for (int i = 0; i < 5; ++i)
                    h.push_back(mix_seed(content_hash(slice_image(pb.hr, i)),
                                         content_hash(slice_image(pb.lr, i))));
            }
            std::sort(h.begin(), h.end());
            return h;
        };
        CHECK(epoch_hashes() == epoch_hashes());
    }
    SUBCASE("per-epoch resampling redraws crops and degradations") {
        PairStream::Config aug = cfg;
        aug.batch = 5;
        aug.resample_each_epoch = true;
        PairStream s(dir.str(), p, aug);
        auto epoch_hashes = [&] {
            std::vector<std::uint64_t> h;
            for (int b = 0; b < 2; ++b) h.push_back(content_hash(s.next().hr));
            std::sort(h.begin(), h.end());
            return h;
        };
        CHECK(epoch_hashes() != epoch_hashes());
    }
    SUBCASE("seek reproduces a stream position bit-exactly") {
        PairStream s1(dir.str(), p, cfg);
        for (int i = 0; i < 4; ++i) s1.next();
        CHECK(s1.epoch() == 1);
        CHECK(s1.cursor() == 1);
        PairStream s2(dir.str(), p, cfg);
        s2.seek(1, 1);
        for (int i = 0; i < 3; ++i) {
            PairBatch a = s1.next();
            PairBatch b = s2.next();
            CHECK(content_hash(a.hr) == content_hash(b.hr));
            CHECK(content_hash(a.lr) == content_hash(b.lr));
        }
        s1.seek(0, 0);
        s2.seek(0, 0);
        CHECK(content_hash(s1.next().hr) == content_hash(s2.next().hr));
    }
    SUBCASE("seek range is validated") {
        PairStream s(dir.str(), p, cfg);
        CHECK_THROWS_AS(s.seek(-1, 0), ConfigError);
        CHECK_THROWS_AS(s.seek(0, -1), ConfigError);
        CHECK_THROWS_AS(s.seek(0, 4), ConfigError);
    }
    SUBCASE("configuration errors") {
        PairStream::Config bad = cfg;
        bad.batch = 0;
        CHECK_THROWS_AS(PairStream(dir.str(), p, bad), ConfigError);
        bad = cfg;
        bad.patch = 30;
        CHECK_THROWS_AS(PairStream(dir.str(), p, bad), ConfigError);
        TempDir empty;
        CHECK_THROWS_AS(PairStream(empty.str(), p, cfg), ConfigError);
        bad = cfg;
        bad.batch = 11;
        CHECK_THROWS_AS(PairStream(dir.str(), p, bad), ConfigError);
    }
}
