#include "shiftsr/nn/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

namespace shiftsr::nn {

std::string Shape::str() const {
    return "(" + std::to_string(n) + "," + std::to_string(c) + "," + std::to_string(h) + "," +
           std::to_string(w) + ")";
}

Tensor Tensor::full(Shape s, double value) {
    Tensor t(s);
    std::fill(t.v.begin(), t.v.end(), value);
    return t;
}

Tensor Tensor::scalar(double value) {
    Tensor t(Shape{1, 1, 1, 1});
    t.v[0] = value;
    return t;
}

Tensor Tensor::randn(Shape s, std::mt19937_64& rng) {
    Tensor t(s);
    std::normal_distribution<double> dist(0.0, 1.0);
    for (auto& x : t.v) x = dist(rng);
    return t;
}

Tensor Tensor::uniform(Shape s, double lo, double hi, std::mt19937_64& rng) {
    Tensor t(s);
    std::uniform_real_distribution<double> dist(lo, hi);
    for (auto& x : t.v) x = dist(rng);
    return t;
}

bool Tensor::all_finite() const {
    for (double x : v) {
        if (!std::isfinite(x)) return false;
    }
    return true;
}

double Tensor::min() const {
    return v.empty() ? 0.0 : *std::min_element(v.begin(), v.end());
}

double Tensor::max() const {
    return v.empty() ? 0.0 : *std::max_element(v.begin(), v.end());
}

double Tensor::sum() const {
    double s = 0.0;
    for (double x : v) s += x;
    return s;
}

double Tensor::max_abs_diff(const Tensor& o) const {
    check_same_shape(*this, o, "max_abs_diff");
    double m = 0.0;
    for (std::size_t i = 0; i < v.size(); ++i) m = std::max(m, std::abs(v[i] - o.v[i]));
    return m;
}

std::uint64_t content_hash(const Tensor& t) {
    std::uint64_t h = 1469598103934665603ull;
    for (double x : t.v) {
        std::uint64_t bits;
        std::memcpy(&bits, &x, sizeof(bits));
        for (int b = 0; b < 8; ++b) {
            h ^= (bits >> (b * 8)) & 0xffu;
            h *= 1099511628211ull;
        }
    }
    return h;
}

}  // namespace shiftsr::nn
