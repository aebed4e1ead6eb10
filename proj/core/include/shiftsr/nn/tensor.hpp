#pragma once

#include <cstddef>
#include <cstdint>
#include <new>
#include <random>
#include <string>
#include <vector>

#include "shiftsr/errors.hpp"

namespace shiftsr::nn {

/// 64-byte-aligned allocator. Keeping every tensor buffer on a fixed
/// alignment makes the vectorized kernel paths, and therefore the exact
/// floating-point summation order, reproducible across runs.
template <class T>
struct AlignedAllocator {
    using value_type = T;
    static constexpr std::size_t alignment = 64;

    AlignedAllocator() = default;
    template <class U>
    AlignedAllocator(const AlignedAllocator<U>&) {}

    T* allocate(std::size_t n) {
        return static_cast<T*>(::operator new(n * sizeof(T), std::align_val_t{alignment}));
    }
    void deallocate(T* p, std::size_t) noexcept {
        ::operator delete(p, std::align_val_t{alignment});
    }
    template <class U>
    bool operator==(const AlignedAllocator<U>&) const {
        return true;
    }
};

using dvec = std::vector<double, AlignedAllocator<double>>;

/// Dense rank-4 (batch, channel, height, width) tensor of doubles, NCHW row-major.
/// Matrices are stored as (n, d, 1, 1); scalars as (1, 1, 1, 1).
struct Shape {
    int n = 1, c = 1, h = 1, w = 1;

    bool operator==(const Shape&) const = default;
    std::int64_t numel() const {
        return static_cast<std::int64_t>(n) * c * h * w;
    }
    std::string str() const;
};

struct Tensor {
    Shape shape;
    dvec v;

    Tensor() = default;
    explicit Tensor(Shape s) : shape(s), v(static_cast<std::size_t>(s.numel()), 0.0) {}

    static Tensor zeros(Shape s) { return Tensor(s); }
    static Tensor full(Shape s, double value);
    static Tensor scalar(double value);
    /// Standard normal entries drawn sequentially from `rng`.
    static Tensor randn(Shape s, std::mt19937_64& rng);
    /// Uniform entries on [lo, hi).
    static Tensor uniform(Shape s, double lo, double hi, std::mt19937_64& rng);

    std::int64_t numel() const { return shape.numel(); }

    double& at(int n_, int c_, int y, int x) {
        return v[((static_cast<std::size_t>(n_) * shape.c + c_) * shape.h + y) * shape.w + x];
    }
    double at(int n_, int c_, int y, int x) const {
        return v[((static_cast<std::size_t>(n_) * shape.c + c_) * shape.h + y) * shape.w + x];
    }

    double* data() { return v.data(); }
    const double* data() const { return v.data(); }

    bool same_shape(const Tensor& o) const { return shape == o.shape; }
    bool all_finite() const;
    double min() const;
    double max() const;
    double sum() const;
    double mean() const { return numel() ? sum() / static_cast<double>(numel()) : 0.0; }
    /// Max absolute difference; shapes must match.
    double max_abs_diff(const Tensor& o) const;
};

inline void check_same_shape(const Tensor& a, const Tensor& b, const char* where) {
    if (!a.same_shape(b)) {
        throw ShapeError(std::string(where) + ": shape mismatch " + a.shape.str() + " vs " +
                         b.shape.str());
    }
}

/// FNV-1a over the raw little-endian bytes; stable fingerprint for determinism checks.
std::uint64_t content_hash(const Tensor& t);

}  // namespace shiftsr::nn
