#pragma once

#include "shiftsr/nn/tensor.hpp"

namespace shiftsr {

/// Single-level orthonormal Haar analysis of a batch, per channel.
/// Band convention: LH holds horizontal detail, HL vertical, HH diagonal.
/// For each 2x2 block [[a, b], [c, d]]:
///   LL = (a + b + c + d) / 2
///   LH = (a - b + c - d) / 2
///   HL = (a + b - c - d) / 2
///   HH = (a - b - c + d) / 2
struct WaveletSubbands {
    nn::Tensor ll, lh, hl, hh;
};

/// Analysis; spatial dimensions must be even (no implicit padding).
WaveletSubbands dwt2(const nn::Tensor& x);

/// Exact synthesis inverse of dwt2.
nn::Tensor idwt2(const WaveletSubbands& sb);

}  // namespace shiftsr
