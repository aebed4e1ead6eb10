#pragma once

#include <string>
#include <vector>

#include "shiftsr/nn/tensor.hpp"

namespace shiftsr {

// Images are (n, 3, h, w) tensors with RGB values in [0, 1].
nn::Tensor load_image(const std::string& path);
void save_png(const std::string& path, const nn::Tensor& img, int index = 0);

// Encode one image as JPEG at the given quality and decode it back.
nn::Tensor jpeg_roundtrip(const nn::Tensor& img, int quality);

// Sorted list of decodable image files directly inside dir.
std::vector<std::string> list_images(const std::string& dir);

nn::Tensor slice_image(const nn::Tensor& batch, int index);

}  // namespace shiftsr
