// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>

#include "monkey/tensor.hpp"

namespace monkey {

/// [3,H,W] floats in [0,1] -> 8-bit RGB PNG (values clamped). Written
/// atomically; identical tensors produce byte-identical files.
void write_png_rgb(const std::string& path, const Tensor& image);

/// [H,W] floats in [0,1] -> 8-bit grayscale PNG.
void write_png_gray(const std::string& path, const Tensor& image);

/// Any 8-bit PNG -> [3,H,W] floats in [0,1] (grayscale/palette expanded,
/// alpha dropped).
Tensor read_png_rgb(const std::string& path);

}  // namespace monkey
