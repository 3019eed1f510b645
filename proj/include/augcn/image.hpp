#pragma once

#include <string>

#include "augcn/tensor.hpp"

namespace augcn {

// Images are tensors of shape H x W x ch with values in [0, 1].

/// Reads a binary PGM (P5, ch=1) or PPM (P6, ch=3) file with 8-bit samples;
/// pixel values are divided by 255 on load.
Tensor load_image(const std::string& path);

/// Writes H x W x 1 as binary PGM, quantizing to 8 bits (round, clamp).
void save_pgm(const std::string& path, const Tensor& image);

/// Writes H x W x 3 as binary PPM.
void save_ppm(const std::string& path, const Tensor& image);

/// Resamples an H x W x ch image to size x size with bilinear interpolation
/// (corner-aligned: source and destination corners coincide).
Tensor resize_bilinear(const Tensor& image, std::size_t size);

}  // namespace augcn
