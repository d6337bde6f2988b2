// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>
#include <vector>

#include "wespe/tensor.hpp"

namespace wespe {

/// An ImageBatch is a Tensor of shape (batch, channels, H, W) with values in
/// [0, 1] and channels in {1, 3}. These helpers enforce that contract.
void check_image_batch(const Tensor& img, const char* who);

/// Decodes an 8- or 16-bit raster image into a batch of one, values scaled
/// to [0,1] by the format's max code value. Grayscale stays 1-channel, color
/// becomes RGB.
Tensor load_image(const std::string& path);

/// Writes a batch-of-one image as an 8-bit raster file. Values are clamped
/// to [0,1] and quantized round-half-up, so a load/save round trip differs
/// by at most 1/255 per channel.
void save_image(const Tensor& img, const std::string& path);

/// round-half-up quantization to 8-bit codes, shared by save_image and the
/// metrics that are defined on quantized values.
inline int quantize8(double v) {
    if (v <= 0.0) return 0;
    if (v >= 1.0) return 255;
    return static_cast<int>(v * 255.0 + 0.5);
}

/// ITU-R BT.601 luma: 0.299 R + 0.587 G + 0.114 B.
Tensor to_grayscale(const Tensor& img);

/// Adjoint of to_grayscale: routes a 1-channel gradient back to 3 channels.
Tensor to_grayscale_backward(const Tensor& grad_gray);

/// Lossless PNG encode of a batch-of-one image at the harness's fixed
/// settings (zlib level 6). Returns the encoded byte stream.
std::vector<unsigned char> encode_png(const Tensor& img);

}  // namespace wespe
