#pragma once

#include <string>
#include <vector>

#include "viewpaint/tensor.hpp"

namespace viewpaint {

// ICDF: raw tensor container. Layout: magic bytes "ICDF", u8 rank,
// rank x u32 little-endian extents, f32 little-endian payload. Lossless;
// used for checkpoints and exact-image dumps.
void save_icdf(const std::string& path, const Tensor& t);
Tensor load_icdf(const std::string& path);

std::vector<unsigned char> encode_icdf(const Tensor& t);
Tensor decode_icdf(const std::vector<unsigned char>& bytes);

// PNG, 8-bit grayscale or RGB, non-interlaced. Images are [C,H,W] tensors
// with C in {1,3}; decode maps bytes to value/255 in [0,1], encode clamps
// to [0,1] and quantizes by round(value*255). Encoded bytes are
// deterministic for a given tensor.
void save_png(const std::string& path, const Tensor& img);
Tensor load_png(const std::string& path);

std::vector<unsigned char> encode_png(const Tensor& img);
Tensor decode_png(const std::vector<unsigned char>& bytes);

std::vector<unsigned char> read_file(const std::string& path);
void write_file(const std::string& path, const std::vector<unsigned char>& bytes);

}  // namespace viewpaint
