#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "san/common.hpp"
#include "san/tensor.hpp"

namespace san {

// 3-channel float image, values in [0,1], RGB interleaved row-major.
struct RgbImage {
  int width = 0;
  int height = 0;
  std::vector<float> px;

  RgbImage() = default;
  RgbImage(int w, int h) : width(w), height(h), px(static_cast<size_t>(w) * h * 3, 0.0f) {}

  float& at(int x, int y, int c) { return px[(static_cast<size_t>(y) * width + x) * 3 + c]; }
  float at(int x, int y, int c) const { return px[(static_cast<size_t>(y) * width + x) * 3 + c]; }

  void clamp01() {
    for (float& v : px) v = v < 0.0f ? 0.0f : (v > 1.0f ? 1.0f : v);
  }
};

// 8-bit conversion rules: byte = round(v*255), float = byte/255.
uint8_t float_to_byte(float v);
float byte_to_float(uint8_t b);

// PNG, 8-bit per channel. The decoder handles grayscale / RGB / RGBA,
// non-interlaced, with a full inflate (stored, fixed and dynamic Huffman
// blocks). The encoder writes RGB with stored deflate blocks, which keeps
// the output byte-for-byte reproducible.
RgbImage decode_png(const std::vector<uint8_t>& bytes);
std::vector<uint8_t> encode_png(const RgbImage& img);

RgbImage read_png(const std::string& path);
// Atomic: writes a temp file, then renames.
void write_png(const RgbImage& img, const std::string& path);

// [1,3,H,W] in [0,1]
Tensor image_to_tensor(const RgbImage& img);
RgbImage tensor_to_image(const Tensor& t);  // clamps

// Raw inflate of a zlib stream (RFC 1950/1951); exposed for tests.
std::vector<uint8_t> zlib_inflate(const uint8_t* data, size_t size);

uint32_t crc32(const uint8_t* data, size_t size);

}  // namespace san
