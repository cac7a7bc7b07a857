#include "san/filters.hpp"

#include <algorithm>
#include <cmath>

#include "san/ops.hpp"

namespace san {

namespace {

inline float clamp01f(double v) {
  return static_cast<float>(v < 0.0 ? 0.0 : (v > 1.0 ? 1.0 : v));
}

// Accumulate in double so that replicated-gray inputs map to themselves
// exactly after the cast back to float.
inline float luma(float r, float g, float b) {
  return static_cast<float>(0.299 * r + 0.587 * g + 0.114 * b);
}

}  // namespace

RgbImage gray_style(const RgbImage& img) {
  RgbImage out(img.width, img.height);
  const size_t n = static_cast<size_t>(img.width) * img.height;
  for (size_t i = 0; i < n; ++i) {
    const float y = luma(img.px[i * 3], img.px[i * 3 + 1], img.px[i * 3 + 2]);
    out.px[i * 3] = y;
    out.px[i * 3 + 1] = y;
    out.px[i * 3 + 2] = y;
  }
  return out;
}

RgbImage light_style(const RgbImage& img) {
  RgbImage out(img.width, img.height);
  for (size_t i = 0; i < img.px.size(); ++i)
    out.px[i] = clamp01f(std::pow(static_cast<double>(std::max(img.px[i], 0.0f)), 0.55));
  return out;
}

RgbImage gaussian_blur(const RgbImage& img, double sigma) {
  check(sigma > 0.0, "gaussian_blur: sigma must be positive");
  const int radius = static_cast<int>(std::ceil(3.0 * sigma));
  std::vector<double> k(static_cast<size_t>(radius) + 1);
  double total = 0.0;
  for (int i = -radius; i <= radius; ++i) {
    const double v = std::exp(-(static_cast<double>(i) * i) / (2.0 * sigma * sigma));
    k[static_cast<size_t>(std::abs(i))] = v;
    total += v;
  }
  for (double& v : k) v /= total;

  const int w = img.width, h = img.height;
  std::vector<float> tmp(img.px.size());
  // horizontal
#pragma omp parallel for schedule(static)
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      double acc[3] = {0, 0, 0};
      for (int i = -radius; i <= radius; ++i) {
        const int xx = std::clamp(x + i, 0, w - 1);
        const double kv = k[static_cast<size_t>(std::abs(i))];
        for (int c = 0; c < 3; ++c) acc[c] += kv * img.at(xx, y, c);
      }
      for (int c = 0; c < 3; ++c)
        tmp[(static_cast<size_t>(y) * w + x) * 3 + c] = static_cast<float>(acc[c]);
    }
  }
  RgbImage out(w, h);
  // vertical
#pragma omp parallel for schedule(static)
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      double acc[3] = {0, 0, 0};
      for (int i = -radius; i <= radius; ++i) {
        const int yy = std::clamp(y + i, 0, h - 1);
        const double kv = k[static_cast<size_t>(std::abs(i))];
        for (int c = 0; c < 3; ++c)
          acc[c] += kv * tmp[(static_cast<size_t>(yy) * w + x) * 3 + c];
      }
      for (int c = 0; c < 3; ++c) out.at(x, y, c) = static_cast<float>(acc[c]);
    }
  }
  return out;
}

RgbImage sketch_style(const RgbImage& img) {
  const RgbImage g = gray_style(img);
  RgbImage inv(img.width, img.height);
  for (size_t i = 0; i < g.px.size(); ++i) inv.px[i] = 1.0f - g.px[i];
  const double sigma = 0.04 * std::min(img.width, img.height);
  const RgbImage b = gaussian_blur(inv, std::max(sigma, 0.5));
  RgbImage out(img.width, img.height);
  const size_t n = static_cast<size_t>(img.width) * img.height;
  for (size_t i = 0; i < n; ++i) {
    const double denom = 1.0 - static_cast<double>(b.px[i * 3]) + 1e-4;
    const float v = clamp01f(static_cast<double>(g.px[i * 3]) / denom);
    out.px[i * 3] = v;
    out.px[i * 3 + 1] = v;
    out.px[i * 3 + 2] = v;
  }
  return out;
}

const std::vector<std::string>& StyleFilterSet::names() {
  static const std::vector<std::string> n = {"light", "gray", "sketch"};
  return n;
}

RgbImage StyleFilterSet::apply(const std::string& name, const RgbImage& img) {
  if (name == "light") return light_style(img);
  if (name == "gray") return gray_style(img);
  if (name == "sketch") return sketch_style(img);
  throw std::runtime_error("unknown style filter '" + name + "'");
}

Box expanded_box(const Box& box, double expand_ratio, double dx, double dy) {
  const double mx = expand_ratio * box.width();
  const double my = expand_ratio * box.height();
  return {box.x1 - mx + dx, box.y1 - my + dy, box.x2 + mx + dx, box.y2 + my + dy};
}

Box sample_crop_window(const Box& box, double expand_ratio, Rng& rng) {
  const double mx = expand_ratio * box.width();
  const double my = expand_ratio * box.height();
  const double dx = mx > 0.0 ? rng.uniform(-mx, mx) : 0.0;
  const double dy = my > 0.0 ? rng.uniform(-my, my) : 0.0;
  return expanded_box(box, expand_ratio, dx, dy);
}

CropResult crop_window(const RgbImage& img, const Box& window, int out_size) {
  check(out_size >= 1, "crop_window: out_size must be >= 1");
  Box b = window;
  b.x1 = std::max(0.0, b.x1);
  b.y1 = std::max(0.0, b.y1);
  b.x2 = std::min(static_cast<double>(img.width), b.x2);
  b.y2 = std::min(static_cast<double>(img.height), b.y2);
  check(b.width() > 0.0 && b.height() > 0.0, "crop_window: degenerate window after clipping");

  // per-channel bicubic sampling of the window
  const int w = img.width, h = img.height;
  std::vector<float> plane(static_cast<size_t>(w) * h);
  std::vector<float> outp(static_cast<size_t>(out_size) * out_size);
  CropResult res;
  res.image = RgbImage(out_size, out_size);
  for (int c = 0; c < 3; ++c) {
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) plane[static_cast<size_t>(y) * w + x] = img.at(x, y, c);
    kern::bicubic_rect(plane.data(), h, w, b.x1, b.y1, b.x2, b.y2, outp.data(), out_size,
                       out_size);
    for (int y = 0; y < out_size; ++y)
      for (int x = 0; x < out_size; ++x)
        res.image.at(x, y, c) = outp[static_cast<size_t>(y) * out_size + x];
  }
  res.image.clamp01();

  // pixel-center mapping: crop_x = (x - b.x1) * out/bw - 0.5 + 0.5*out/bw...
  // derived from src_x = b.x1 + (crop_x + 0.5) * bw/out - 0.5
  const double sx = out_size / b.width();
  const double sy = out_size / b.height();
  res.to_crop = {sx, sy, (0.5 - b.x1) * sx - 0.5, (0.5 - b.y1) * sy - 0.5};
  return res;
}

CropResult crop_face(const RgbImage& img, const Box& box, double expand_ratio, int out_size) {
  check(box.width() > 0.0 && box.height() > 0.0, "crop_face: degenerate box");
  return crop_window(img, expanded_box(box, expand_ratio), out_size);
}

std::pair<CropResult, std::vector<Pt>> random_crop_augment(const RgbImage& img, const Box& box,
                                                           const std::vector<Pt>& landmarks,
                                                           double expand_ratio, int out_size,
                                                           Rng& rng) {
  const Box window = sample_crop_window(box, expand_ratio, rng);
  CropResult res = crop_window(img, window, out_size);
  std::vector<Pt> mapped = res.to_crop.apply(landmarks);
  return {std::move(res), std::move(mapped)};
}

RgbImage resize_image(const RgbImage& img, int out_w, int out_h) {
  CropResult r = crop_window(img, {0.0, 0.0, static_cast<double>(img.width),
                                   static_cast<double>(img.height)},
                             out_w);
  if (out_w == out_h) return r.image;
  // non-square resize: sample the full rectangle directly
  const int w = img.width, h = img.height;
  std::vector<float> plane(static_cast<size_t>(w) * h);
  std::vector<float> outp(static_cast<size_t>(out_w) * out_h);
  RgbImage out(out_w, out_h);
  for (int c = 0; c < 3; ++c) {
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) plane[static_cast<size_t>(y) * w + x] = img.at(x, y, c);
    kern::bicubic_rect(plane.data(), h, w, 0.0, 0.0, static_cast<double>(w),
                       static_cast<double>(h), outp.data(), out_h, out_w);
    for (int y = 0; y < out_h; ++y)
      for (int x = 0; x < out_w; ++x)
        out.at(x, y, c) = outp[static_cast<size_t>(y) * out_w + x];
  }
  out.clamp01();
  return out;
}

}  // namespace san
