#pragma once

#include <functional>
#include <string>
#include <vector>

#include "san/geometry.hpp"
#include "san/image.hpp"
#include "san/rng.hpp"

namespace san {

// Deterministic stand-ins for the photo-editor style filters. They recolor
// only; geometry is never touched, so annotations carry over unchanged.

// Luma Y = 0.299 R + 0.587 G + 0.114 B replicated to all channels.
RgbImage gray_style(const RgbImage& img);

// Per-channel gamma brighten, out = in^0.55.
RgbImage light_style(const RgbImage& img);

// Dodge-style pencil sketch: g = luma, b = blur(1-g, sigma = 0.04*min(h,w)),
// out = clamp(g / (1 - b + 1e-4)), replicated to all channels.
RgbImage sketch_style(const RgbImage& img);

// Separable Gaussian, radius ceil(3*sigma), kernel normalized, edge clamped.
RgbImage gaussian_blur(const RgbImage& img, double sigma);

struct StyleFilterSet {
  // Fixed filter order: light, gray, sketch.
  static const std::vector<std::string>& names();
  static RgbImage apply(const std::string& name, const RgbImage& img);
};

struct CropResult {
  RgbImage image;
  AffineMap to_crop;  // original-image coords -> crop coords
};

// Expands the box by expand_ratio of its width/height on each side, clips to
// the image, and resizes the window to out_size x out_size with bicubic
// sampling. The returned map takes original-image coordinates to crop
// coordinates.
CropResult crop_face(const RgbImage& img, const Box& box, double expand_ratio, int out_size);

// The expanded crop window, shifted by (dx, dy); used by the augmented crop.
Box expanded_box(const Box& box, double expand_ratio, double dx = 0.0, double dy = 0.0);

// Draws a translation within the expansion margin. The same window can then
// be applied to several aligned images.
Box sample_crop_window(const Box& box, double expand_ratio, Rng& rng);

// Crops an explicit window (clipped to the image) to out_size x out_size.
CropResult crop_window(const RgbImage& img, const Box& window, int out_size);

// Random-translation crop augmentation: landmarks are mapped with the same
// transform; deterministic given the RNG state.
std::pair<CropResult, std::vector<Pt>> random_crop_augment(const RgbImage& img, const Box& box,
                                                           const std::vector<Pt>& landmarks,
                                                           double expand_ratio, int out_size,
                                                           Rng& rng);

// Whole-image bicubic resize.
RgbImage resize_image(const RgbImage& img, int out_w, int out_h);

}  // namespace san
