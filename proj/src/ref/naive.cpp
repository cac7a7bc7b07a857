#include "san/ref.hpp"

#include <algorithm>
#include <cmath>

namespace san::ref {

void conv2d(const std::vector<double>& x, const std::vector<double>& w,
            const std::vector<double>& b, std::vector<double>& y, int n, int cin, int h, int wd,
            int cout, int kh, int kw, int stride, int pad) {
  const int oh = (h + 2 * pad - kh) / stride + 1;
  const int ow = (wd + 2 * pad - kw) / stride + 1;
  y.assign(static_cast<size_t>(n) * cout * oh * ow, 0.0);
  for (int ni = 0; ni < n; ++ni)
    for (int co = 0; co < cout; ++co)
      for (int r = 0; r < oh; ++r)
        for (int c = 0; c < ow; ++c) {
          double acc = b.empty() ? 0.0 : b[co];
          for (int ci = 0; ci < cin; ++ci)
            for (int fr = 0; fr < kh; ++fr)
              for (int fc = 0; fc < kw; ++fc) {
                const int ih = r * stride + fr - pad;
                const int iw = c * stride + fc - pad;
                if (ih < 0 || ih >= h || iw < 0 || iw >= wd) continue;
                acc += w[((static_cast<size_t>(co) * cin + ci) * kh + fr) * kw + fc] *
                       x[((static_cast<size_t>(ni) * cin + ci) * h + ih) * wd + iw];
              }
          y[((static_cast<size_t>(ni) * cout + co) * oh + r) * ow + c] = acc;
        }
}

void max_pool2(const std::vector<double>& x, std::vector<double>& y, int n, int c, int h, int w) {
  const int oh = h / 2, ow = w / 2;
  y.assign(static_cast<size_t>(n) * c * oh * ow, 0.0);
  for (int p = 0; p < n * c; ++p)
    for (int r = 0; r < oh; ++r)
      for (int col = 0; col < ow; ++col) {
        double best = -1e300;
        for (int dr = 0; dr < 2; ++dr)
          for (int dc = 0; dc < 2; ++dc)
            best = std::max(best, x[(static_cast<size_t>(p) * h + 2 * r + dr) * w + 2 * col + dc]);
        y[(static_cast<size_t>(p) * oh + r) * ow + col] = best;
      }
}

namespace {

double catmull_rom(double t) {
  t = std::fabs(t);
  if (t <= 1.0) return 1.5 * t * t * t - 2.5 * t * t + 1.0;
  if (t < 2.0) return -0.5 * t * t * t + 2.5 * t * t - 4.0 * t + 2.0;
  return 0.0;
}

}  // namespace

void bicubic_resize(const std::vector<double>& src, int src_h, int src_w,
                    std::vector<double>& dst, int out_h, int out_w) {
  dst.assign(static_cast<size_t>(out_h) * out_w, 0.0);
  for (int oy = 0; oy < out_h; ++oy)
    for (int ox = 0; ox < out_w; ++ox) {
      const double sx = (ox + 0.5) * src_w / out_w - 0.5;
      const double sy = (oy + 0.5) * src_h / out_h - 0.5;
      const int bx = static_cast<int>(std::floor(sx));
      const int by = static_cast<int>(std::floor(sy));
      double acc = 0.0;
      for (int m = -1; m <= 2; ++m)
        for (int k = -1; k <= 2; ++k) {
          const int yy = std::clamp(by + m, 0, src_h - 1);
          const int xx = std::clamp(bx + k, 0, src_w - 1);
          acc += catmull_rom(sy - (by + m)) * catmull_rom(sx - (bx + k)) *
                 src[static_cast<size_t>(yy) * src_w + xx];
        }
      dst[static_cast<size_t>(oy) * out_w + ox] = acc;
    }
}

void gaussian_blur(const std::vector<double>& src, int h, int w, double sigma,
                   std::vector<double>& dst) {
  const int radius = static_cast<int>(std::ceil(3.0 * sigma));
  const int size = 2 * radius + 1;
  std::vector<double> k(static_cast<size_t>(size) * size);
  double total = 0.0;
  for (int dy = -radius; dy <= radius; ++dy)
    for (int dx = -radius; dx <= radius; ++dx) {
      const double v = std::exp(-(dx * dx + dy * dy) / (2.0 * sigma * sigma));
      k[static_cast<size_t>(dy + radius) * size + (dx + radius)] = v;
      total += v;
    }
  for (double& v : k) v /= total;
  dst.assign(static_cast<size_t>(h) * w, 0.0);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      double acc = 0.0;
      for (int dy = -radius; dy <= radius; ++dy)
        for (int dx = -radius; dx <= radius; ++dx) {
          const int yy = std::clamp(y + dy, 0, h - 1);
          const int xx = std::clamp(x + dx, 0, w - 1);
          acc += k[static_cast<size_t>(dy + radius) * size + (dx + radius)] *
                 src[static_cast<size_t>(yy) * w + xx];
        }
      dst[static_cast<size_t>(y) * w + x] = acc;
    }
}

double frobenius_sq(const std::vector<double>& a, const std::vector<double>& b, int batch) {
  double acc = 0.0;
  for (size_t i = 0; i < a.size(); ++i) acc += (a[i] - b[i]) * (a[i] - b[i]);
  return acc / batch;
}

double l1_mean(const std::vector<double>& a, const std::vector<double>& b) {
  double acc = 0.0;
  for (size_t i = 0; i < a.size(); ++i) acc += std::fabs(a[i] - b[i]);
  return acc / static_cast<double>(a.size());
}

double nme(const std::vector<double>& pred_xy, const std::vector<double>& gt_xy,
           const std::vector<bool>& visible, double normalizer) {
  double acc = 0.0;
  int count = 0;
  for (size_t i = 0; i < visible.size(); ++i) {
    if (!visible[i]) continue;
    const double dx = pred_xy[2 * i] - gt_xy[2 * i];
    const double dy = pred_xy[2 * i + 1] - gt_xy[2 * i + 1];
    acc += std::sqrt(dx * dx + dy * dy);
    ++count;
  }
  return acc / count / normalizer;
}

double ced_at(const std::vector<double>& errors, double threshold) {
  size_t count = 0;
  for (double e : errors)
    if (e <= threshold) ++count;
  return static_cast<double>(count) / static_cast<double>(errors.size());
}

double auc_brute(const std::vector<double>& errors, double threshold, int steps) {
  double acc = 0.0;
  for (int i = 0; i < steps; ++i) {
    const double e = (i + 0.5) * threshold / steps;
    acc += ced_at(errors, e);
  }
  return acc / steps;
}

}  // namespace san::ref
