#pragma once

#include <cstdint>
#include <vector>

// Naive single-threaded reference implementations. These stay independent of
// the main kernels on purpose: tests compare the two, and the bench tool
// reports the speedup of the parallel path over this baseline.
namespace san::ref {

// Plain quadruple-loop cross-correlation.
void conv2d(const std::vector<double>& x, const std::vector<double>& w,
            const std::vector<double>& b, std::vector<double>& y, int n, int cin, int h, int wd,
            int cout, int kh, int kw, int stride, int pad);

// Sliding-window 2x2 max.
void max_pool2(const std::vector<double>& x, std::vector<double>& y, int n, int c, int h, int w);

// Direct per-pixel 16-tap Catmull-Rom sum over one plane.
void bicubic_resize(const std::vector<double>& src, int src_h, int src_w,
                    std::vector<double>& dst, int out_h, int out_w);

// Full 2-D (non-separable) Gaussian convolution of one plane, edge clamped,
// kernel radius ceil(3*sigma), normalized to sum 1.
void gaussian_blur(const std::vector<double>& src, int h, int w, double sigma,
                   std::vector<double>& dst);

double frobenius_sq(const std::vector<double>& a, const std::vector<double>& b, int batch);

double l1_mean(const std::vector<double>& a, const std::vector<double>& b);

// Mean-over-points Euclidean error / normalizer.
double nme(const std::vector<double>& pred_xy, const std::vector<double>& gt_xy,
           const std::vector<bool>& visible, double normalizer);

// Fraction of errors <= threshold, by counting.
double ced_at(const std::vector<double>& errors, double threshold);

// Riemann integral of the empirical CED over [0, threshold] divided by
// threshold, on a fine fixed grid.
double auc_brute(const std::vector<double>& errors, double threshold, int steps = 200000);

}  // namespace san::ref
