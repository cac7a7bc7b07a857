// Benchmark of the parallel kernels against the serial reference
// implementations. Reports per-kernel timings, speedup and the max absolute
// difference between the two paths.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <functional>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "san/ops.hpp"
#include "san/ref.hpp"
#include "san/rng.hpp"

using namespace san;

namespace {

using Clock = std::chrono::steady_clock;

double time_ms(const std::function<void()>& fn, int reps) {
  fn();  // warm up
  const auto t0 = Clock::now();
  for (int i = 0; i < reps; ++i) fn();
  const auto t1 = Clock::now();
  return std::chrono::duration<double, std::milli>(t1 - t0).count() / reps;
}

std::vector<double> random_vec(size_t n, Rng& rng) {
  std::vector<double> v(n);
  for (auto& x : v) x = rng.uniform(-1.0, 1.0);
  return v;
}

double max_abs_diff(const std::vector<double>& a, const std::vector<double>& b) {
  double m = 0.0;
  for (size_t i = 0; i < a.size(); ++i) m = std::max(m, std::fabs(a[i] - b[i]));
  return m;
}

void report(const char* name, double serial_ms, double parallel_ms, double diff) {
  std::printf("%-28s %10.2f ms %10.2f ms %8.2fx %12.3g\n", name, serial_ms, parallel_ms,
              serial_ms / parallel_ms, diff);
}

}  // namespace

int main(int argc, char** argv) {
  int reps = 5;
  for (int i = 1; i < argc; ++i) {
    if (std::strcmp(argv[i], "--reps") == 0 && i + 1 < argc) reps = std::atoi(argv[++i]);
  }
#ifdef _OPENMP
  std::printf("threads: %d\n", omp_get_max_threads());
#else
  std::printf("threads: 1 (OpenMP disabled)\n");
#endif
  std::printf("%-28s %13s %13s %9s %12s\n", "kernel", "serial", "parallel", "speedup",
              "max|diff|");

  Rng rng(7);

  {  // conv2d forward, detector-sized
    const int n = 8, cin = 16, h = 64, w = 64, cout = 32, k = 3;
    auto x = random_vec(static_cast<size_t>(n) * cin * h * w, rng);
    auto wt = random_vec(static_cast<size_t>(cout) * cin * k * k, rng);
    auto b = random_vec(cout, rng);
    std::vector<double> y_ref, y_par(static_cast<size_t>(n) * cout * h * w);
    const double t_ref = time_ms([&] { ref::conv2d(x, wt, b, y_ref, n, cin, h, w, cout, k, k, 1, 1); },
                                 reps);
    const double t_par = time_ms(
        [&] {
          kern::conv2d_forward(x.data(), wt.data(), b.data(), y_par.data(), n, cin, h, w, cout,
                               k, k, 1, 1, h, w);
        },
        reps);
    report("conv2d fwd 8x16x64x64", t_ref, t_par, max_abs_diff(y_ref, y_par));
  }

  {  // conv2d backward
    const int n = 8, cin = 16, h = 64, w = 64, cout = 32, k = 3;
    auto x = random_vec(static_cast<size_t>(n) * cin * h * w, rng);
    auto wt = random_vec(static_cast<size_t>(cout) * cin * k * k, rng);
    auto gy = random_vec(static_cast<size_t>(n) * cout * h * w, rng);
    std::vector<double> gx(x.size()), gw(wt.size()), gb(cout);
    const double t_par = time_ms(
        [&] {
          std::fill(gx.begin(), gx.end(), 0.0);
          std::fill(gw.begin(), gw.end(), 0.0);
          std::fill(gb.begin(), gb.end(), 0.0);
          kern::conv2d_backward(x.data(), wt.data(), gy.data(), gx.data(), gw.data(), gb.data(),
                                n, cin, h, w, cout, k, k, 1, 1, h, w);
        },
        reps);
    // serial reference: gradient via two explicit naive convolutions
    std::vector<double> gx_ref(x.size(), 0.0), gw_ref(wt.size(), 0.0);
    const double t_ref = time_ms(
        [&] {
          std::fill(gx_ref.begin(), gx_ref.end(), 0.0);
          std::fill(gw_ref.begin(), gw_ref.end(), 0.0);
          for (int ni = 0; ni < n; ++ni)
            for (int co = 0; co < cout; ++co)
              for (int r = 0; r < h; ++r)
                for (int c = 0; c < w; ++c) {
                  const double g = gy[((static_cast<size_t>(ni) * cout + co) * h + r) * w + c];
                  for (int ci = 0; ci < cin; ++ci)
                    for (int fr = 0; fr < k; ++fr)
                      for (int fc = 0; fc < k; ++fc) {
                        const int ih = r + fr - 1, iw = c + fc - 1;
                        if (ih < 0 || ih >= h || iw < 0 || iw >= w) continue;
                        const size_t xi = ((static_cast<size_t>(ni) * cin + ci) * h + ih) * w + iw;
                        const size_t wi = ((static_cast<size_t>(co) * cin + ci) * k + fr) * k + fc;
                        gx_ref[xi] += wt[wi] * g;
                        gw_ref[wi] += x[xi] * g;
                      }
                }
        },
        reps);
    const double diff = std::max(max_abs_diff(gx, gx_ref), max_abs_diff(gw, gw_ref));
    report("conv2d bwd 8x16x64x64", t_ref, t_par, diff);
  }

  {  // bicubic upsample
    const int h = 64, w = 64, oh = 512, ow = 512;
    auto src = random_vec(static_cast<size_t>(h) * w, rng);
    std::vector<double> ref_dst, par_dst(static_cast<size_t>(oh) * ow);
    const double t_ref = time_ms([&] { ref::bicubic_resize(src, h, w, ref_dst, oh, ow); }, reps);
    const double t_par = time_ms(
        [&] { kern::bicubic_rect(src.data(), h, w, 0.0, 0.0, w, h, par_dst.data(), oh, ow); },
        reps);
    report("bicubic 64->512", t_ref, t_par, max_abs_diff(ref_dst, par_dst));
  }

  {  // max pool
    const int n = 8, c = 32, h = 64, w = 64;
    auto x = random_vec(static_cast<size_t>(n) * c * h * w, rng);
    std::vector<double> y_ref;
    Tensor xt = Tensor::zeros({n, c, h, w});
    for (size_t i = 0; i < x.size(); ++i) xt.mutable_data()[i] = static_cast<float>(x[i]);
    Tensor yt;
    const double t_ref = time_ms([&] { ref::max_pool2(x, y_ref, n, c, h, w); }, reps);
    const double t_par = time_ms([&] { yt = max_pool2(xt); }, reps);
    double diff = 0.0;
    for (size_t i = 0; i < y_ref.size(); ++i)
      diff = std::max(diff, std::fabs(y_ref[i] - static_cast<double>(yt.data()[i])));
    report("max_pool2 8x32x64x64", t_ref, t_par, diff);
  }

  return 0;
}
