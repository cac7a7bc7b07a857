#include "san/ops.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

namespace san {

namespace {

int ceil_div(int a, int b) { return a >= 0 ? (a + b - 1) / b : -((-a) / b); }
int floor_div(int a, int b) { return a >= 0 ? a / b : -((-a + b - 1) / b); }

void check_4d(const std::vector<int>& s, const char* what) {
  check(s.size() == 4, std::string(what) + " must be 4-D [N,C,H,W], got " + detail::shape_str(s));
}

}  // namespace

namespace kern {

template <typename T>
void conv2d_forward(const T* x, const T* w, const T* b, T* y, int n, int cin, int h, int wd,
                    int cout, int kh, int kw, int stride, int pad, int oh, int ow) {
#pragma omp parallel for collapse(2) schedule(static)
  for (int ni = 0; ni < n; ++ni) {
    for (int co = 0; co < cout; ++co) {
      for (int r = 0; r < oh; ++r) {
        T* yrow = y + ((static_cast<int64_t>(ni) * cout + co) * oh + r) * ow;
        const T bias = b ? b[co] : T(0);
        for (int c = 0; c < ow; ++c) yrow[c] = bias;
        const int ih0 = r * stride - pad;
        for (int ci = 0; ci < cin; ++ci) {
          for (int fr = 0; fr < kh; ++fr) {
            const int ih = ih0 + fr;
            if (ih < 0 || ih >= h) continue;
            const T* xrow = x + ((static_cast<int64_t>(ni) * cin + ci) * h + ih) * wd;
            const T* wrow = w + ((static_cast<int64_t>(co) * cin + ci) * kh + fr) * kw;
            for (int fc = 0; fc < kw; ++fc) {
              const T wv = wrow[fc];
              const int off = fc - pad;
              const int lo = std::max(0, ceil_div(-off, stride));
              const int hi = std::min(ow, floor_div(wd - 1 - off, stride) + 1);
              if (stride == 1) {
                const T* xp = xrow + off;
                for (int c = lo; c < hi; ++c) yrow[c] += wv * xp[c];
              } else {
                for (int c = lo; c < hi; ++c) yrow[c] += wv * xrow[c * stride + off];
              }
            }
          }
        }
      }
    }
  }
}

template <typename T>
void conv2d_backward(const T* x, const T* w, const T* gy, T* gx, T* gw, T* gb, int n, int cin,
                     int h, int wd, int cout, int kh, int kw, int stride, int pad, int oh,
                     int ow) {
  if (gb) {
#pragma omp parallel for schedule(static)
    for (int co = 0; co < cout; ++co) {
      T acc = 0;
      for (int ni = 0; ni < n; ++ni) {
        const T* gyp = gy + (static_cast<int64_t>(ni) * cout + co) * oh * ow;
        for (int i = 0; i < oh * ow; ++i) acc += gyp[i];
      }
      gb[co] += acc;
    }
  }
  if (gw) {
    // rows stream once per output channel; the per-tap partial sums land in
    // the thread-owned gw slice, so accumulation order is fixed
#pragma omp parallel for schedule(static)
    for (int co = 0; co < cout; ++co) {
      T* gw_co = gw + static_cast<int64_t>(co) * cin * kh * kw;
      for (int ni = 0; ni < n; ++ni) {
        for (int r = 0; r < oh; ++r) {
          const T* gyrow = gy + ((static_cast<int64_t>(ni) * cout + co) * oh + r) * ow;
          const int ih0 = r * stride - pad;
          for (int ci = 0; ci < cin; ++ci) {
            for (int fr = 0; fr < kh; ++fr) {
              const int ih = ih0 + fr;
              if (ih < 0 || ih >= h) continue;
              const T* xrow = x + ((static_cast<int64_t>(ni) * cin + ci) * h + ih) * wd;
              T* gw_row = gw_co + (static_cast<int64_t>(ci) * kh + fr) * kw;
              for (int fc = 0; fc < kw; ++fc) {
                const int off = fc - pad;
                const int lo = std::max(0, ceil_div(-off, stride));
                const int hi = std::min(ow, floor_div(wd - 1 - off, stride) + 1);
                T acc = 0;
                if (stride == 1) {
                  const T* xp = xrow + off;
                  for (int c = lo; c < hi; ++c) acc += gyrow[c] * xp[c];
                } else {
                  for (int c = lo; c < hi; ++c) acc += gyrow[c] * xrow[c * stride + off];
                }
                gw_row[fc] += acc;
              }
            }
          }
        }
      }
    }
  }
  if (gx) {
    // gather form: each gx row is owned by one iteration and stays hot while
    // the gy rows stream past
#pragma omp parallel for collapse(2) schedule(static)
    for (int ni = 0; ni < n; ++ni) {
      for (int ci = 0; ci < cin; ++ci) {
        T* gxp = gx + (static_cast<int64_t>(ni) * cin + ci) * h * wd;
        for (int ih = 0; ih < h; ++ih) {
          T* gxrow = gxp + static_cast<int64_t>(ih) * wd;
          for (int fr = 0; fr < kh; ++fr) {
            // r * stride = ih + pad - fr
            const int num = ih + pad - fr;
            if (num < 0 || num % stride != 0) continue;
            const int r = num / stride;
            if (r >= oh) continue;
            for (int co = 0; co < cout; ++co) {
              const T* gyrow = gy + ((static_cast<int64_t>(ni) * cout + co) * oh + r) * ow;
              const T* wrow = w + ((static_cast<int64_t>(co) * cin + ci) * kh + fr) * kw;
              for (int fc = 0; fc < kw; ++fc) {
                const T wv = wrow[fc];
                const int off = fc - pad;
                const int lo = std::max(0, ceil_div(-off, stride));
                const int hi = std::min(ow, floor_div(wd - 1 - off, stride) + 1);
                if (stride == 1) {
                  T* gp = gxrow + off;
                  for (int c = lo; c < hi; ++c) gp[c] += wv * gyrow[c];
                } else {
                  for (int c = lo; c < hi; ++c) gxrow[c * stride + off] += wv * gyrow[c];
                }
              }
            }
          }
        }
      }
    }
  }
}

namespace {

// Catmull-Rom kernel, a = -0.5.
inline double cubic_weight(double t) {
  t = std::fabs(t);
  if (t <= 1.0) return (1.5 * t - 2.5) * t * t + 1.0;
  if (t < 2.0) return ((-0.5 * t + 2.5) * t - 4.0) * t + 2.0;
  return 0.0;
}

}  // namespace

template <typename T>
void bicubic_rect(const T* src, int src_h, int src_w, double x1, double y1, double x2, double y2,
                  T* dst, int out_h, int out_w) {
  const double sx = (x2 - x1) / out_w;
  const double sy = (y2 - y1) / out_h;
  std::vector<int> cols(static_cast<size_t>(out_w) * 4);
  std::vector<double> colw(static_cast<size_t>(out_w) * 4);
  for (int ox = 0; ox < out_w; ++ox) {
    const double srcx = x1 + (ox + 0.5) * sx - 0.5;
    const int base = static_cast<int>(std::floor(srcx));
    const double frac = srcx - base;
    for (int m = -1; m <= 2; ++m) {
      cols[ox * 4 + (m + 1)] = std::clamp(base + m, 0, src_w - 1);
      colw[ox * 4 + (m + 1)] = cubic_weight(frac - m);
    }
  }
  for (int oy = 0; oy < out_h; ++oy) {
    const double srcy = y1 + (oy + 0.5) * sy - 0.5;
    const int base = static_cast<int>(std::floor(srcy));
    const double frac = srcy - base;
    int rows[4];
    double roww[4];
    for (int m = -1; m <= 2; ++m) {
      rows[m + 1] = std::clamp(base + m, 0, src_h - 1);
      roww[m + 1] = cubic_weight(frac - m);
    }
    T* drow = dst + static_cast<int64_t>(oy) * out_w;
    for (int ox = 0; ox < out_w; ++ox) {
      double acc = 0.0;
      for (int i = 0; i < 4; ++i) {
        const T* srow = src + static_cast<int64_t>(rows[i]) * src_w;
        double racc = 0.0;
        for (int j = 0; j < 4; ++j) racc += colw[ox * 4 + j] * srow[cols[ox * 4 + j]];
        acc += roww[i] * racc;
      }
      drow[ox] = static_cast<T>(acc);
    }
  }
}

template void conv2d_forward<float>(const float*, const float*, const float*, float*, int, int,
                                    int, int, int, int, int, int, int, int, int);
template void conv2d_forward<double>(const double*, const double*, const double*, double*, int,
                                     int, int, int, int, int, int, int, int, int, int);
template void conv2d_backward<float>(const float*, const float*, const float*, float*, float*,
                                     float*, int, int, int, int, int, int, int, int, int, int,
                                     int);
template void conv2d_backward<double>(const double*, const double*, const double*, double*,
                                      double*, double*, int, int, int, int, int, int, int, int,
                                      int, int, int);
template void bicubic_rect<float>(const float*, int, int, double, double, double, double, float*,
                                  int, int);
template void bicubic_rect<double>(const double*, int, int, double, double, double, double,
                                   double*, int, int);

}  // namespace kern

// ---------------------------------------------------------------------------
// Autograd ops
// ---------------------------------------------------------------------------

template <typename T>
TensorT<T> conv2d(const TensorT<T>& input, const TensorT<T>& weight, const TensorT<T>& bias,
                  int stride, int pad, TapeT<T>* tape) {
  check_4d(input.shape(), "conv2d input");
  check_4d(weight.shape(), "conv2d weight");
  const int n = input.dim(0), cin = input.dim(1), h = input.dim(2), w = input.dim(3);
  const int cout = weight.dim(0), kh = weight.dim(2), kw = weight.dim(3);
  check(weight.dim(1) == cin, "conv2d channel mismatch: input " + input.shape_str() +
                                  " vs weight " + weight.shape_str());
  check(kh % 2 == 1 && kw % 2 == 1, "conv2d kernel dims must be odd, got " + weight.shape_str());
  check(stride >= 1, "conv2d stride must be >= 1");
  check(pad >= 0, "conv2d pad must be >= 0");
  check(bias.ndim() == 1 && bias.dim(0) == cout,
        "conv2d bias must be [Cout]=[" + std::to_string(cout) + "], got " + bias.shape_str());
  check((h + 2 * pad - kh) % stride == 0 && (w + 2 * pad - kw) % stride == 0,
        "conv2d output size is not exact for input " + input.shape_str() + ", kernel " +
            weight.shape_str() + ", stride " + std::to_string(stride) + ", pad " +
            std::to_string(pad));
  const int oh = (h + 2 * pad - kh) / stride + 1;
  const int ow = (w + 2 * pad - kw) / stride + 1;
  check(oh >= 1 && ow >= 1, "conv2d output would be empty");

  TensorT<T> out = TensorT<T>::zeros({n, cout, oh, ow});
  kern::conv2d_forward(input.data().data(), weight.data().data(), bias.data().data(),
                       out.mutable_data().data(), n, cin, h, w, cout, kh, kw, stride, pad, oh, ow);

  if (tape && (input.requires_grad() || weight.requires_grad() || bias.requires_grad())) {
    out.set_requires_grad(true);
    const int64_t xi = tape->input_id(input), wi = tape->input_id(weight),
                  bi = tape->input_id(bias), yi = tape->track(out);
    auto xh = input, wh = weight;
    tape->record({xi, wi, bi}, yi, [=](typename TapeT<T>::Scratch& g) {
      const auto& gy = g[yi];
      T *gx = nullptr, *gw = nullptr, *gb = nullptr;
      if (xi >= 0) {
        if (g[xi].empty()) g[xi].assign(xh.numel(), T(0));
        gx = g[xi].data();
      }
      if (wi >= 0) {
        if (g[wi].empty()) g[wi].assign(wh.numel(), T(0));
        gw = g[wi].data();
      }
      if (bi >= 0) {
        if (g[bi].empty()) g[bi].assign(cout, T(0));
        gb = g[bi].data();
      }
      kern::conv2d_backward(xh.data().data(), wh.data().data(), gy.data(), gx, gw, gb, n, cin, h,
                            w, cout, kh, kw, stride, pad, oh, ow);
    });
  }
  return out;
}

template <typename T>
TensorT<T> max_pool2(const TensorT<T>& input, TapeT<T>* tape) {
  check_4d(input.shape(), "max_pool2 input");
  const int n = input.dim(0), c = input.dim(1), h = input.dim(2), w = input.dim(3);
  check(h % 2 == 0 && w % 2 == 0,
        "max_pool2 requires even spatial dims, got " + input.shape_str());
  const int oh = h / 2, ow = w / 2;
  TensorT<T> out = TensorT<T>::zeros({n, c, oh, ow});
  auto argmax = std::make_shared<std::vector<int64_t>>(static_cast<size_t>(out.numel()));
  const T* x = input.data().data();
  T* y = out.mutable_data().data();
  int64_t* am = argmax->data();
#pragma omp parallel for collapse(2) schedule(static)
  for (int ni = 0; ni < n; ++ni) {
    for (int ci = 0; ci < c; ++ci) {
      const int64_t pbase = (static_cast<int64_t>(ni) * c + ci) * h * w;
      const int64_t obase = (static_cast<int64_t>(ni) * c + ci) * oh * ow;
      for (int r = 0; r < oh; ++r) {
        for (int col = 0; col < ow; ++col) {
          // first strictly-greater wins, so ties go to the earliest cell in
          // row-major order
          int64_t best = pbase + static_cast<int64_t>(2 * r) * w + 2 * col;
          T bv = x[best];
          const int64_t cand[3] = {best + 1, best + w, best + w + 1};
          for (int64_t idx : cand) {
            if (x[idx] > bv) {
              bv = x[idx];
              best = idx;
            }
          }
          y[obase + static_cast<int64_t>(r) * ow + col] = bv;
          am[obase + static_cast<int64_t>(r) * ow + col] = best;
        }
      }
    }
  }
  if (tape && input.requires_grad()) {
    out.set_requires_grad(true);
    const int64_t xi = tape->track(input), yi = tape->track(out);
    const int64_t xn = input.numel(), yn = out.numel();
    tape->record({xi}, yi, [=](typename TapeT<T>::Scratch& g) {
      const auto& gy = g[yi];
      if (g[xi].empty()) g[xi].assign(xn, T(0));
      auto& gx = g[xi];
      const int64_t* a = argmax->data();
      for (int64_t i = 0; i < yn; ++i) gx[a[i]] += gy[i];
    });
  }
  return out;
}

namespace {

template <typename T, typename Fwd, typename Bwd>
TensorT<T> elementwise_op(const TensorT<T>& input, TapeT<T>* tape, Fwd fwd, Bwd bwd) {
  TensorT<T> out = TensorT<T>::zeros(input.shape());
  const T* x = input.data().data();
  T* y = out.mutable_data().data();
  const int64_t len = input.numel();
#pragma omp parallel for schedule(static) if (len > 16384)
  for (int64_t i = 0; i < len; ++i) y[i] = fwd(x[i]);
  if (tape && input.requires_grad()) {
    out.set_requires_grad(true);
    const int64_t xi = tape->track(input), yi = tape->track(out);
    auto xh = input, yh = out;
    tape->record({xi}, yi, [=](typename TapeT<T>::Scratch& g) {
      const auto& gy = g[yi];
      if (g[xi].empty()) g[xi].assign(len, T(0));
      auto& gx = g[xi];
      const T* xv = xh.data().data();
      const T* yv = yh.data().data();
      for (int64_t i = 0; i < len; ++i) gx[i] += bwd(xv[i], yv[i]) * gy[i];
    });
  }
  return out;
}

}  // namespace

template <typename T>
TensorT<T> relu(const TensorT<T>& input, TapeT<T>* tape) {
  return elementwise_op(
      input, tape, [](T v) { return v > T(0) ? v : T(0); },
      [](T x, T) { return x > T(0) ? T(1) : T(0); });
}

template <typename T>
TensorT<T> leaky_relu(const TensorT<T>& input, T slope, TapeT<T>* tape) {
  return elementwise_op(
      input, tape, [slope](T v) { return v > T(0) ? v : slope * v; },
      [slope](T x, T) { return x > T(0) ? T(1) : slope; });
}

template <typename T>
TensorT<T> tanh(const TensorT<T>& input, TapeT<T>* tape) {
  return elementwise_op(
      input, tape, [](T v) { return std::tanh(v); }, [](T, T y) { return T(1) - y * y; });
}

template <typename T>
TensorT<T> scale_shift(const TensorT<T>& input, T mul, T shift, TapeT<T>* tape) {
  return elementwise_op(
      input, tape, [mul, shift](T v) { return mul * v + shift; },
      [mul](T, T) { return mul; });
}

template <typename T>
TensorT<T> concat_channels(const std::vector<TensorT<T>>& inputs, TapeT<T>* tape) {
  check(!inputs.empty(), "concat_channels requires at least one input");
  for (const auto& t : inputs) check_4d(t.shape(), "concat_channels input");
  const int n = inputs[0].dim(0), h = inputs[0].dim(2), w = inputs[0].dim(3);
  int ctot = 0;
  for (const auto& t : inputs) {
    check(t.dim(0) == n && t.dim(2) == h && t.dim(3) == w,
          "concat_channels spatial/batch mismatch: " + inputs[0].shape_str() + " vs " +
              t.shape_str());
    ctot += t.dim(1);
  }
  TensorT<T> out = TensorT<T>::zeros({n, ctot, h, w});
  T* y = out.mutable_data().data();
  const int64_t plane = static_cast<int64_t>(h) * w;
  int coff = 0;
  for (const auto& t : inputs) {
    const int ci = t.dim(1);
    const T* x = t.data().data();
    for (int ni = 0; ni < n; ++ni) {
      std::memcpy(y + ((static_cast<int64_t>(ni) * ctot + coff) * plane),
                  x + (static_cast<int64_t>(ni) * ci * plane),
                  sizeof(T) * static_cast<size_t>(ci) * plane);
    }
    coff += ci;
  }
  bool any_grad = false;
  for (const auto& t : inputs) any_grad = any_grad || t.requires_grad();
  if (tape && any_grad) {
    out.set_requires_grad(true);
    std::vector<int64_t> ids;
    std::vector<int> chans;
    std::vector<int64_t> numels;
    for (const auto& t : inputs) {
      ids.push_back(tape->input_id(t));
      chans.push_back(t.dim(1));
      numels.push_back(t.numel());
    }
    const int64_t yi = tape->track(out);
    tape->record(ids, yi, [=](typename TapeT<T>::Scratch& g) {
      const auto& gy = g[yi];
      int off = 0;
      for (size_t k = 0; k < ids.size(); ++k) {
        const int ci = chans[k];
        if (ids[k] >= 0) {
          if (g[ids[k]].empty()) g[ids[k]].assign(numels[k], T(0));
          auto& gx = g[ids[k]];
          for (int ni = 0; ni < n; ++ni) {
            const T* src = gy.data() + ((static_cast<int64_t>(ni) * ctot + off) * plane);
            T* dst = gx.data() + (static_cast<int64_t>(ni) * ci * plane);
            for (int64_t i = 0; i < ci * plane; ++i) dst[i] += src[i];
          }
        }
        off += ci;
      }
    });
  }
  return out;
}

template <typename T>
TensorT<T> upsample_nearest2(const TensorT<T>& input, TapeT<T>* tape) {
  check_4d(input.shape(), "upsample_nearest2 input");
  const int n = input.dim(0), c = input.dim(1), h = input.dim(2), w = input.dim(3);
  TensorT<T> out = TensorT<T>::zeros({n, c, 2 * h, 2 * w});
  const T* x = input.data().data();
  T* y = out.mutable_data().data();
  const int64_t planes = static_cast<int64_t>(n) * c;
#pragma omp parallel for schedule(static)
  for (int64_t p = 0; p < planes; ++p) {
    const T* xp = x + p * h * w;
    T* yp = y + p * 4 * h * w;
    for (int r = 0; r < h; ++r) {
      for (int col = 0; col < w; ++col) {
        const T v = xp[static_cast<int64_t>(r) * w + col];
        T* d = yp + (static_cast<int64_t>(2 * r) * 2 * w + 2 * col);
        d[0] = v;
        d[1] = v;
        d[2 * w] = v;
        d[2 * w + 1] = v;
      }
    }
  }
  if (tape && input.requires_grad()) {
    out.set_requires_grad(true);
    const int64_t xi = tape->track(input), yi = tape->track(out);
    const int64_t xn = input.numel();
    tape->record({xi}, yi, [=](typename TapeT<T>::Scratch& g) {
      const auto& gy = g[yi];
      if (g[xi].empty()) g[xi].assign(xn, T(0));
      auto& gx = g[xi];
      for (int64_t p = 0; p < planes; ++p) {
        const T* gyp = gy.data() + p * 4 * h * w;
        T* gxp = gx.data() + p * h * w;
        for (int r = 0; r < h; ++r) {
          for (int col = 0; col < w; ++col) {
            const T* s = gyp + (static_cast<int64_t>(2 * r) * 2 * w + 2 * col);
            gxp[static_cast<int64_t>(r) * w + col] += s[0] + s[1] + s[2 * w] + s[2 * w + 1];
          }
        }
      }
    });
  }
  return out;
}

template <typename T>
TensorT<T> global_avg_pool(const TensorT<T>& input, TapeT<T>* tape) {
  check_4d(input.shape(), "global_avg_pool input");
  const int n = input.dim(0), c = input.dim(1), h = input.dim(2), w = input.dim(3);
  const int64_t plane = static_cast<int64_t>(h) * w;
  TensorT<T> out = TensorT<T>::zeros({n, c});
  const T* x = input.data().data();
  T* y = out.mutable_data().data();
  for (int64_t p = 0; p < static_cast<int64_t>(n) * c; ++p) {
    T acc = 0;
    const T* xp = x + p * plane;
    for (int64_t i = 0; i < plane; ++i) acc += xp[i];
    y[p] = acc / static_cast<T>(plane);
  }
  if (tape && input.requires_grad()) {
    out.set_requires_grad(true);
    const int64_t xi = tape->track(input), yi = tape->track(out);
    const int64_t xn = input.numel();
    tape->record({xi}, yi, [=](typename TapeT<T>::Scratch& g) {
      const auto& gy = g[yi];
      if (g[xi].empty()) g[xi].assign(xn, T(0));
      auto& gx = g[xi];
      const T inv = T(1) / static_cast<T>(plane);
      for (int64_t p = 0; p < static_cast<int64_t>(n) * c; ++p) {
        const T gv = gy[p] * inv;
        T* gxp = gx.data() + p * plane;
        for (int64_t i = 0; i < plane; ++i) gxp[i] += gv;
      }
    });
  }
  return out;
}

template <typename T>
TensorT<T> linear(const TensorT<T>& x, const TensorT<T>& w, const TensorT<T>& b, TapeT<T>* tape) {
  check(x.ndim() == 2, "linear input must be [N,F], got " + x.shape_str());
  check(w.ndim() == 2, "linear weight must be [O,F], got " + w.shape_str());
  const int n = x.dim(0), f = x.dim(1), o = w.dim(0);
  check(w.dim(1) == f,
        "linear feature mismatch: input " + x.shape_str() + " vs weight " + w.shape_str());
  check(b.ndim() == 1 && b.dim(0) == o, "linear bias must be [O], got " + b.shape_str());
  TensorT<T> out = TensorT<T>::zeros({n, o});
  const T* xv = x.data().data();
  const T* wv = w.data().data();
  const T* bv = b.data().data();
  T* y = out.mutable_data().data();
  for (int ni = 0; ni < n; ++ni) {
    for (int oi = 0; oi < o; ++oi) {
      T acc = bv[oi];
      const T* xr = xv + static_cast<int64_t>(ni) * f;
      const T* wr = wv + static_cast<int64_t>(oi) * f;
      for (int fi = 0; fi < f; ++fi) acc += xr[fi] * wr[fi];
      y[static_cast<int64_t>(ni) * o + oi] = acc;
    }
  }
  if (tape && (x.requires_grad() || w.requires_grad() || b.requires_grad())) {
    out.set_requires_grad(true);
    const int64_t xi = tape->input_id(x), wi = tape->input_id(w), bi = tape->input_id(b),
                  yi = tape->track(out);
    auto xh = x, wh = w;
    tape->record({xi, wi, bi}, yi, [=](typename TapeT<T>::Scratch& g) {
      const auto& gy = g[yi];
      const T* xp = xh.data().data();
      const T* wp = wh.data().data();
      if (xi >= 0) {
        if (g[xi].empty()) g[xi].assign(static_cast<int64_t>(n) * f, T(0));
        auto& gx = g[xi];
        for (int ni = 0; ni < n; ++ni)
          for (int oi = 0; oi < o; ++oi) {
            const T gv = gy[static_cast<int64_t>(ni) * o + oi];
            const T* wr = wp + static_cast<int64_t>(oi) * f;
            T* gr = gx.data() + static_cast<int64_t>(ni) * f;
            for (int fi = 0; fi < f; ++fi) gr[fi] += gv * wr[fi];
          }
      }
      if (wi >= 0) {
        if (g[wi].empty()) g[wi].assign(static_cast<int64_t>(o) * f, T(0));
        auto& gw = g[wi];
        for (int ni = 0; ni < n; ++ni)
          for (int oi = 0; oi < o; ++oi) {
            const T gv = gy[static_cast<int64_t>(ni) * o + oi];
            const T* xr = xp + static_cast<int64_t>(ni) * f;
            T* gr = gw.data() + static_cast<int64_t>(oi) * f;
            for (int fi = 0; fi < f; ++fi) gr[fi] += gv * xr[fi];
          }
      }
      if (bi >= 0) {
        if (g[bi].empty()) g[bi].assign(o, T(0));
        auto& gb = g[bi];
        for (int ni = 0; ni < n; ++ni)
          for (int oi = 0; oi < o; ++oi) gb[oi] += gy[static_cast<int64_t>(ni) * o + oi];
      }
    });
  }
  return out;
}

template <typename T>
TensorT<T> instance_norm(const TensorT<T>& x, const TensorT<T>& gamma, const TensorT<T>& beta,
                         TapeT<T>* tape) {
  check_4d(x.shape(), "instance_norm input");
  const int n = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
  check(gamma.ndim() == 1 && gamma.dim(0) == c && beta.ndim() == 1 && beta.dim(0) == c,
        "instance_norm gamma/beta must be [C], got " + gamma.shape_str() + ", " +
            beta.shape_str());
  const int64_t plane = static_cast<int64_t>(h) * w;
  const T eps = static_cast<T>(1e-5);
  TensorT<T> out = TensorT<T>::zeros(x.shape());
  auto stats = std::make_shared<std::vector<T>>(static_cast<size_t>(n) * c * 2);  // mean, invstd
  const T* xv = x.data().data();
  const T* gv = gamma.data().data();
  const T* bv = beta.data().data();
  T* y = out.mutable_data().data();
  T* st = stats->data();
#pragma omp parallel for schedule(static)
  for (int64_t p = 0; p < static_cast<int64_t>(n) * c; ++p) {
    const T* xp = xv + p * plane;
    T mean = 0;
    for (int64_t i = 0; i < plane; ++i) mean += xp[i];
    mean /= static_cast<T>(plane);
    T var = 0;
    for (int64_t i = 0; i < plane; ++i) {
      const T d = xp[i] - mean;
      var += d * d;
    }
    var /= static_cast<T>(plane);
    const T invstd = T(1) / std::sqrt(var + eps);
    const int ci = static_cast<int>(p % c);
    T* yp = y + p * plane;
    for (int64_t i = 0; i < plane; ++i) yp[i] = gv[ci] * (xp[i] - mean) * invstd + bv[ci];
    st[p * 2] = mean;
    st[p * 2 + 1] = invstd;
  }
  if (tape && (x.requires_grad() || gamma.requires_grad() || beta.requires_grad())) {
    out.set_requires_grad(true);
    const int64_t xi = tape->input_id(x), gi = tape->input_id(gamma), bi = tape->input_id(beta),
                  yi = tape->track(out);
    auto xh = x, gh = gamma;
    tape->record({xi, gi, bi}, yi, [=](typename TapeT<T>::Scratch& g) {
      const auto& gy = g[yi];
      const T* xp = xh.data().data();
      const T* gm = gh.data().data();
      const T* s = stats->data();
      if (xi >= 0 && g[xi].empty()) g[xi].assign(xh.numel(), T(0));
      if (gi >= 0 && g[gi].empty()) g[gi].assign(c, T(0));
      if (bi >= 0 && g[bi].empty()) g[bi].assign(c, T(0));
      for (int64_t p = 0; p < static_cast<int64_t>(n) * c; ++p) {
        const int ci = static_cast<int>(p % c);
        const T mean = s[p * 2], invstd = s[p * 2 + 1];
        const T* xq = xp + p * plane;
        const T* gq = gy.data() + p * plane;
        T sum_g = 0, sum_gx = 0;
        for (int64_t i = 0; i < plane; ++i) {
          const T xhat = (xq[i] - mean) * invstd;
          sum_g += gq[i];
          sum_gx += gq[i] * xhat;
        }
        if (bi >= 0) g[bi][ci] += sum_g;
        if (gi >= 0) g[gi][ci] += sum_gx;
        if (xi >= 0) {
          T* gxp = g[xi].data() + p * plane;
          const T mg = sum_g / static_cast<T>(plane);
          const T mgx = sum_gx / static_cast<T>(plane);
          const T scale = gm[ci] * invstd;
          for (int64_t i = 0; i < plane; ++i) {
            const T xhat = (xq[i] - mean) * invstd;
            gxp[i] += scale * (gq[i] - mg - xhat * mgx);
          }
        }
      }
    });
  }
  return out;
}

template <typename T>
TensorT<T> add(const TensorT<T>& a, const TensorT<T>& b, TapeT<T>* tape) {
  check(a.shape() == b.shape(),
        "add shape mismatch: " + a.shape_str() + " vs " + b.shape_str());
  TensorT<T> out = TensorT<T>::zeros(a.shape());
  const T* av = a.data().data();
  const T* bv = b.data().data();
  T* y = out.mutable_data().data();
  const int64_t len = a.numel();
  for (int64_t i = 0; i < len; ++i) y[i] = av[i] + bv[i];
  if (tape && (a.requires_grad() || b.requires_grad())) {
    out.set_requires_grad(true);
    const int64_t ai = tape->input_id(a), bi = tape->input_id(b), yi = tape->track(out);
    tape->record({ai, bi}, yi, [=](typename TapeT<T>::Scratch& g) {
      const auto& gy = g[yi];
      for (int64_t id : {ai, bi}) {
        if (id < 0) continue;
        if (g[id].empty()) g[id].assign(len, T(0));
        auto& gx = g[id];
        for (int64_t i = 0; i < len; ++i) gx[i] += gy[i];
      }
    });
  }
  return out;
}

template <typename T>
TensorT<T> sum(const TensorT<T>& x, TapeT<T>* tape) {
  T acc = 0;
  for (T v : x.data()) acc += v;
  TensorT<T> out = TensorT<T>::scalar(acc);
  if (tape && x.requires_grad()) {
    out.set_requires_grad(true);
    const int64_t xi = tape->track(x), yi = tape->track(out);
    const int64_t len = x.numel();
    tape->record({xi}, yi, [=](typename TapeT<T>::Scratch& g) {
      const T gv = g[yi][0];
      if (g[xi].empty()) g[xi].assign(len, T(0));
      auto& gx = g[xi];
      for (int64_t i = 0; i < len; ++i) gx[i] += gv;
    });
  }
  return out;
}

template <typename T>
TensorT<T> frobenius_sq_loss(const TensorT<T>& pred, const TensorT<T>& target, TapeT<T>* tape) {
  check(pred.shape() == target.shape(),
        "frobenius_sq_loss shape mismatch: " + pred.shape_str() + " vs " + target.shape_str());
  const T n_batch = pred.ndim() == 4 ? static_cast<T>(pred.dim(0)) : T(1);
  const T* p = pred.data().data();
  const T* t = target.data().data();
  const int64_t len = pred.numel();
  T acc = 0;
  for (int64_t i = 0; i < len; ++i) {
    const T d = p[i] - t[i];
    acc += d * d;
  }
  TensorT<T> out = TensorT<T>::scalar(acc / n_batch);
  if (tape && (pred.requires_grad() || target.requires_grad())) {
    out.set_requires_grad(true);
    const int64_t pi = tape->input_id(pred), ti = tape->input_id(target), yi = tape->track(out);
    auto ph = pred, th = target;
    tape->record({pi, ti}, yi, [=](typename TapeT<T>::Scratch& g) {
      const T gv = g[yi][0] * T(2) / n_batch;
      const T* pv = ph.data().data();
      const T* tv = th.data().data();
      if (pi >= 0) {
        if (g[pi].empty()) g[pi].assign(len, T(0));
        auto& gp = g[pi];
        for (int64_t i = 0; i < len; ++i) gp[i] += gv * (pv[i] - tv[i]);
      }
      if (ti >= 0) {
        if (g[ti].empty()) g[ti].assign(len, T(0));
        auto& gt = g[ti];
        for (int64_t i = 0; i < len; ++i) gt[i] -= gv * (pv[i] - tv[i]);
      }
    });
  }
  return out;
}

template <typename T>
TensorT<T> l1_loss(const TensorT<T>& a, const TensorT<T>& b, TapeT<T>* tape) {
  check(a.shape() == b.shape(),
        "l1_loss shape mismatch: " + a.shape_str() + " vs " + b.shape_str());
  const T* av = a.data().data();
  const T* bv = b.data().data();
  const int64_t len = a.numel();
  T acc = 0;
  for (int64_t i = 0; i < len; ++i) acc += std::abs(av[i] - bv[i]);
  TensorT<T> out = TensorT<T>::scalar(acc / static_cast<T>(len));
  if (tape && (a.requires_grad() || b.requires_grad())) {
    out.set_requires_grad(true);
    const int64_t ai = tape->input_id(a), bi = tape->input_id(b), yi = tape->track(out);
    auto ah = a, bh = b;
    tape->record({ai, bi}, yi, [=](typename TapeT<T>::Scratch& g) {
      const T gv = g[yi][0] / static_cast<T>(len);
      const T* ap = ah.data().data();
      const T* bp = bh.data().data();
      if (ai >= 0 && g[ai].empty()) g[ai].assign(len, T(0));
      if (bi >= 0 && g[bi].empty()) g[bi].assign(len, T(0));
      for (int64_t i = 0; i < len; ++i) {
        const T d = ap[i] - bp[i];
        const T s = d > T(0) ? T(1) : (d < T(0) ? T(-1) : T(0));
        if (ai >= 0) g[ai][i] += gv * s;
        if (bi >= 0) g[bi][i] -= gv * s;
      }
    });
  }
  return out;
}

template <typename T>
TensorT<T> mse_to_const(const TensorT<T>& x, T target, TapeT<T>* tape) {
  const T* xv = x.data().data();
  const int64_t len = x.numel();
  T acc = 0;
  for (int64_t i = 0; i < len; ++i) {
    const T d = xv[i] - target;
    acc += d * d;
  }
  TensorT<T> out = TensorT<T>::scalar(acc / static_cast<T>(len));
  if (tape && x.requires_grad()) {
    out.set_requires_grad(true);
    const int64_t xi = tape->track(x), yi = tape->track(out);
    auto xh = x;
    tape->record({xi}, yi, [=](typename TapeT<T>::Scratch& g) {
      const T gv = g[yi][0] * T(2) / static_cast<T>(len);
      const T* xp = xh.data().data();
      if (g[xi].empty()) g[xi].assign(len, T(0));
      auto& gx = g[xi];
      for (int64_t i = 0; i < len; ++i) gx[i] += gv * (xp[i] - target);
    });
  }
  return out;
}

template <typename T>
TensorT<T> softmax_cross_entropy(const TensorT<T>& logits, const std::vector<int>& labels,
                                 TapeT<T>* tape) {
  check(logits.ndim() == 2, "softmax_cross_entropy logits must be [N,C], got " +
                                logits.shape_str());
  const int n = logits.dim(0), c = logits.dim(1);
  check(static_cast<int>(labels.size()) == n, "softmax_cross_entropy label count mismatch");
  for (int l : labels) check(l >= 0 && l < c, "softmax_cross_entropy label out of range");
  auto probs = std::make_shared<std::vector<T>>(static_cast<size_t>(n) * c);
  const T* x = logits.data().data();
  T* pr = probs->data();
  T loss = 0;
  for (int ni = 0; ni < n; ++ni) {
    const T* row = x + static_cast<int64_t>(ni) * c;
    T mx = row[0];
    for (int ci = 1; ci < c; ++ci) mx = std::max(mx, row[ci]);
    T z = 0;
    for (int ci = 0; ci < c; ++ci) z += std::exp(row[ci] - mx);
    for (int ci = 0; ci < c; ++ci) pr[static_cast<int64_t>(ni) * c + ci] =
        std::exp(row[ci] - mx) / z;
    loss -= std::log(std::max(pr[static_cast<int64_t>(ni) * c + labels[ni]],
                              static_cast<T>(1e-30)));
  }
  TensorT<T> out = TensorT<T>::scalar(loss / static_cast<T>(n));
  if (tape && logits.requires_grad()) {
    out.set_requires_grad(true);
    const int64_t xi = tape->track(logits), yi = tape->track(out);
    auto lab = labels;
    tape->record({xi}, yi, [=](typename TapeT<T>::Scratch& g) {
      const T gv = g[yi][0] / static_cast<T>(n);
      if (g[xi].empty()) g[xi].assign(static_cast<int64_t>(n) * c, T(0));
      auto& gx = g[xi];
      const T* p = probs->data();
      for (int ni = 0; ni < n; ++ni)
        for (int ci = 0; ci < c; ++ci) {
          T v = p[static_cast<int64_t>(ni) * c + ci];
          if (ci == lab[ni]) v -= T(1);
          gx[static_cast<int64_t>(ni) * c + ci] += gv * v;
        }
    });
  }
  return out;
}

template <typename T>
TensorT<T> bicubic_resize(const TensorT<T>& input, int out_h, int out_w) {
  check(input.ndim() == 3 || input.ndim() == 4,
        "bicubic_resize input must be [C,H,W] or [N,C,H,W], got " + input.shape_str());
  check(out_h >= 1 && out_w >= 1, "bicubic_resize output dims must be >= 1");
  const bool batched = input.ndim() == 4;
  const int h = input.dim(batched ? 2 : 1), w = input.dim(batched ? 3 : 2);
  std::vector<int> oshape = input.shape();
  oshape[oshape.size() - 2] = out_h;
  oshape[oshape.size() - 1] = out_w;
  TensorT<T> out = TensorT<T>::zeros(oshape);
  const int64_t planes = input.numel() / (static_cast<int64_t>(h) * w);
  const T* x = input.data().data();
  T* y = out.mutable_data().data();
#pragma omp parallel for schedule(static)
  for (int64_t p = 0; p < planes; ++p) {
    kern::bicubic_rect(x + p * h * w, h, w, 0.0, 0.0, static_cast<double>(w),
                       static_cast<double>(h), y + p * out_h * out_w, out_h, out_w);
  }
  return out;
}

#define SAN_INSTANTIATE_OPS(T)                                                                \
  template TensorT<T> conv2d<T>(const TensorT<T>&, const TensorT<T>&, const TensorT<T>&, int, \
                                int, TapeT<T>*);                                              \
  template TensorT<T> max_pool2<T>(const TensorT<T>&, TapeT<T>*);                             \
  template TensorT<T> relu<T>(const TensorT<T>&, TapeT<T>*);                                  \
  template TensorT<T> leaky_relu<T>(const TensorT<T>&, T, TapeT<T>*);                         \
  template TensorT<T> tanh<T>(const TensorT<T>&, TapeT<T>*);                                  \
  template TensorT<T> concat_channels<T>(const std::vector<TensorT<T>>&, TapeT<T>*);          \
  template TensorT<T> upsample_nearest2<T>(const TensorT<T>&, TapeT<T>*);                     \
  template TensorT<T> global_avg_pool<T>(const TensorT<T>&, TapeT<T>*);                       \
  template TensorT<T> linear<T>(const TensorT<T>&, const TensorT<T>&, const TensorT<T>&,      \
                                TapeT<T>*);                                                   \
  template TensorT<T> instance_norm<T>(const TensorT<T>&, const TensorT<T>&,                  \
                                       const TensorT<T>&, TapeT<T>*);                         \
  template TensorT<T> add<T>(const TensorT<T>&, const TensorT<T>&, TapeT<T>*);                \
  template TensorT<T> scale_shift<T>(const TensorT<T>&, T, T, TapeT<T>*);                     \
  template TensorT<T> sum<T>(const TensorT<T>&, TapeT<T>*);                                   \
  template TensorT<T> frobenius_sq_loss<T>(const TensorT<T>&, const TensorT<T>&, TapeT<T>*);  \
  template TensorT<T> l1_loss<T>(const TensorT<T>&, const TensorT<T>&, TapeT<T>*);            \
  template TensorT<T> mse_to_const<T>(const TensorT<T>&, T, TapeT<T>*);                       \
  template TensorT<T> softmax_cross_entropy<T>(const TensorT<T>&, const std::vector<int>&,    \
                                               TapeT<T>*);                                    \
  template TensorT<T> bicubic_resize<T>(const TensorT<T>&, int, int);

SAN_INSTANTIATE_OPS(float)
SAN_INSTANTIATE_OPS(double)

#undef SAN_INSTANTIATE_OPS

}  // namespace san
