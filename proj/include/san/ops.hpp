#pragma once

#include <vector>

#include "san/tensor.hpp"

namespace san {

// Differentiable ops. Every op validates shapes, computes the forward value,
// and records a backward rule when a tape is supplied and some input wants
// gradients. Convolution is cross-correlation (no kernel flip).
//
// All kernels are deterministic regardless of thread count: each output
// element is written by exactly one loop iteration and inner accumulations
// run in a fixed serial order.

template <typename T>
TensorT<T> conv2d(const TensorT<T>& input, const TensorT<T>& weight, const TensorT<T>& bias,
                  int stride, int pad, TapeT<T>* tape = nullptr);

template <typename T>
TensorT<T> max_pool2(const TensorT<T>& input, TapeT<T>* tape = nullptr);

template <typename T>
TensorT<T> relu(const TensorT<T>& input, TapeT<T>* tape = nullptr);

template <typename T>
TensorT<T> leaky_relu(const TensorT<T>& input, T negative_slope, TapeT<T>* tape = nullptr);

template <typename T>
TensorT<T> tanh(const TensorT<T>& input, TapeT<T>* tape = nullptr);

template <typename T>
TensorT<T> concat_channels(const std::vector<TensorT<T>>& inputs, TapeT<T>* tape = nullptr);

template <typename T>
TensorT<T> upsample_nearest2(const TensorT<T>& input, TapeT<T>* tape = nullptr);

// [N,C,H,W] -> [N,C]
template <typename T>
TensorT<T> global_avg_pool(const TensorT<T>& input, TapeT<T>* tape = nullptr);

// x: [N,F], w: [O,F], b: [O] -> [N,O]
template <typename T>
TensorT<T> linear(const TensorT<T>& x, const TensorT<T>& w, const TensorT<T>& b,
                  TapeT<T>* tape = nullptr);

// Per-sample per-channel normalization over spatial dims with affine params
// gamma, beta of shape [C].
template <typename T>
TensorT<T> instance_norm(const TensorT<T>& x, const TensorT<T>& gamma, const TensorT<T>& beta,
                         TapeT<T>* tape = nullptr);

template <typename T>
TensorT<T> add(const TensorT<T>& a, const TensorT<T>& b, TapeT<T>* tape = nullptr);

// out = mul * x + shift, elementwise
template <typename T>
TensorT<T> scale_shift(const TensorT<T>& x, T mul, T shift, TapeT<T>* tape = nullptr);

template <typename T>
TensorT<T> sum(const TensorT<T>& x, TapeT<T>* tape = nullptr);

// Sum of squared elementwise differences divided by batch size N
// (N = dim 0 for 4-D tensors, otherwise 1).
template <typename T>
TensorT<T> frobenius_sq_loss(const TensorT<T>& pred, const TensorT<T>& target,
                             TapeT<T>* tape = nullptr);

// Mean absolute difference over all elements.
template <typename T>
TensorT<T> l1_loss(const TensorT<T>& a, const TensorT<T>& b, TapeT<T>* tape = nullptr);

// Mean squared difference to a constant target, for least-squares adversarial
// objectives.
template <typename T>
TensorT<T> mse_to_const(const TensorT<T>& x, T target, TapeT<T>* tape = nullptr);

// logits: [N,C]; labels in [0,C). Mean over batch of -log softmax[label].
template <typename T>
TensorT<T> softmax_cross_entropy(const TensorT<T>& logits, const std::vector<int>& labels,
                                 TapeT<T>* tape = nullptr);

// Catmull-Rom bicubic (a = -0.5), half-pixel centers, edge clamp. Inference
// only: never recorded on a tape.
template <typename T>
TensorT<T> bicubic_resize(const TensorT<T>& input, int out_h, int out_w);

namespace kern {

// Resamples an axis-aligned source rectangle [x1,x2)x[y1,y2) of a single
// plane to out_w x out_h with the Catmull-Rom bicubic kernel. Plain resize is
// the full-image rectangle.
template <typename T>
void bicubic_rect(const T* src, int src_h, int src_w, double x1, double y1, double x2, double y2,
                  T* dst, int out_h, int out_w);

template <typename T>
void conv2d_forward(const T* x, const T* w, const T* b, T* y, int n, int cin, int h, int wd,
                    int cout, int kh, int kw, int stride, int pad, int oh, int ow);

template <typename T>
void conv2d_backward(const T* x, const T* w, const T* gy, T* gx, T* gw, T* gb, int n, int cin,
                     int h, int wd, int cout, int kh, int kw, int stride, int pad, int oh, int ow);

}  // namespace kern

}  // namespace san
