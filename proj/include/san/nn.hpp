#pragma once

#include <string>
#include <utility>
#include <vector>

#include "san/ops.hpp"
#include "san/rng.hpp"
#include "san/tensor.hpp"

namespace san {

template <typename T>
struct ConvLayer {
  TensorT<T> w, b;
  int stride = 1, pad = 1;

  TensorT<T> operator()(const TensorT<T>& x, TapeT<T>* tape) const {
    return conv2d(x, w, b, stride, pad, tape);
  }
};

template <typename T>
struct NormLayer {
  TensorT<T> gamma, beta;

  TensorT<T> operator()(const TensorT<T>& x, TapeT<T>* tape) const {
    return instance_norm(x, gamma, beta, tape);
  }
};

template <typename T>
struct LinearLayer {
  TensorT<T> w, b;

  TensorT<T> operator()(const TensorT<T>& x, TapeT<T>* tape) const {
    return linear(x, w, b, tape);
  }
};

namespace nn {

template <typename T>
TensorT<T> gaussian_tensor(Rng& rng, std::vector<int> shape, double stddev) {
  TensorT<T> t = TensorT<T>::zeros(std::move(shape));
  for (auto& v : t.mutable_data()) v = static_cast<T>(rng.normal(0.0, stddev));
  return t;
}

// Fan-in-scaled Gaussian init for feature-extractor convs.
template <typename T>
ConvLayer<T> conv_he(Rng& rng, int cin, int cout, int k, int stride, int pad) {
  const double stddev = std::sqrt(2.0 / (static_cast<double>(cin) * k * k));
  return {gaussian_tensor<T>(rng, {cout, cin, k, k}, stddev), TensorT<T>::zeros({cout}), stride,
          pad};
}

// Gaussian(0, 0.01 variance) init for prediction heads.
template <typename T>
ConvLayer<T> conv_head(Rng& rng, int cin, int cout, int k, int stride, int pad) {
  return {gaussian_tensor<T>(rng, {cout, cin, k, k}, 0.1), TensorT<T>::zeros({cout}), stride,
          pad};
}

template <typename T>
NormLayer<T> norm(int channels) {
  return {TensorT<T>::full({channels}, T(1)), TensorT<T>::zeros({channels})};
}

template <typename T>
LinearLayer<T> linear_head(Rng& rng, int in, int out) {
  return {gaussian_tensor<T>(rng, {out, in}, 0.1), TensorT<T>::zeros({out})};
}

template <typename T>
using ParamList = std::vector<std::pair<std::string, TensorT<T>*>>;

template <typename T>
void collect(ParamList<T>& out, const std::string& prefix, ConvLayer<T>& c) {
  out.emplace_back(prefix + ".w", &c.w);
  out.emplace_back(prefix + ".b", &c.b);
}

template <typename T>
void collect(ParamList<T>& out, const std::string& prefix, NormLayer<T>& n) {
  out.emplace_back(prefix + ".gamma", &n.gamma);
  out.emplace_back(prefix + ".beta", &n.beta);
}

template <typename T>
void collect(ParamList<T>& out, const std::string& prefix, LinearLayer<T>& l) {
  out.emplace_back(prefix + ".w", &l.w);
  out.emplace_back(prefix + ".b", &l.b);
}

template <typename T>
std::vector<TensorT<T>> tensors_of(const ParamList<T>& params) {
  std::vector<TensorT<T>> out;
  for (auto& [name, t] : params) {
    t->set_requires_grad(true);
    out.push_back(*t);
  }
  return out;
}

}  // namespace nn

}  // namespace san
