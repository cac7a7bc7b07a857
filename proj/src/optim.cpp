#include "san/optim.hpp"

#include <cmath>

namespace san {

template <typename T>
OptimizerT<T>::OptimizerT(std::vector<TensorT<T>> params, OptimConfig cfg)
    : params_(std::move(params)), cfg_(cfg) {
  m_.resize(params_.size());
  v_.resize(params_.size());
  for (size_t i = 0; i < params_.size(); ++i) {
    m_[i].assign(static_cast<size_t>(params_[i].numel()), T(0));
    if (cfg_.kind == OptimConfig::Kind::Adam)
      v_[i].assign(static_cast<size_t>(params_[i].numel()), T(0));
  }
}

template <typename T>
void OptimizerT<T>::step() {
  ++steps_;
  const T lr = static_cast<T>(cfg_.lr);
  const T wd = static_cast<T>(cfg_.weight_decay);
  for (size_t pi = 0; pi < params_.size(); ++pi) {
    auto& p = params_[pi];
    check(p.has_grad(), "optimizer_step: parameter " + std::to_string(pi) +
                            " has no gradient; run backward first");
    auto vals = p.mutable_data();
    auto grads = p.grad();
    if (cfg_.kind == OptimConfig::Kind::SgdMomentum) {
      const T mu = static_cast<T>(cfg_.momentum);
      auto& m = m_[pi];
      for (size_t i = 0; i < vals.size(); ++i) {
        m[i] = mu * m[i] + grads[i];
        vals[i] -= lr * m[i];
        if (wd != T(0)) vals[i] -= lr * wd * vals[i];
      }
    } else {
      const T b1 = static_cast<T>(cfg_.beta1);
      const T b2 = static_cast<T>(cfg_.beta2);
      const T eps = static_cast<T>(cfg_.eps);
      const T bc1 = T(1) - static_cast<T>(std::pow(cfg_.beta1, static_cast<double>(steps_)));
      const T bc2 = T(1) - static_cast<T>(std::pow(cfg_.beta2, static_cast<double>(steps_)));
      auto& m = m_[pi];
      auto& v = v_[pi];
      for (size_t i = 0; i < vals.size(); ++i) {
        m[i] = b1 * m[i] + (T(1) - b1) * grads[i];
        v[i] = b2 * v[i] + (T(1) - b2) * grads[i] * grads[i];
        const T mhat = m[i] / bc1;
        const T vhat = v[i] / bc2;
        vals[i] -= lr * mhat / (std::sqrt(vhat) + eps);
        if (wd != T(0)) vals[i] -= lr * wd * vals[i];
      }
    }
  }
}

template <typename T>
void OptimizerT<T>::zero_grad() {
  for (auto& p : params_) p.zero_grad();
}

template class OptimizerT<float>;
template class OptimizerT<double>;

}  // namespace san
