#pragma once

#include <cstdint>
#include <vector>

#include "san/tensor.hpp"

namespace san {

struct OptimConfig {
  enum class Kind { SgdMomentum, Adam };
  Kind kind = Kind::Adam;
  double lr = 1e-3;
  double momentum = 0.9;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.0;  // decoupled

  static OptimConfig sgd(double lr, double momentum = 0.9, double weight_decay = 0.0) {
    return {Kind::SgdMomentum, lr, momentum, 0.9, 0.999, 1e-8, weight_decay};
  }
  static OptimConfig adam(double lr, double weight_decay = 0.0) {
    return {Kind::Adam, lr, 0.9, 0.9, 0.999, 1e-8, weight_decay};
  }
};

// SGD-with-momentum / Adam with decoupled weight decay. Parameters are
// updated in place; gradients are zeroed only by the explicit zero_grad call.
template <typename T>
class OptimizerT {
 public:
  OptimizerT(std::vector<TensorT<T>> params, OptimConfig cfg);

  void step();
  void zero_grad();
  void set_lr(double lr) { cfg_.lr = lr; }
  double lr() const { return cfg_.lr; }
  int64_t step_count() const { return steps_; }

 private:
  std::vector<TensorT<T>> params_;
  std::vector<std::vector<T>> m_;  // momentum / first moment
  std::vector<std::vector<T>> v_;  // second moment (adam)
  OptimConfig cfg_;
  int64_t steps_ = 0;
};

using Optimizer = OptimizerT<float>;

}  // namespace san
