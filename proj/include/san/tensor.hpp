#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "san/common.hpp"

namespace san {

template <typename T>
class TapeT;

namespace detail {

template <typename T>
struct TensorImpl {
  std::vector<int> shape;
  std::vector<T> values;
  std::vector<T> grad;  // empty until first backward touches it
  bool requires_grad = false;
};

inline int64_t shape_numel(const std::vector<int>& shape) {
  int64_t n = 1;
  for (int d : shape) n *= d;
  return n;
}

std::string shape_str(const std::vector<int>& shape);

}  // namespace detail

// N-dimensional float array. Cheap handle with shared storage; values are
// treated as immutable once the tensor has entered an op, grad buffers are
// the exception (optimizers mutate parameter values in place between tapes).
template <typename T>
class TensorT {
 public:
  using Impl = detail::TensorImpl<T>;

  TensorT() = default;

  static TensorT zeros(std::vector<int> shape) { return full(std::move(shape), T(0)); }

  static TensorT full(std::vector<int> shape, T value) {
    TensorT t;
    t.p_ = std::make_shared<Impl>();
    int64_t n = detail::shape_numel(shape);
    check(n >= 0, "tensor shape must be non-negative");
    t.p_->shape = std::move(shape);
    t.p_->values.assign(static_cast<size_t>(n), value);
    return t;
  }

  static TensorT from_values(std::vector<int> shape, std::vector<T> values) {
    check(detail::shape_numel(shape) == static_cast<int64_t>(values.size()),
          "tensor data length does not match shape " + detail::shape_str(shape));
    TensorT t;
    t.p_ = std::make_shared<Impl>();
    t.p_->shape = std::move(shape);
    t.p_->values = std::move(values);
    return t;
  }

  static TensorT scalar(T value) { return from_values({1}, {value}); }

  bool defined() const { return static_cast<bool>(p_); }
  const std::vector<int>& shape() const { return p_->shape; }
  int ndim() const { return static_cast<int>(p_->shape.size()); }
  int dim(int i) const { return p_->shape[static_cast<size_t>(i)]; }
  int64_t numel() const { return static_cast<int64_t>(p_->values.size()); }
  std::string shape_str() const { return detail::shape_str(p_->shape); }

  std::span<const T> data() const { return {p_->values.data(), p_->values.size()}; }
  std::span<T> mutable_data() { return {p_->values.data(), p_->values.size()}; }

  T item() const {
    check(numel() == 1, "item() requires a scalar tensor, got " + shape_str());
    return p_->values[0];
  }

  bool requires_grad() const { return p_ && p_->requires_grad; }
  TensorT& set_requires_grad(bool v) {
    p_->requires_grad = v;
    return *this;
  }

  bool has_grad() const { return p_ && !p_->grad.empty(); }
  std::span<const T> grad() const {
    check(has_grad(), "tensor has no gradient");
    return {p_->grad.data(), p_->grad.size()};
  }
  std::span<T> mutable_grad() {
    check(has_grad(), "tensor has no gradient");
    return {p_->grad.data(), p_->grad.size()};
  }
  void ensure_grad() {
    if (p_->grad.empty()) p_->grad.assign(p_->values.size(), T(0));
  }
  void zero_grad() {
    if (!p_->grad.empty()) p_->grad.assign(p_->values.size(), T(0));
  }

  bool all_finite() const {
    for (T v : p_->values)
      if (!std::isfinite(static_cast<double>(v))) return false;
    return true;
  }

  TensorT clone() const {
    TensorT t;
    t.p_ = std::make_shared<Impl>();
    t.p_->shape = p_->shape;
    t.p_->values = p_->values;
    return t;
  }

  // Same values, no grad flag, not linked to any tape.
  TensorT detach() const {
    TensorT t;
    t.p_ = std::make_shared<Impl>();
    t.p_->shape = p_->shape;
    t.p_->values = p_->values;
    return t;
  }

  Impl* impl() const { return p_.get(); }
  const std::shared_ptr<Impl>& handle() const { return p_; }

 private:
  std::shared_ptr<Impl> p_;
};

// Reverse-mode tape. Records op nodes in execution order (each node's inputs
// precede it); one backward pass walks the nodes exactly once in reverse.
// Gradient propagation uses per-invocation scratch buffers, then adds the
// result into persistent grad buffers, so running backward twice without
// zeroing yields exactly doubled gradients.
template <typename T>
class TapeT {
 public:
  using Scratch = std::vector<std::vector<T>>;
  using BackwardFn = std::function<void(Scratch&)>;

  // Returns the tape id for t, assigning one if needed.
  int64_t track(const TensorT<T>& t) {
    auto* impl = t.impl();
    auto it = ids_.find(impl);
    if (it != ids_.end()) return it->second;
    int64_t id = static_cast<int64_t>(slots_.size());
    slots_.push_back(Slot{t.handle()});
    ids_.emplace(impl, id);
    return id;
  }

  // Id for an op input: tracked tensors keep their id, untracked tensors are
  // registered only if they want gradients; plain constants stay off-tape.
  int64_t input_id(const TensorT<T>& t) {
    auto it = ids_.find(t.impl());
    if (it != ids_.end()) return it->second;
    if (t.requires_grad()) return track(t);
    return -1;
  }

  bool tracks(const TensorT<T>& t) const { return ids_.count(t.impl()) > 0; }

  void record(std::vector<int64_t> inputs, int64_t output, BackwardFn fn) {
    nodes_.push_back(Node{std::move(inputs), output, std::move(fn)});
  }

  size_t num_nodes() const { return nodes_.size(); }
  size_t num_values() const { return slots_.size(); }

  // Accumulates d loss / d t into the grad buffer of every live tensor on
  // this tape with requires_grad set.
  void backward(const TensorT<T>& loss) {
    check(loss.defined() && loss.numel() == 1, "backward requires a scalar loss");
    auto it = ids_.find(loss.impl());
    check(it != ids_.end(), "loss tensor is not recorded on this tape");
    Scratch g(slots_.size());
    g[static_cast<size_t>(it->second)].assign(1, T(1));
    for (auto n = nodes_.rbegin(); n != nodes_.rend(); ++n) {
      if (n->out < 0 || g[static_cast<size_t>(n->out)].empty()) continue;
      n->fn(g);
    }
    for (size_t id = 0; id < slots_.size(); ++id) {
      if (g[id].empty()) continue;
      auto& h = slots_[id].handle;
      if (!h || !h->requires_grad) continue;
      if (h->grad.empty()) h->grad.assign(h->values.size(), T(0));
      for (size_t i = 0; i < g[id].size(); ++i) h->grad[i] += g[id][i];
    }
  }

 private:
  struct Slot {
    std::shared_ptr<detail::TensorImpl<T>> handle;
  };
  struct Node {
    std::vector<int64_t> in;
    int64_t out;
    BackwardFn fn;
  };
  std::vector<Slot> slots_;
  std::vector<Node> nodes_;
  std::unordered_map<const detail::TensorImpl<T>*, int64_t> ids_;
};

using Tensor = TensorT<float>;
using Tape = TapeT<float>;
using DTensor = TensorT<double>;
using DTape = TapeT<double>;

template <typename To, typename From>
TensorT<To> convert(const TensorT<From>& t) {
  std::vector<To> v(t.data().begin(), t.data().end());
  return TensorT<To>::from_values(t.shape(), std::move(v));
}

}  // namespace san
