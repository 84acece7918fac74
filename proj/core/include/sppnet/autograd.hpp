#pragma once

#include <functional>
#include <memory>
#include <vector>

#include "sppnet/tensor.hpp"

namespace sppnet {

namespace detail {

struct Node {
  Tensor value;
  Tensor grad;
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node>> parents;
  std::function<void(const Tensor&)> backward;

  Tensor& grad_buffer() {
    if (grad.shape() != value.shape()) grad = Tensor(value.shape(), 0.0);
    return grad;
  }
};

}  // namespace detail

/// Whether operations record a backward graph on the current thread.
class GradMode {
 public:
  static bool enabled();
  static void set_enabled(bool enabled);
};

/// Disables graph recording for its lifetime (inference, finite differences).
class NoGradGuard {
 public:
  NoGradGuard() : previous_(GradMode::enabled()) { GradMode::set_enabled(false); }
  ~NoGradGuard() { GradMode::set_enabled(previous_); }
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

/// Handle to a node of the reverse-mode graph. Copies share the node.
class Var {
 public:
  Var() = default;
  explicit Var(Tensor value, bool requires_grad = false);

  bool defined() const { return node_ != nullptr; }
  const Tensor& value() const { return node_->value; }
  /// Direct write access for optimizers and checkpoint loading.
  Tensor& mutable_value() { return node_->value; }
  const Shape& shape() const { return node_->value.shape(); }
  int dim(int i) const { return node_->value.dim(i); }
  bool requires_grad() const { return node_ && node_->requires_grad; }

  /// Accumulated gradient; zeros if nothing has been accumulated.
  const Tensor& grad() const { return node_->grad_buffer(); }
  Tensor& mutable_grad() { return node_->grad_buffer(); }
  void zero_grad();

  /// Reverse sweep from this scalar node.
  void backward() const;

  detail::Node* node() const { return node_.get(); }

  using BackwardFn = std::function<void(const Tensor&)>;

  /// Creates an op result. When grad mode is off or no parent requires a
  /// gradient the result is a constant and `backward_fn` is dropped.
  static Var from_op(Tensor value, const std::vector<Var>& parents, BackwardFn backward_fn);

 private:
  std::shared_ptr<detail::Node> node_;
};

/// Adds `g` into the gradient buffer of `node` when it participates in the graph.
void accumulate_grad(detail::Node* node, const Tensor& g);

}  // namespace sppnet
