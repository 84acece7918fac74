#include "sppnet/autograd.hpp"

#include <unordered_set>

#include "sppnet/errors.hpp"

namespace sppnet {

namespace {
thread_local bool grad_enabled = true;
}

bool GradMode::enabled() { return grad_enabled; }
void GradMode::set_enabled(bool enabled) { grad_enabled = enabled; }

Var::Var(Tensor value, bool requires_grad) : node_(std::make_shared<detail::Node>()) {
  node_->value = std::move(value);
  node_->requires_grad = requires_grad;
}

void Var::zero_grad() {
  if (node_) node_->grad = Tensor();
}

Var Var::from_op(Tensor value, const std::vector<Var>& parents, BackwardFn backward_fn) {
  Var out(std::move(value), false);
  if (!GradMode::enabled()) return out;
  bool any = false;
  for (const Var& p : parents) any = any || p.requires_grad();
  if (!any) return out;
  out.node_->requires_grad = true;
  out.node_->parents.reserve(parents.size());
  for (const Var& p : parents) {
    if (p.requires_grad()) out.node_->parents.push_back(p.node_);
  }
  out.node_->backward = std::move(backward_fn);
  return out;
}

void accumulate_grad(detail::Node* node, const Tensor& g) {
  if (node == nullptr || !node->requires_grad) return;
  node->grad_buffer() += g;
}

void Var::backward() const {
  if (!node_) throw Error("backward on an undefined variable");
  if (node_->value.size() != 1) {
    throw ShapeError("backward requires a scalar, got shape " + shape_to_string(node_->value.shape()));
  }
  if (!node_->requires_grad) return;

  // Iterative post-order DFS gives a topological order.
  std::vector<detail::Node*> order;
  std::unordered_set<detail::Node*> visited;
  std::vector<std::pair<detail::Node*, std::size_t>> stack;
  stack.emplace_back(node_.get(), 0);
  visited.insert(node_.get());
  while (!stack.empty()) {
    auto& [n, next] = stack.back();
    if (next < n->parents.size()) {
      detail::Node* p = n->parents[next++].get();
      if (p->requires_grad && visited.insert(p).second) stack.emplace_back(p, 0);
    } else {
      order.push_back(n);
      stack.pop_back();
    }
  }

  node_->grad_buffer().fill(1.0);
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    detail::Node* n = *it;
    if (n->backward && n->grad.shape() == n->value.shape()) n->backward(n->grad);
  }
  // Interior gradients are not needed after the sweep.
  for (detail::Node* n : order) {
    if (n->backward) n->grad = Tensor();
  }
}

}  // namespace sppnet
