#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "sppnet/autograd.hpp"
#include "sppnet/random.hpp"

namespace sppnet {

struct NamedParameter {
  std::string name;
  Var var;
};

/// Ordered, named collection of learnable tensors. Layers keep handles to
/// the same nodes, so updates through the set are seen by the model.
class ParameterSet {
 public:
  Var add(std::string name, Tensor init);

  const std::vector<NamedParameter>& entries() const { return entries_; }
  std::size_t size() const { return entries_.size(); }
  const Var& get(std::string_view name) const;
  bool contains(std::string_view name) const;

  /// Learnable scalars, optionally restricted to names starting with `prefix`.
  std::int64_t scalar_count(std::string_view prefix = {}) const;

  void zero_grad();
  std::vector<Tensor> snapshot() const;
  void restore(const std::vector<Tensor>& values);

 private:
  std::vector<NamedParameter> entries_;
};

/// Deterministic parameter initialization.
class Initializer {
 public:
  explicit Initializer(std::uint64_t seed) : rng_(seed) {}

  /// U(-1/sqrt(fan_in), 1/sqrt(fan_in)).
  Tensor fan_in_uniform(Shape shape, int fan_in);
  Tensor uniform(Shape shape, double bound);
  Tensor normal(Shape shape, double stddev);

 private:
  Rng rng_;
};

}  // namespace sppnet
