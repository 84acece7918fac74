#include "sppnet/parameters.hpp"

#include <cmath>

#include "sppnet/errors.hpp"

namespace sppnet {

Var ParameterSet::add(std::string name, Tensor init) {
  if (contains(name)) throw ConfigError("duplicate parameter name '" + name + "'");
  Var v(std::move(init), true);
  entries_.push_back({std::move(name), v});
  return v;
}

const Var& ParameterSet::get(std::string_view name) const {
  for (const auto& e : entries_)
    if (e.name == name) return e.var;
  throw ConfigError("no parameter named '" + std::string(name) + "'");
}

bool ParameterSet::contains(std::string_view name) const {
  for (const auto& e : entries_)
    if (e.name == name) return true;
  return false;
}

std::int64_t ParameterSet::scalar_count(std::string_view prefix) const {
  std::int64_t n = 0;
  for (const auto& e : entries_)
    if (e.name.starts_with(prefix)) n += static_cast<std::int64_t>(e.var.value().size());
  return n;
}

void ParameterSet::zero_grad() {
  for (auto& e : entries_) e.var.zero_grad();
}

std::vector<Tensor> ParameterSet::snapshot() const {
  std::vector<Tensor> out;
  out.reserve(entries_.size());
  for (const auto& e : entries_) out.push_back(e.var.value());
  return out;
}

void ParameterSet::restore(const std::vector<Tensor>& values) {
  if (values.size() != entries_.size()) throw ShapeError("parameter snapshot has the wrong number of tensors");
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (values[i].shape() != entries_[i].var.shape()) {
      throw ShapeError("parameter snapshot shape mismatch for '" + entries_[i].name + "'");
    }
    entries_[i].var.mutable_value() = values[i];
  }
}

Tensor Initializer::fan_in_uniform(Shape shape, int fan_in) {
  return uniform(std::move(shape), 1.0 / std::sqrt(static_cast<double>(fan_in)));
}

Tensor Initializer::uniform(Shape shape, double bound) {
  Tensor t(std::move(shape));
  std::uniform_real_distribution<double> dist(-bound, bound);
  for (double& v : t.data()) v = dist(rng_);
  return t;
}

Tensor Initializer::normal(Shape shape, double stddev) {
  Tensor t(std::move(shape));
  std::normal_distribution<double> dist(0.0, stddev);
  for (double& v : t.data()) v = dist(rng_);
  return t;
}

}  // namespace sppnet
