#include "sppnet/metrics.hpp"

#include <string>

namespace sppnet {

OverlapCounts overlap(const BinaryMask& pred, const BinaryMask& target) {
  if (pred.height() != target.height() || pred.width() != target.width()) {
    throw ShapeError("mask shapes differ: " + std::to_string(pred.height()) + "x" + std::to_string(pred.width()) +
                     " vs " + std::to_string(target.height()) + "x" + std::to_string(target.width()));
  }
  OverlapCounts c;
  auto p = pred.values();
  auto g = target.values();
  for (std::size_t i = 0; i < p.size(); ++i) {
    const bool a = p[i] != 0;
    const bool b = g[i] != 0;
    c.pred += a;
    c.target += b;
    c.intersection += a && b;
  }
  return c;
}

double iou(const BinaryMask& pred, const BinaryMask& target) {
  const OverlapCounts c = overlap(pred, target);
  const std::int64_t u = c.union_size();
  return u == 0 ? 1.0 : static_cast<double>(c.intersection) / static_cast<double>(u);
}

double dsc(const BinaryMask& pred, const BinaryMask& target) {
  const OverlapCounts c = overlap(pred, target);
  const std::int64_t denom = c.pred + c.target;
  return denom == 0 ? 1.0 : 2.0 * static_cast<double>(c.intersection) / static_cast<double>(denom);
}

}  // namespace sppnet
