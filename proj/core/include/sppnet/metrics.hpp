#pragma once

#include <cstdint>

#include "sppnet/grid.hpp"

namespace sppnet {

struct OverlapCounts {
  std::int64_t intersection = 0;
  std::int64_t pred = 0;
  std::int64_t target = 0;

  std::int64_t union_size() const { return pred + target - intersection; }
};

/// Pixel counts of two same-shape masks (nonzero = foreground).
OverlapCounts overlap(const BinaryMask& pred, const BinaryMask& target);

/// |P n G| / |P u G|; 1 when both masks are empty.
double iou(const BinaryMask& pred, const BinaryMask& target);
/// 2 |P n G| / (|P| + |G|); 1 when both masks are empty.
double dsc(const BinaryMask& pred, const BinaryMask& target);

}  // namespace sppnet
