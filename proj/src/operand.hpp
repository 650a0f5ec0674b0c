#pragma once

// Internal helpers shared by the compatibility checker and the product
// construction: an operand is either one unit or a bundle of sibling units
// standing for their product.

#include <cstddef>
#include <functional>
#include <utility>
#include <vector>

#include "pcq/circuit.hpp"

namespace pcq::detail {

using Operand = std::vector<UnitId>;
using OperandPair = std::pair<Operand, Operand>;

struct OperandPairHash {
  std::size_t operator()(const OperandPair &k) const {
    std::size_t h = 0x9e3779b97f4a7c15ULL;
    auto mix = [&h](std::size_t v) { h ^= v + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2); };
    for (UnitId u : k.first) mix(u);
    mix(0xffffffffULL);
    for (UnitId u : k.second) mix(u);
    return h;
  }
};

inline ScopeSet operand_scope(const Circuit &c, const Operand &op) {
  ScopeSet s;
  for (UnitId u : op) s |= c.unit(u).scope;
  return s;
}

inline bool is_single(const Operand &op, const Circuit &c, UnitKind kind) {
  return op.size() == 1 && c.unit(op[0]).kind == kind;
}

// Children of a product-like operand: the bundle itself, or the children of a
// single product unit.
inline std::vector<UnitId> product_children(const Circuit &c, const Operand &op) {
  if (op.size() > 1) return op;
  return c.unit(op[0]).children;
}

}  // namespace pcq::detail
