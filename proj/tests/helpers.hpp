#pragma once

#include <cmath>
#include <vector>

#include "pcq/circuit.hpp"
#include "pcq/compile.hpp"
#include "pcq/core.hpp"
#include "pcq/oracle.hpp"

namespace pcq::test {

inline bool close(double a, double b, double rel, double abs_floor = 1e-12) {
  return std::abs(a - b) <= std::max(abs_floor, rel * std::max(std::abs(a), std::abs(b)));
}

// Single input unit over X<var> with the given table.
inline Circuit table_circuit(uint32_t var, std::vector<double> values, PropertyFlags flags = {}) {
  CircuitBuilder b({{var, static_cast<uint32_t>(values.size())}});
  const UnitId u = b.add_input(var, InputTable::from_values(std::move(values)));
  if (flags == PropertyFlags{}) {
    flags.smooth = flags.decomposable = flags.structured = flags.deterministic = Status::kVerified;
  }
  return b.build(u, flags);
}

inline Circuit bernoulli(double theta, uint32_t var = 1) { return table_circuit(var, {1.0 - theta, theta}); }

inline bool tables_close(const DenseTable &a, const DenseTable &b, double rel) {
  if (a.values.size() != b.values.size()) return false;
  for (std::size_t i = 0; i < a.values.size(); ++i)
    if (!close(a.values[i], b.values[i], rel)) return false;
  return true;
}

inline RandomOptions family(uint32_t nvars, bool sd, bool det, bool norm = true) {
  RandomOptions o;
  o.nvars = nvars;
  o.structured = sd;
  o.deterministic = det;
  o.normalized = norm;
  return o;
}

// Two circuits over one shared vtree.
inline std::pair<Circuit, Circuit> compatible_pair(uint64_t seed, uint32_t nvars, bool det, bool norm = true) {
  Rng rng(seed * 7919 + 13);
  std::vector<uint32_t> ids;
  for (uint32_t i = 1; i <= nvars; ++i) ids.push_back(i);
  RandomOptions o = family(nvars, true, det, norm);
  o.vtree = random_vtree(rng, ids);
  return {random_circuit(seed * 2 + 1, o), random_circuit(seed * 2 + 2, o)};
}

}  // namespace pcq::test
