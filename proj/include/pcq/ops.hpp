#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <vector>

#include "pcq/circuit.hpp"
#include "pcq/core.hpp"

namespace pcq {

struct OpStats {
  std::size_t units = 0;
  std::size_t edges = 0;
  std::size_t cache_hits = 0;
};

struct OpResult {
  Circuit circuit;
  PropertyFlags flags;  // same as circuit.flags()
  OpStats stats;
};

struct MultiplyOptions {
  // When positive and the operands cannot be aligned, the operand with fewer
  // induced terms (at most this many) is expanded into a mixture of fully
  // factorized products and the product is retried.
  uint64_t expansion_budget = 0;
};

// theta1 * p + theta2 * q over the joint domain.
OpResult sum_circuits(const Circuit &p, const Circuit &q, double theta1, double theta2);

OpResult multiply(const Circuit &p, const Circuit &q, const MultiplyOptions &options = {});

// Child pairing of two product units; throws RearrangementFailure when
// overlapping scopes cannot be aligned.
std::vector<ChildPair> sort_pairs_by_scope(const Circuit &p, UnitId p_product, const Circuit &q, UnitId q_product,
                                           const ScopeSet &shared);

OpResult natural_power(const Circuit &p, uint32_t n);
OpResult restricted_power(const Circuit &p, double alpha);
OpResult quotient(const Circuit &p, const Circuit &q);
OpResult log_circuit(const Circuit &p);

// exp(theta0 + sum_i theta_i * x_i), x_i the 0-based value index.
OpResult exp_linear(const std::vector<Variable> &variables, double theta0, const std::map<uint32_t, double> &theta);

// Constant c over every joint state of `vars`.
Circuit uniform_circuit(const std::vector<Variable> &vars, double c);

// Number of induced terms, saturating at the uint64_t maximum.
uint64_t induced_term_count(const Circuit &c);

// Mixture of fully factorized products, one per induced term.
Circuit expand_to_factorized(const Circuit &c, uint64_t budget);

}  // namespace pcq
