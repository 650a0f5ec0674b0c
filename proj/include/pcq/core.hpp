#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "pcq/circuit.hpp"

namespace pcq {

inline constexpr uint64_t kDefaultBudget = uint64_t{1} << 22;

// Process-wide enumeration budget used as the default by checks and tables.
uint64_t enumeration_budget();
void set_enumeration_budget(uint64_t budget);

// Feedforward evaluation. `x` is indexed by variable id and must assign every
// variable of the domain.
double evaluate(const Circuit &c, std::span<const uint32_t> x);
double evaluate(const Circuit &c, const Evidence &x);

// Integral over the domain variables not fixed by `evidence`, in one pass.
double integrate(const Circuit &c, const Evidence &evidence = {});

// Circuit over domain \ drop computing the integral over `drop`.
Circuit marginalize(const Circuit &c, const ScopeSet &drop);

struct PropertyCheck {
  Status status = Status::kUnknown;
  std::optional<UnitId> unit;  // failing unit
  std::string witness;         // offending assignment or scope pair

  bool ok() const { return holds(status); }
};

PropertyCheck check_property(const Circuit &c, Property which, uint64_t budget = enumeration_budget());

// Checks every property the flags claim (or all four when `all`) and returns
// the circuit with verified/false statuses filled in. Determinism over budget
// keeps its declared status.
Circuit verify_flags(const Circuit &c, bool all = true, uint64_t budget = enumeration_budget());

enum class Compatibility : uint8_t { kCompatible, kIncompatible, kUnknown };
const char *to_string(Compatibility c);

struct CompatibilityResult {
  Compatibility verdict = Compatibility::kUnknown;
  // Product units of p and q whose children were matched by scope.
  std::vector<std::pair<UnitId, UnitId>> matched;
  std::string witness;
};

CompatibilityResult check_compatible(const Circuit &p, const Circuit &q);

// Pads deficient sum children with all-ones inputs over the missing variables.
Circuit smooth_transform(const Circuit &c);

// 0/1 indicator of supp(c): same DAG, unit weights, masks as tables.
Circuit support_circuit(const Circuit &c);

// Attaches fresh support-group labels to every sum unit of a deterministic
// circuit. Returns `c` unchanged when it already carries labels.
Circuit with_support_groups(const Circuit &c);

// Per-unit structural support test: false when the unit is identically zero.
std::vector<uint8_t> nonempty_support(const Circuit &c);

// Precondition helpers. Flags that are declared or verified are trusted;
// unknown flags are checked. On failure they throw PropertyViolation carrying
// `citation`.
void require_smooth_decomposable(const Circuit &c, const std::string &citation);
void require_deterministic(const Circuit &c, const std::string &citation, uint64_t budget = enumeration_budget());
void require_structured(const Circuit &c, const std::string &citation);
void require_pc(const Circuit &c, const std::string &what);

// Child pairing for two product-like operands (sortPairsByScope). Each side
// of a pair lists one unit, several units forming a bundle (their product),
// or nothing when the other side's child has no shared variables and no
// partner left.
struct ChildPair {
  std::vector<UnitId> left;
  std::vector<UnitId> right;
};

enum class PairingStatus : uint8_t { kOk, kIncompatible, kUnknown };

struct Pairing {
  PairingStatus status = PairingStatus::kOk;
  std::vector<ChildPair> pairs;
  std::string witness;
};

Pairing pair_children(const Circuit &p, std::span<const UnitId> p_children, const Circuit &q,
                      std::span<const UnitId> q_children, const ScopeSet &shared);

}  // namespace pcq
