#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "pcq/scope.hpp"

namespace pcq {

using UnitId = uint32_t;

struct Variable {
  uint32_t id = 0;           // positive
  uint32_t cardinality = 2;  // |val(X)| >= 2

  bool operator==(const Variable &) const = default;
};

// Univariate function over a finite domain. `support` is authoritative for the
// support of the unit; `values` drive evaluation. Off-support entries are 0.
struct InputTable {
  std::vector<double> values;
  std::vector<uint8_t> support;

  // Support defaults to the nonzero entries.
  static InputTable from_values(std::vector<double> values);
  static InputTable ones(uint32_t cardinality);
  static InputTable zeros(uint32_t cardinality);
  static InputTable indicator(uint32_t cardinality, uint32_t value);

  bool any_support() const;
  double total() const;

  bool operator==(const InputTable &) const = default;
};

enum class UnitKind : uint8_t { kInput, kSum, kProduct };

// Labels the children of a sum unit with the child of a deterministic sum
// `origin` (in the circuit identified by `lineage`) whose support contains
// theirs. Two sums carrying the same (lineage, origin) pair can be multiplied
// by skipping child pairs with different branch labels.
struct SupportGroup {
  uint64_t lineage = 0;
  UnitId origin = 0;
  std::vector<uint32_t> branch;

  bool operator==(const SupportGroup &) const = default;
};

struct Unit {
  UnitKind kind = UnitKind::kInput;
  uint32_t var = 0;  // input units; 0 marks a constant unit with empty scope
  InputTable table;
  std::vector<UnitId> children;
  std::vector<double> weights;  // sum units, parallel to children
  ScopeSet scope;
  std::optional<SupportGroup> group;

  bool is_input() const { return kind == UnitKind::kInput; }
  bool is_sum() const { return kind == UnitKind::kSum; }
  bool is_product() const { return kind == UnitKind::kProduct; }
  bool is_constant() const { return kind == UnitKind::kInput && var == 0; }
};

enum class Status : uint8_t { kUnknown, kFalse, kDeclared, kVerified };

inline bool holds(Status s) { return s == Status::kDeclared || s == Status::kVerified; }
const char *to_string(Status s);

enum class Property : uint8_t { kSmooth, kDecomposable, kStructured, kDeterministic };
const char *to_string(Property p);

struct PropertyFlags {
  Status smooth = Status::kUnknown;
  Status decomposable = Status::kUnknown;
  Status structured = Status::kUnknown;
  Status deterministic = Status::kUnknown;
  Status omni = Status::kUnknown;  // omni-compatible
  std::optional<std::string> compat_class;

  Status get(Property p) const;
  void set(Property p, Status s);

  bool operator==(const PropertyFlags &) const = default;
};

enum class Mode : uint8_t { kGeneral, kPc };

// Immutable DAG of input, sum and product units. Units are stored in
// topological order (children before parents) and all are reachable from the
// output. Build instances with CircuitBuilder.
class Circuit {
 public:
  const std::vector<Variable> &variables() const { return variables_; }
  const std::vector<Unit> &units() const { return units_; }
  const Unit &unit(UnitId id) const { return units_[id]; }
  UnitId output() const { return output_; }
  const Unit &root() const { return units_[output_]; }
  const PropertyFlags &flags() const { return flags_; }
  Mode mode() const { return mode_; }

  // The variables the function is defined over (the variable table).
  const ScopeSet &domain() const { return domain_; }
  // 0 when `var` is not in the variable table.
  uint32_t cardinality(uint32_t var) const;

  std::size_t unit_count() const { return units_.size(); }
  // Circuit size |c|.
  std::size_t edge_count() const;

  // Number of joint states of the domain, saturating at UINT64_MAX.
  uint64_t state_count() const;

  // Canonical zero circuit: a single input unit with an all-false mask.
  bool is_zero() const;

  Circuit with_flags(PropertyFlags flags) const;

 private:
  friend class CircuitBuilder;

  std::vector<Variable> variables_;
  std::vector<uint32_t> card_by_id_;
  ScopeSet domain_;
  std::vector<Unit> units_;
  UnitId output_ = 0;
  PropertyFlags flags_;
  Mode mode_ = Mode::kGeneral;
};

// Appends units bottom-up. Children must already exist; sum children with
// weight exactly 0 are pruned.
class CircuitBuilder {
 public:
  explicit CircuitBuilder(std::vector<Variable> variables);

  const std::vector<Variable> &variables() const { return variables_; }
  uint32_t cardinality(uint32_t var) const;

  UnitId add_input(uint32_t var, InputTable table);
  UnitId add_constant(double value);
  // nullopt when every child was pruned.
  std::optional<UnitId> add_sum(std::vector<UnitId> children, std::vector<double> weights,
                                std::optional<SupportGroup> group = std::nullopt);
  // A single child is returned as-is instead of wrapping it.
  UnitId add_product(std::vector<UnitId> children);

  const Unit &unit(UnitId id) const { return units_[id]; }
  std::size_t size() const { return units_.size(); }

  // Keeps only units reachable from `output`, preserving their order.
  Circuit build(UnitId output, PropertyFlags flags = {}) const;

 private:
  std::vector<Variable> variables_;
  std::vector<uint32_t> card_by_id_;
  std::vector<Unit> units_;
};

// Union of two variable tables; throws InvalidArgument on conflicting
// cardinalities.
std::vector<Variable> merge_variables(const std::vector<Variable> &a, const std::vector<Variable> &b);

Circuit zero_circuit(const std::vector<Variable> &variables);

uint64_t next_lineage();

// Full assignment indexed by variable id (entry 0 unused).
using Assignment = std::vector<uint32_t>;
// Partial assignment var id -> value.
using Evidence = std::map<uint32_t, uint32_t>;

}  // namespace pcq
