#include "pcq/circuit.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>

#include "pcq/error.hpp"
#include "pcq/rules.hpp"

namespace pcq {

namespace {

std::vector<uint32_t> index_cardinalities(const std::vector<Variable> &vars) {
  std::vector<uint32_t> by_id;
  for (const Variable &v : vars) {
    if (v.id == 0) throw InvalidArgument("variable ids must be positive");
    if (v.cardinality < 2) throw InvalidArgument("variable X" + std::to_string(v.id) + " has cardinality < 2");
    if (v.id >= by_id.size()) by_id.resize(v.id + 1, 0);
    if (by_id[v.id] != 0) throw InvalidArgument("duplicate variable X" + std::to_string(v.id));
    by_id[v.id] = v.cardinality;
  }
  return by_id;
}

}  // namespace

InputTable InputTable::from_values(std::vector<double> values) {
  InputTable t;
  t.support.resize(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) t.support[i] = values[i] != 0.0 ? 1 : 0;
  t.values = std::move(values);
  return t;
}

InputTable InputTable::ones(uint32_t cardinality) {
  return {std::vector<double>(cardinality, 1.0), std::vector<uint8_t>(cardinality, 1)};
}

InputTable InputTable::zeros(uint32_t cardinality) {
  return {std::vector<double>(cardinality, 0.0), std::vector<uint8_t>(cardinality, 0)};
}

InputTable InputTable::indicator(uint32_t cardinality, uint32_t value) {
  InputTable t = zeros(cardinality);
  t.values.at(value) = 1.0;
  t.support.at(value) = 1;
  return t;
}

bool InputTable::any_support() const {
  return std::any_of(support.begin(), support.end(), [](uint8_t m) { return m != 0; });
}

double InputTable::total() const {
  double s = 0.0;
  for (double v : values) s += v;
  return s;
}

const char *to_string(Status s) {
  switch (s) {
    case Status::kUnknown:
      return "unknown";
    case Status::kFalse:
      return "false";
    case Status::kDeclared:
      return "declared";
    case Status::kVerified:
      return "verified";
  }
  return "?";
}

const char *to_string(Property p) {
  switch (p) {
    case Property::kSmooth:
      return "smooth";
    case Property::kDecomposable:
      return "decomposable";
    case Property::kStructured:
      return "structured";
    case Property::kDeterministic:
      return "deterministic";
  }
  return "?";
}

Status PropertyFlags::get(Property p) const {
  switch (p) {
    case Property::kSmooth:
      return smooth;
    case Property::kDecomposable:
      return decomposable;
    case Property::kStructured:
      return structured;
    case Property::kDeterministic:
      return deterministic;
  }
  return Status::kUnknown;
}

void PropertyFlags::set(Property p, Status s) {
  switch (p) {
    case Property::kSmooth:
      smooth = s;
      break;
    case Property::kDecomposable:
      decomposable = s;
      break;
    case Property::kStructured:
      structured = s;
      break;
    case Property::kDeterministic:
      deterministic = s;
      break;
  }
}

uint32_t Circuit::cardinality(uint32_t var) const { return var < card_by_id_.size() ? card_by_id_[var] : 0; }

std::size_t Circuit::edge_count() const {
  std::size_t n = 0;
  for (const Unit &u : units_) n += u.children.size();
  return n;
}

uint64_t Circuit::state_count() const {
  uint64_t n = 1;
  for (const Variable &v : variables_) {
    if (n > std::numeric_limits<uint64_t>::max() / v.cardinality) return std::numeric_limits<uint64_t>::max();
    n *= v.cardinality;
  }
  return n;
}

bool Circuit::is_zero() const {
  return units_.size() == 1 && units_[0].is_input() && !units_[0].table.any_support();
}

Circuit Circuit::with_flags(PropertyFlags flags) const {
  Circuit c = *this;
  c.flags_ = std::move(flags);
  return c;
}

CircuitBuilder::CircuitBuilder(std::vector<Variable> variables) : variables_(std::move(variables)) {
  std::sort(variables_.begin(), variables_.end(), [](const Variable &a, const Variable &b) { return a.id < b.id; });
  card_by_id_ = index_cardinalities(variables_);
}

uint32_t CircuitBuilder::cardinality(uint32_t var) const {
  return var < card_by_id_.size() ? card_by_id_[var] : 0;
}

UnitId CircuitBuilder::add_input(uint32_t var, InputTable table) {
  const uint32_t card = cardinality(var);
  if (card == 0) throw ScopeError("input unit over undeclared variable X" + std::to_string(var));
  if (table.values.size() != card || table.support.size() != card)
    throw InvalidArgument("input table for X" + std::to_string(var) + " must have " + std::to_string(card) +
                          " entries");
  for (std::size_t i = 0; i < card; ++i) {
    if (!std::isfinite(table.values[i])) throw DomainError("non-finite input value");
    if (table.support[i] == 0 && table.values[i] != 0.0)
      throw InvalidArgument("input table for X" + std::to_string(var) + " has a nonzero value off its support");
  }
  Unit u;
  u.kind = UnitKind::kInput;
  u.var = var;
  u.table = std::move(table);
  u.scope = ScopeSet::single(var);
  units_.push_back(std::move(u));
  return static_cast<UnitId>(units_.size() - 1);
}

UnitId CircuitBuilder::add_constant(double value) {
  if (!std::isfinite(value)) throw DomainError("non-finite constant");
  Unit u;
  u.kind = UnitKind::kInput;
  u.var = 0;
  u.table = InputTable::from_values({value});
  units_.push_back(std::move(u));
  return static_cast<UnitId>(units_.size() - 1);
}

std::optional<UnitId> CircuitBuilder::add_sum(std::vector<UnitId> children, std::vector<double> weights,
                                              std::optional<SupportGroup> group) {
  if (children.size() != weights.size()) throw InvalidArgument("sum unit needs one weight per child");
  if (group && group->branch.size() != children.size())
    throw InvalidArgument("support group needs one branch label per child");
  Unit u;
  u.kind = UnitKind::kSum;
  SupportGroup kept;
  if (group) {
    kept.lineage = group->lineage;
    kept.origin = group->origin;
  }
  for (std::size_t i = 0; i < children.size(); ++i) {
    if (children[i] >= units_.size()) throw InvalidArgument("sum child defined after its parent");
    if (!std::isfinite(weights[i])) throw DomainError("non-finite sum weight");
    if (weights[i] == 0.0) continue;
    u.children.push_back(children[i]);
    u.weights.push_back(weights[i]);
    u.scope |= units_[children[i]].scope;
    if (group) kept.branch.push_back(group->branch[i]);
  }
  if (u.children.empty()) return std::nullopt;
  if (group) u.group = std::move(kept);
  units_.push_back(std::move(u));
  return static_cast<UnitId>(units_.size() - 1);
}

UnitId CircuitBuilder::add_product(std::vector<UnitId> children) {
  if (children.empty()) throw InvalidArgument("product unit needs at least one child");
  if (children.size() == 1) return children.front();
  Unit u;
  u.kind = UnitKind::kProduct;
  for (UnitId c : children) {
    if (c >= units_.size()) throw InvalidArgument("product child defined after its parent");
    u.scope |= units_[c].scope;
  }
  u.children = std::move(children);
  units_.push_back(std::move(u));
  return static_cast<UnitId>(units_.size() - 1);
}

Circuit CircuitBuilder::build(UnitId output, PropertyFlags flags) const {
  if (output >= units_.size()) throw InvalidArgument("output unit does not exist");
  std::vector<uint8_t> reachable(units_.size(), 0);
  reachable[output] = 1;
  for (std::size_t i = output + 1; i-- > 0;) {
    if (!reachable[i]) continue;
    for (UnitId c : units_[i].children) reachable[c] = 1;
  }
  std::vector<UnitId> remap(units_.size(), 0);
  Circuit c;
  c.variables_ = variables_;
  c.card_by_id_ = card_by_id_;
  for (const Variable &v : variables_) c.domain_.insert(v.id);
  bool pc = true;
  for (std::size_t i = 0; i <= output; ++i) {
    if (!reachable[i]) continue;
    Unit u = units_[i];
    for (UnitId &ch : u.children) ch = remap[ch];
    if (u.is_sum()) {
      for (double w : u.weights) pc = pc && w > 0.0;
    } else if (u.is_input()) {
      for (double v : u.table.values) pc = pc && v >= 0.0;
    }
    remap[i] = static_cast<UnitId>(c.units_.size());
    c.units_.push_back(std::move(u));
  }
  c.output_ = remap[output];
  c.mode_ = pc ? Mode::kPc : Mode::kGeneral;
  c.flags_ = std::move(flags);
  return c;
}

std::vector<Variable> merge_variables(const std::vector<Variable> &a, const std::vector<Variable> &b) {
  std::map<uint32_t, uint32_t> merged;
  for (const Variable &v : a) merged[v.id] = v.cardinality;
  for (const Variable &v : b) {
    auto [it, inserted] = merged.emplace(v.id, v.cardinality);
    if (!inserted && it->second != v.cardinality)
      throw InvalidArgument("variable X" + std::to_string(v.id) + " has conflicting cardinalities");
  }
  std::vector<Variable> out;
  out.reserve(merged.size());
  for (auto [id, card] : merged) out.push_back({id, card});
  return out;
}

Circuit zero_circuit(const std::vector<Variable> &variables) {
  CircuitBuilder b(variables);
  UnitId id = 0;
  if (variables.empty()) {
    id = b.add_constant(0.0);
  } else {
    id = b.add_input(b.variables().front().id, InputTable::zeros(b.variables().front().cardinality));
  }
  PropertyFlags f;
  f.smooth = f.decomposable = f.structured = f.deterministic = f.omni = Status::kVerified;
  return b.build(id, f);
}

uint64_t next_lineage() {
  static std::atomic<uint64_t> counter{1};
  return counter.fetch_add(1, std::memory_order_relaxed);
}

namespace rules {

const Row &operation_row(std::string_view id) {
  for (const Row &r : kOperationRows)
    if (r.id == id) return r;
  throw std::out_of_range("unknown operation row " + std::string(id));
}

const Row &query_row(std::string_view id) {
  for (const Row &r : kQueryRows)
    if (r.id == id) return r;
  throw std::out_of_range("unknown query row " + std::string(id));
}

}  // namespace rules

}  // namespace pcq
