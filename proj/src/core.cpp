#include "pcq/core.hpp"

#include <algorithm>
#include <atomic>
#include <bit>
#include <cmath>
#include <map>
#include <numeric>
#include <set>
#include <unordered_map>
#include <unordered_set>

#include "operand.hpp"
#include "pcq/error.hpp"
#include "pcq/rules.hpp"

namespace pcq {

namespace {

const std::string kIntegrationCitation = "Integration: requires Sm, Dec";

std::string describe_assignment(const std::vector<Variable> &vars, const std::vector<uint32_t> &values) {
  std::string s;
  for (std::size_t i = 0; i < vars.size(); ++i) {
    if (i) s += ",";
    s += "X" + std::to_string(vars[i].id) + "=" + std::to_string(values[i]);
  }
  return s;
}

void check_assignment(const Circuit &c, std::span<const uint32_t> x) {
  for (const Variable &v : c.variables()) {
    if (v.id >= x.size()) throw InvalidAssignment("assignment is missing X" + std::to_string(v.id));
    if (x[v.id] >= v.cardinality)
      throw InvalidAssignment("value " + std::to_string(x[v.id]) + " out of domain for X" + std::to_string(v.id));
  }
}

PropertyCheck check_smooth(const Circuit &c) {
  for (UnitId id = 0; id < c.unit_count(); ++id) {
    const Unit &u = c.unit(id);
    if (!u.is_sum()) continue;
    for (UnitId ch : u.children) {
      const ScopeSet &s = c.unit(ch).scope;
      if (s != u.scope)
        return {Status::kFalse, id, "sum child scope " + s.to_string() + " differs from " + u.scope.to_string()};
    }
  }
  return {Status::kVerified, std::nullopt, ""};
}

PropertyCheck check_decomposable(const Circuit &c) {
  for (UnitId id = 0; id < c.unit_count(); ++id) {
    const Unit &u = c.unit(id);
    if (!u.is_product()) continue;
    ScopeSet seen;
    for (UnitId ch : u.children) {
      const ScopeSet &s = c.unit(ch).scope;
      if (seen.intersects(s))
        return {Status::kFalse, id, "product children overlap on " + (seen & s).to_string()};
      seen |= s;
    }
  }
  return {Status::kVerified, std::nullopt, ""};
}

// Product scopes and their child scopes must form a laminar family.
PropertyCheck check_laminar(const Circuit &c) {
  std::set<ScopeSet> family;
  std::map<ScopeSet, UnitId> owner;
  for (UnitId id = 0; id < c.unit_count(); ++id) {
    const Unit &u = c.unit(id);
    if (!u.is_product()) continue;
    owner.emplace(u.scope, id);
    family.insert(u.scope);
    for (UnitId ch : u.children)
      if (!c.unit(ch).scope.empty()) {
        family.insert(c.unit(ch).scope);
        owner.emplace(c.unit(ch).scope, id);
      }
  }
  std::vector<const ScopeSet *> sets;
  for (const ScopeSet &s : family) sets.push_back(&s);
  std::stable_sort(sets.begin(), sets.end(), [](const ScopeSet *a, const ScopeSet *b) { return a->size() > b->size(); });
  std::unordered_map<uint32_t, const ScopeSet *> smallest;
  for (const ScopeSet *s : sets) {
    const std::vector<uint32_t> vs = s->vars();
    auto first = smallest.find(vs.front());
    const ScopeSet *parent = first == smallest.end() ? nullptr : first->second;
    for (uint32_t v : vs) {
      auto it = smallest.find(v);
      const ScopeSet *here = it == smallest.end() ? nullptr : it->second;
      const ScopeSet *other = here != parent ? (here ? here : parent)
                              : (parent && parent->size() == s->size()) ? parent
                                                                        : nullptr;
      if (other)
        return {Status::kFalse, owner.at(*s), "scopes " + s->to_string() + " and " + other->to_string() + " cross"};
    }
    for (uint32_t v : vs) smallest[v] = s;
  }
  return {Status::kVerified, std::nullopt, ""};
}

// Exhaustive determinism check, 64 states per step with bit-parallel support
// propagation.
PropertyCheck check_deterministic(const Circuit &c, uint64_t budget) {
  const uint64_t total = c.state_count();
  if (total > budget) {
    if (holds(c.flags().deterministic)) return {c.flags().deterministic, std::nullopt, "over budget; certificate kept"};
    throw BudgetExceeded("determinism check needs " + std::to_string(total) + " states, budget is " +
                         std::to_string(budget));
  }
  const auto &vars = c.variables();
  const std::size_t nv = vars.size();
  std::vector<uint32_t> slot_of(vars.empty() ? 1 : vars.back().id + 1, 0);
  for (std::size_t i = 0; i < nv; ++i) slot_of[vars[i].id] = static_cast<uint32_t>(i);

  std::vector<uint64_t> bits(c.unit_count());
  std::vector<std::vector<uint64_t>> value_bits(nv);
  for (std::size_t i = 0; i < nv; ++i) value_bits[i].resize(vars[i].cardinality);
  std::vector<uint32_t> state(nv, 0);

  for (uint64_t base = 0; base < total; base += 64) {
    const uint64_t count = std::min<uint64_t>(64, total - base);
    for (auto &vb : value_bits) std::fill(vb.begin(), vb.end(), 0);
    std::vector<uint32_t> s = state;
    for (uint64_t k = 0; k < count; ++k) {
      for (std::size_t i = 0; i < nv; ++i) value_bits[i][s[i]] |= uint64_t{1} << k;
      for (std::size_t i = nv; i-- > 0;) {
        if (++s[i] < vars[i].cardinality) break;
        s[i] = 0;
      }
    }
    const uint64_t valid = count == 64 ? ~uint64_t{0} : ((uint64_t{1} << count) - 1);
    for (UnitId id = 0; id < c.unit_count(); ++id) {
      const Unit &u = c.unit(id);
      if (u.is_input()) {
        if (u.is_constant()) {
          bits[id] = u.table.support[0] ? valid : 0;
          continue;
        }
        uint64_t b = 0;
        const auto &vb = value_bits[slot_of[u.var]];
        for (std::size_t a = 0; a < vb.size(); ++a)
          if (u.table.support[a]) b |= vb[a];
        bits[id] = b;
      } else if (u.is_product()) {
        uint64_t b = valid;
        for (UnitId ch : u.children) b &= bits[ch];
        bits[id] = b;
      } else {
        uint64_t seen = 0;
        for (UnitId ch : u.children) {
          const uint64_t overlap = seen & bits[ch];
          if (overlap != 0) {
            const int k = std::countr_zero(overlap);
            std::vector<uint32_t> w = state;
            for (int step = 0; step < k; ++step) {
              for (std::size_t i = nv; i-- > 0;) {
                if (++w[i] < vars[i].cardinality) break;
                w[i] = 0;
              }
            }
            return {Status::kFalse, id, describe_assignment(vars, w)};
          }
          seen |= bits[ch];
        }
        bits[id] = seen;
      }
    }
    state = s;
  }
  return {c.mode() == Mode::kPc ? Status::kVerified : Status::kDeclared, std::nullopt, ""};
}

// Recursive pairing walk shared by check_compatible.
class CompatibilityWalker {
 public:
  CompatibilityWalker(const Circuit &p, const Circuit &q) : p_(p), q_(q) {}

  CompatibilityResult run() {
    CompatibilityResult r;
    visit({p_.output()}, {q_.output()});
    r.verdict = failure_ == PairingStatus::kOk           ? Compatibility::kCompatible
                : failure_ == PairingStatus::kIncompatible ? Compatibility::kIncompatible
                                                           : Compatibility::kUnknown;
    r.matched = std::move(matched_);
    r.witness = witness_;
    return r;
  }

 private:
  bool visit(const detail::Operand &a, const detail::Operand &b) {
    if (failure_ != PairingStatus::kOk) return false;
    if (!seen_.insert({a, b}).second) return true;
    const ScopeSet shared = detail::operand_scope(p_, a) & detail::operand_scope(q_, b);
    if (shared.empty()) return true;
    const bool a_input = detail::is_single(a, p_, UnitKind::kInput);
    const bool b_input = detail::is_single(b, q_, UnitKind::kInput);
    if (a_input && b_input) return true;
    if (detail::is_single(a, p_, UnitKind::kSum)) {
      for (UnitId ch : p_.unit(a[0]).children)
        if (!visit({ch}, b)) return false;
      return true;
    }
    if (detail::is_single(b, q_, UnitKind::kSum)) {
      for (UnitId ch : q_.unit(b[0]).children)
        if (!visit(a, {ch})) return false;
      return true;
    }
    if (a_input) {
      const uint32_t var = p_.unit(a[0]).var;
      for (UnitId ch : detail::product_children(q_, b))
        if (q_.unit(ch).scope.contains(var)) return visit(a, {ch});
      return true;
    }
    if (b_input) {
      const uint32_t var = q_.unit(b[0]).var;
      for (UnitId ch : detail::product_children(p_, a))
        if (p_.unit(ch).scope.contains(var)) return visit({ch}, b);
      return true;
    }
    const auto pc = detail::product_children(p_, a);
    const auto qc = detail::product_children(q_, b);
    Pairing pairing = pair_children(p_, pc, q_, qc, shared);
    if (pairing.status != PairingStatus::kOk) {
      failure_ = pairing.status;
      witness_ = pairing.witness;
      return false;
    }
    if (a.size() == 1 && b.size() == 1) matched_.emplace_back(a[0], b[0]);
    for (const ChildPair &pr : pairing.pairs) {
      if (pr.left.empty() || pr.right.empty()) continue;
      if (!visit(pr.left, pr.right)) return false;
    }
    return true;
  }

  const Circuit &p_;
  const Circuit &q_;
  std::unordered_set<detail::OperandPair, detail::OperandPairHash> seen_;
  std::vector<std::pair<UnitId, UnitId>> matched_;
  PairingStatus failure_ = PairingStatus::kOk;
  std::string witness_;
};

// Identical circuits share support-group lineages.
uint64_t content_hash(const Circuit &c) {
  uint64_t h = 0xcbf29ce484222325ULL;
  auto mix = [&h](uint64_t v) {
    h ^= v;
    h *= 0x100000001b3ULL;
    h ^= h >> 29;
  };
  for (const Variable &v : c.variables()) {
    mix(v.id);
    mix(v.cardinality);
  }
  for (const Unit &u : c.units()) {
    mix(static_cast<uint64_t>(u.kind));
    mix(u.var);
    for (double x : u.table.values) mix(std::bit_cast<uint64_t>(x));
    for (uint8_t m : u.table.support) mix(m);
    for (UnitId ch : u.children) mix(ch);
    for (double w : u.weights) mix(std::bit_cast<uint64_t>(w));
    mix(0xfeedULL);
  }
  mix(c.output());
  return h;
}

std::string describe_split(const Circuit &c, std::span<const UnitId> children) {
  std::string s;
  for (UnitId ch : children) s += c.unit(ch).scope.to_string();
  return s;
}

}  // namespace

namespace {
std::atomic<uint64_t> g_budget{kDefaultBudget};
}  // namespace

uint64_t enumeration_budget() { return g_budget.load(std::memory_order_relaxed); }
void set_enumeration_budget(uint64_t budget) { g_budget.store(budget, std::memory_order_relaxed); }

double evaluate(const Circuit &c, std::span<const uint32_t> x) {
  check_assignment(c, x);
  std::vector<double> val(c.unit_count());
  for (UnitId id = 0; id < c.unit_count(); ++id) {
    const Unit &u = c.unit(id);
    switch (u.kind) {
      case UnitKind::kInput:
        val[id] = u.is_constant() ? u.table.values[0] : u.table.values[x[u.var]];
        break;
      case UnitKind::kSum: {
        double s = 0.0;
        for (std::size_t i = 0; i < u.children.size(); ++i) s += u.weights[i] * val[u.children[i]];
        val[id] = s;
        break;
      }
      case UnitKind::kProduct: {
        double p = 1.0;
        for (UnitId ch : u.children) p *= val[ch];
        val[id] = p;
        break;
      }
    }
  }
  return val[c.output()];
}

double evaluate(const Circuit &c, const Evidence &x) {
  Assignment a(c.variables().empty() ? 1 : c.variables().back().id + 1, 0);
  for (const Variable &v : c.variables()) {
    auto it = x.find(v.id);
    if (it == x.end()) throw InvalidAssignment("assignment is missing X" + std::to_string(v.id));
    a[v.id] = it->second;
  }
  return evaluate(c, a);
}

double integrate(const Circuit &c, const Evidence &evidence) {
  require_smooth_decomposable(c, kIntegrationCitation);
  for (auto [var, value] : evidence) {
    const uint32_t card = c.cardinality(var);
    if (card == 0) throw InvalidAssignment("evidence on unknown variable X" + std::to_string(var));
    if (value >= card) throw InvalidAssignment("evidence value out of domain for X" + std::to_string(var));
  }
  std::vector<double> val(c.unit_count());
  for (UnitId id = 0; id < c.unit_count(); ++id) {
    const Unit &u = c.unit(id);
    switch (u.kind) {
      case UnitKind::kInput:
        if (u.is_constant()) {
          val[id] = u.table.values[0];
        } else if (auto it = evidence.find(u.var); it != evidence.end()) {
          val[id] = u.table.values[it->second];
        } else {
          val[id] = u.table.total();
        }
        break;
      case UnitKind::kSum: {
        double s = 0.0;
        for (std::size_t i = 0; i < u.children.size(); ++i) s += u.weights[i] * val[u.children[i]];
        val[id] = s;
        break;
      }
      case UnitKind::kProduct: {
        double p = 1.0;
        for (UnitId ch : u.children) p *= val[ch];
        val[id] = p;
        break;
      }
    }
  }
  double factor = 1.0;
  for (const Variable &v : c.variables())
    if (!c.root().scope.contains(v.id) && !evidence.contains(v.id)) factor *= v.cardinality;
  return factor * val[c.output()];
}

Circuit marginalize(const Circuit &c, const ScopeSet &drop) {
  if (!drop.subset_of(c.domain()))
    throw ScopeError("cannot marginalize " + (drop - c.domain()).to_string() + ": not in the circuit's domain");
  require_smooth_decomposable(c, kIntegrationCitation);

  std::vector<Variable> kept;
  for (const Variable &v : c.variables())
    if (!drop.contains(v.id)) kept.push_back(v);
  CircuitBuilder b(kept);

  // Each unit maps to scale * unit, or to the constant `scale` when unit is empty.
  struct Folded {
    std::optional<UnitId> unit;
    double scale = 1.0;
  };
  std::vector<Folded> f(c.unit_count());
  for (UnitId id = 0; id < c.unit_count(); ++id) {
    const Unit &u = c.unit(id);
    if (u.is_input()) {
      if (u.is_constant()) {
        f[id] = {std::nullopt, u.table.values[0]};
      } else if (drop.contains(u.var)) {
        f[id] = {std::nullopt, u.table.total()};
      } else {
        f[id] = {b.add_input(u.var, u.table), 1.0};
      }
    } else if (u.is_product()) {
      double scale = 1.0;
      std::vector<UnitId> kids;
      for (UnitId ch : u.children) {
        scale *= f[ch].scale;
        if (f[ch].unit) kids.push_back(*f[ch].unit);
      }
      if (kids.empty() || scale == 0.0) {
        f[id] = {std::nullopt, scale};
      } else {
        f[id] = {b.add_product(std::move(kids)), scale};
      }
    } else {
      std::vector<UnitId> kids;
      std::vector<double> weights;
      double constant = 0.0;
      for (std::size_t i = 0; i < u.children.size(); ++i) {
        const Folded &fc = f[u.children[i]];
        if (fc.unit) {
          kids.push_back(*fc.unit);
          weights.push_back(u.weights[i] * fc.scale);
        } else {
          constant += u.weights[i] * fc.scale;
        }
      }
      if (kids.empty()) {
        f[id] = {std::nullopt, constant};
        continue;
      }
      if (constant != 0.0) {
        kids.push_back(b.add_constant(1.0));
        weights.push_back(constant);
      }
      auto s = b.add_sum(std::move(kids), std::move(weights));
      f[id] = s ? Folded{*s, 1.0} : Folded{std::nullopt, 0.0};
    }
  }

  const Folded &root = f[c.output()];
  PropertyFlags flags;
  flags.smooth = c.flags().smooth;
  flags.decomposable = c.flags().decomposable;
  flags.structured = c.flags().structured;
  flags.omni = c.flags().omni;
  flags.compat_class = c.flags().compat_class;
  if (!root.unit) {
    if (root.scale == 0.0) return zero_circuit(kept);
    UnitId k = b.add_constant(root.scale);
    return b.build(k, flags);
  }
  if (root.scale == 1.0) return b.build(*root.unit, flags);
  auto s = b.add_sum({*root.unit}, {root.scale});
  if (!s) return zero_circuit(kept);
  return b.build(*s, flags);
}

PropertyCheck check_property(const Circuit &c, Property which, uint64_t budget) {
  switch (which) {
    case Property::kSmooth:
      return check_smooth(c);
    case Property::kDecomposable:
      return check_decomposable(c);
    case Property::kStructured: {
      PropertyCheck sm = check_smooth(c);
      if (!sm.ok()) return sm;
      PropertyCheck dec = check_decomposable(c);
      if (!dec.ok()) return dec;
      return check_laminar(c);
    }
    case Property::kDeterministic:
      return check_deterministic(c, budget);
  }
  return {};
}

Circuit verify_flags(const Circuit &c, bool all, uint64_t budget) {
  PropertyFlags f = c.flags();
  for (Property p : {Property::kSmooth, Property::kDecomposable, Property::kStructured, Property::kDeterministic}) {
    if (!all && !holds(f.get(p))) continue;
    f.set(p, check_property(c, p, budget).status);
  }
  if (f.structured == Status::kVerified && f.decomposable != Status::kVerified) f.structured = Status::kUnknown;
  return c.with_flags(f);
}

const char *to_string(Compatibility c) {
  switch (c) {
    case Compatibility::kCompatible:
      return "compatible";
    case Compatibility::kIncompatible:
      return "incompatible";
    case Compatibility::kUnknown:
      return "unknown";
  }
  return "?";
}

CompatibilityResult check_compatible(const Circuit &p, const Circuit &q) {
  const std::string citation = rules::op_citation("product");
  require_smooth_decomposable(p, citation);
  require_smooth_decomposable(q, citation);
  return CompatibilityWalker(p, q).run();
}

Pairing pair_children(const Circuit &p, std::span<const UnitId> pc, const Circuit &q, std::span<const UnitId> qc,
                      const ScopeSet &shared) {
  const std::size_t np = pc.size();
  const std::size_t nq = qc.size();
  std::vector<ScopeSet> sp(np), sq(nq);
  for (std::size_t i = 0; i < np; ++i) sp[i] = p.unit(pc[i]).scope & shared;
  for (std::size_t j = 0; j < nq; ++j) sq[j] = q.unit(qc[j]).scope & shared;

  // Union-find over p children [0, np) and q children [np, np + nq).
  std::vector<std::size_t> parent(np + nq);
  std::iota(parent.begin(), parent.end(), 0);
  auto find = [&parent](std::size_t x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  };
  for (std::size_t i = 0; i < np; ++i)
    for (std::size_t j = 0; j < nq; ++j)
      if (sp[i].intersects(sq[j])) parent[find(i)] = find(np + j);

  Pairing out;
  std::map<std::size_t, std::size_t> component_slot;
  struct Component {
    std::vector<std::size_t> ps, qs;
  };
  std::vector<Component> components;
  auto slot = [&](std::size_t node) -> Component & {
    const std::size_t r = find(node);
    auto [it, inserted] = component_slot.emplace(r, components.size());
    if (inserted) components.emplace_back();
    return components[it->second];
  };
  std::vector<UnitId> free_p, free_q;
  for (std::size_t i = 0; i < np; ++i) {
    if (sp[i].empty()) {
      free_p.push_back(pc[i]);
    } else {
      slot(i).ps.push_back(i);
    }
  }
  for (std::size_t j = 0; j < nq; ++j) {
    if (sq[j].empty()) {
      free_q.push_back(qc[j]);
    } else {
      slot(np + j).qs.push_back(j);
    }
  }

  for (const Component &comp : components) {
    ChildPair pr;
    for (std::size_t i : comp.ps) pr.left.push_back(pc[i]);
    for (std::size_t j : comp.qs) pr.right.push_back(qc[j]);
    if (comp.ps.size() > 1 && comp.qs.size() > 1) {
      ScopeSet scope_p, scope_q;
      for (UnitId u : pc) scope_p |= p.unit(u).scope;
      for (UnitId u : qc) scope_q |= q.unit(u).scope;
      out.status = (scope_p & shared) == (scope_q & shared) && scope_p == scope_q ? PairingStatus::kIncompatible
                                                                                  : PairingStatus::kUnknown;
      out.witness = describe_split(p, pc) + " vs " + describe_split(q, qc);
      out.pairs.clear();
      return out;
    }
    out.pairs.push_back(std::move(pr));
  }

  std::sort(free_p.begin(), free_p.end());
  std::sort(free_q.begin(), free_q.end());
  const std::size_t zipped = std::min(free_p.size(), free_q.size());
  for (std::size_t k = 0; k < zipped; ++k) out.pairs.push_back({{free_p[k]}, {free_q[k]}});
  for (std::size_t k = zipped; k < free_p.size(); ++k) out.pairs.push_back({{free_p[k]}, {}});
  for (std::size_t k = zipped; k < free_q.size(); ++k) out.pairs.push_back({{}, {free_q[k]}});
  return out;
}

Circuit smooth_transform(const Circuit &c) {
  if (!holds(c.flags().decomposable)) {
    PropertyCheck dec = check_property(c, Property::kDecomposable);
    if (!dec.ok())
      throw PropertyViolation("smoothing requires a decomposable circuit: " + dec.witness,
                              "Smoothing: requires Dec", dec.unit);
  }
  PropertyFlags flags = c.flags();
  if (check_property(c, Property::kSmooth).ok()) {
    flags.smooth = Status::kVerified;
    return c.with_flags(flags);
  }
  CircuitBuilder b(c.variables());
  std::vector<UnitId> map(c.unit_count());
  std::map<std::pair<UnitId, ScopeSet>, UnitId> padded;
  for (UnitId id = 0; id < c.unit_count(); ++id) {
    const Unit &u = c.unit(id);
    if (u.is_input()) {
      map[id] = u.is_constant() ? b.add_constant(u.table.values[0]) : b.add_input(u.var, u.table);
    } else if (u.is_product()) {
      std::vector<UnitId> kids;
      for (UnitId ch : u.children) kids.push_back(map[ch]);
      map[id] = b.add_product(std::move(kids));
    } else {
      std::vector<UnitId> kids;
      for (UnitId ch : u.children) {
        const ScopeSet missing = u.scope - c.unit(ch).scope;
        if (missing.empty()) {
          kids.push_back(map[ch]);
          continue;
        }
        auto key = std::make_pair(ch, missing);
        auto it = padded.find(key);
        if (it == padded.end()) {
          std::vector<UnitId> factors{map[ch]};
          for (uint32_t v : missing.vars()) factors.push_back(b.add_input(v, InputTable::ones(c.cardinality(v))));
          it = padded.emplace(key, b.add_product(std::move(factors))).first;
        }
        kids.push_back(it->second);
      }
      map[id] = *b.add_sum(std::move(kids), u.weights, u.group);
    }
  }
  flags.smooth = Status::kVerified;
  if (flags.structured != Status::kFalse) flags.structured = Status::kUnknown;
  return b.build(map[c.output()], flags);
}

Circuit support_circuit(const Circuit &c) {
  const std::string citation = "Support: requires Sm, Dec, Det";
  require_smooth_decomposable(c, citation);
  require_deterministic(c, citation);
  CircuitBuilder b(c.variables());
  std::vector<UnitId> map(c.unit_count());
  for (UnitId id = 0; id < c.unit_count(); ++id) {
    const Unit &u = c.unit(id);
    if (u.is_input()) {
      InputTable t = u.table;
      for (std::size_t i = 0; i < t.values.size(); ++i) t.values[i] = t.support[i] ? 1.0 : 0.0;
      map[id] = u.is_constant() ? b.add_constant(t.values[0]) : b.add_input(u.var, std::move(t));
    } else if (u.is_product()) {
      std::vector<UnitId> kids;
      for (UnitId ch : u.children) kids.push_back(map[ch]);
      map[id] = b.add_product(std::move(kids));
    } else {
      std::vector<UnitId> kids;
      for (UnitId ch : u.children) kids.push_back(map[ch]);
      map[id] = *b.add_sum(std::move(kids), std::vector<double>(kids.size(), 1.0), u.group);
    }
  }
  PropertyFlags flags = c.flags();
  flags.compat_class = c.flags().compat_class;
  return b.build(map[c.output()], flags);
}

Circuit with_support_groups(const Circuit &c) {
  if (!holds(c.flags().deterministic)) return c;
  for (const Unit &u : c.units())
    if (u.group) return c;
  const uint64_t lineage = content_hash(c) | (uint64_t{1} << 63);
  CircuitBuilder b(c.variables());
  for (UnitId id = 0; id < c.unit_count(); ++id) {
    const Unit &u = c.unit(id);
    if (u.is_input()) {
      if (u.is_constant()) {
        b.add_constant(u.table.values[0]);
      } else {
        b.add_input(u.var, u.table);
      }
    } else if (u.is_product()) {
      b.add_product(u.children);
    } else {
      SupportGroup g{lineage, id, {}};
      g.branch.resize(u.children.size());
      std::iota(g.branch.begin(), g.branch.end(), 0U);
      b.add_sum(u.children, u.weights, std::move(g));
    }
  }
  return b.build(c.output(), c.flags());
}

std::vector<uint8_t> nonempty_support(const Circuit &c) {
  std::vector<uint8_t> ne(c.unit_count(), 0);
  for (UnitId id = 0; id < c.unit_count(); ++id) {
    const Unit &u = c.unit(id);
    if (u.is_input()) {
      ne[id] = u.table.any_support() ? 1 : 0;
    } else if (u.is_product()) {
      ne[id] = std::all_of(u.children.begin(), u.children.end(), [&](UnitId ch) { return ne[ch] != 0; }) ? 1 : 0;
    } else {
      ne[id] = std::any_of(u.children.begin(), u.children.end(), [&](UnitId ch) { return ne[ch] != 0; }) ? 1 : 0;
    }
  }
  return ne;
}

void require_smooth_decomposable(const Circuit &c, const std::string &citation) {
  if (!holds(c.flags().smooth)) {
    PropertyCheck r = check_property(c, Property::kSmooth);
    if (!r.ok()) throw PropertyViolation("circuit is not smooth: " + r.witness, citation, r.unit);
  }
  if (!holds(c.flags().decomposable)) {
    PropertyCheck r = check_property(c, Property::kDecomposable);
    if (!r.ok()) throw PropertyViolation("circuit is not decomposable: " + r.witness, citation, r.unit);
  }
}

void require_deterministic(const Circuit &c, const std::string &citation, uint64_t budget) {
  if (c.flags().deterministic == Status::kFalse)
    throw PropertyViolation("circuit is not deterministic", citation);
  if (holds(c.flags().deterministic)) return;
  PropertyCheck r = check_property(c, Property::kDeterministic, budget);
  if (!r.ok())
    throw PropertyViolation("circuit is not deterministic: children of unit " +
                                (r.unit ? std::to_string(*r.unit) : std::string("?")) + " overlap at " + r.witness,
                            citation, r.unit);
}

void require_structured(const Circuit &c, const std::string &citation) {
  if (c.flags().structured == Status::kFalse) throw PropertyViolation("circuit is not structured-decomposable", citation);
  if (holds(c.flags().structured)) return;
  PropertyCheck r = check_property(c, Property::kStructured);
  if (!r.ok()) throw PropertyViolation("circuit is not structured-decomposable: " + r.witness, citation, r.unit);
}

void require_pc(const Circuit &c, const std::string &what) {
  if (c.mode() != Mode::kPc)
    throw PropertyViolation(what + " requires a PC (positive weights, nonnegative inputs)",
                            what + ": requires a probabilistic circuit");
}

}  // namespace pcq
