#include "pcq/ops.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <unordered_map>

#include "operand.hpp"
#include "pcq/error.hpp"
#include "pcq/rules.hpp"

namespace pcq {

namespace {

using detail::Operand;
using detail::OperandPair;
using detail::OperandPairHash;

// Unknown flags that passed a precondition check count as verified.
Status checked(Status s) { return s == Status::kUnknown ? Status::kVerified : s; }

Status combine(Status a, Status b) {
  if (!holds(a) || !holds(b)) return Status::kUnknown;
  return a == Status::kVerified && b == Status::kVerified ? Status::kVerified : Status::kDeclared;
}

// Known status, or the checker's verdict when the flag is unknown.
Status resolve(const Circuit &c, Property p) {
  const Status s = c.flags().get(p);
  if (s != Status::kUnknown) return s;
  try {
    return check_property(c, p).status;
  } catch (const BudgetExceeded &) {
    return Status::kUnknown;
  }
}

OpResult finish(Circuit c, std::size_t cache_hits = 0) {
  OpResult r{c, c.flags(), {c.unit_count(), c.edge_count(), cache_hits}};
  return r;
}

// Copies units of `src` into `b`, memoized.
class Copier {
 public:
  Copier(const Circuit &src, CircuitBuilder &b) : src_(src), b_(b), map_(src.unit_count(), kNone) {}

  UnitId operator()(UnitId id) {
    if (map_[id] != kNone) return map_[id];
    const Unit &u = src_.unit(id);
    UnitId out = 0;
    if (u.is_input()) {
      out = u.is_constant() ? b_.add_constant(u.table.values[0]) : b_.add_input(u.var, u.table);
    } else if (u.is_product()) {
      std::vector<UnitId> kids;
      for (UnitId ch : u.children) kids.push_back((*this)(ch));
      out = b_.add_product(std::move(kids));
    } else {
      std::vector<UnitId> kids;
      for (UnitId ch : u.children) kids.push_back((*this)(ch));
      out = *b_.add_sum(std::move(kids), u.weights, u.group);
    }
    return map_[id] = out;
  }

 private:
  static constexpr UnitId kNone = ~UnitId{0};
  const Circuit &src_;
  CircuitBuilder &b_;
  std::vector<UnitId> map_;
};

class Multiplier {
 public:
  Multiplier(const Circuit &p, const Circuit &q, CircuitBuilder &b)
      : p_(p), q_(q), b_(b), copy_p_(p, b), copy_q_(q, b), ne_p_(nonempty_support(p)), ne_q_(nonempty_support(q)) {}

  std::optional<UnitId> run() { return mul({p_.output()}, {q_.output()}); }
  std::size_t cache_hits() const { return hits_; }

 private:
  std::optional<UnitId> mul(const Operand &a, const Operand &b) {
    OperandPair key{a, b};
    if (auto it = memo_.find(key); it != memo_.end()) {
      ++hits_;
      return it->second;
    }
    std::optional<UnitId> r = compute(a, b);
    memo_.emplace(std::move(key), r);
    return r;
  }

  bool nonempty(const Operand &op, const std::vector<uint8_t> &ne) const {
    return std::all_of(op.begin(), op.end(), [&](UnitId u) { return ne[u] != 0; });
  }

  // Product of copied factors; constants are folded together.
  std::optional<UnitId> product_of(std::vector<UnitId> factors) {
    double constant = 1.0;
    bool has_constant = false;
    std::vector<UnitId> rest;
    for (UnitId f : factors) {
      const Unit &u = b_.unit(f);
      if (u.is_constant()) {
        constant *= u.table.values[0];
        has_constant = true;
      } else {
        rest.push_back(f);
      }
    }
    if (has_constant && constant == 0.0) return std::nullopt;
    if (has_constant && (constant != 1.0 || rest.empty())) rest.push_back(b_.add_constant(constant));
    return b_.add_product(std::move(rest));
  }

  std::optional<UnitId> copy_product(const Operand &a, const Operand &b) {
    if (!nonempty(a, ne_p_) || !nonempty(b, ne_q_)) return std::nullopt;
    std::vector<UnitId> factors;
    for (UnitId u : a) factors.push_back(copy_p_(u));
    for (UnitId u : b) factors.push_back(copy_q_(u));
    return product_of(std::move(factors));
  }

  std::optional<UnitId> compute(const Operand &a, const Operand &b) {
    if (!nonempty(a, ne_p_) || !nonempty(b, ne_q_)) return std::nullopt;
    const ScopeSet shared = detail::operand_scope(p_, a) & detail::operand_scope(q_, b);
    if (shared.empty()) return copy_product(a, b);

    const bool a_input = detail::is_single(a, p_, UnitKind::kInput);
    const bool b_input = detail::is_single(b, q_, UnitKind::kInput);
    if (a_input && b_input) {
      const Unit &u = p_.unit(a[0]);
      const Unit &v = q_.unit(b[0]);
      InputTable t;
      t.values.resize(u.table.values.size());
      t.support.resize(u.table.values.size());
      bool any = false;
      for (std::size_t i = 0; i < t.values.size(); ++i) {
        t.support[i] = u.table.support[i] && v.table.support[i] ? 1 : 0;
        t.values[i] = t.support[i] ? u.table.values[i] * v.table.values[i] : 0.0;
        any = any || t.support[i];
      }
      if (!any) return std::nullopt;
      return b_.add_input(u.var, std::move(t));
    }

    const bool a_sum = detail::is_single(a, p_, UnitKind::kSum);
    const bool b_sum = detail::is_single(b, q_, UnitKind::kSum);
    if (a_sum || b_sum) return distribute(a, b, a_sum, b_sum);

    if (a_input) return input_times_product(a, b, /*input_on_left=*/true);
    if (b_input) return input_times_product(b, a, /*input_on_left=*/false);
    return product_times_product(a, b, shared);
  }

  std::optional<UnitId> distribute(const Operand &a, const Operand &b, bool a_sum, bool b_sum) {
    const Unit *sa = a_sum ? &p_.unit(a[0]) : nullptr;
    const Unit *sb = b_sum ? &q_.unit(b[0]) : nullptr;
    const bool same_group = sa && sb && sa->group && sb->group && sa->group->lineage == sb->group->lineage &&
                            sa->group->origin == sb->group->origin;
    const std::size_t na = sa ? sa->children.size() : 1;
    const std::size_t nb = sb ? sb->children.size() : 1;
    const SupportGroup *label_src = sa && sa->group ? &*sa->group : (sb && sb->group ? &*sb->group : nullptr);
    const bool label_from_a = sa && sa->group;

    std::vector<UnitId> kids;
    std::vector<double> weights;
    std::vector<uint32_t> branch;
    for (std::size_t i = 0; i < na; ++i) {
      for (std::size_t j = 0; j < nb; ++j) {
        if (same_group && sa->group->branch[i] != sb->group->branch[j]) continue;
        const Operand left = sa ? Operand{sa->children[i]} : a;
        const Operand right = sb ? Operand{sb->children[j]} : b;
        std::optional<UnitId> r = mul(left, right);
        if (!r) continue;
        const double w = (sa ? sa->weights[i] : 1.0) * (sb ? sb->weights[j] : 1.0);
        kids.push_back(*r);
        weights.push_back(w);
        if (label_src) branch.push_back(label_src->branch[label_from_a ? i : j]);
      }
    }
    if (kids.empty()) return std::nullopt;
    std::optional<SupportGroup> group;
    if (label_src) group = SupportGroup{label_src->lineage, label_src->origin, std::move(branch)};
    return b_.add_sum(std::move(kids), std::move(weights), std::move(group));
  }

  // `in` is a single input operand, `prod` a product or bundle of the other circuit.
  std::optional<UnitId> input_times_product(const Operand &in, const Operand &prod, bool input_on_left) {
    const Circuit &pc = input_on_left ? q_ : p_;
    const Circuit &ic = input_on_left ? p_ : q_;
    const uint32_t var = ic.unit(in[0]).var;
    std::vector<UnitId> factors;
    bool matched = false;
    for (UnitId ch : detail::product_children(pc, prod)) {
      if (!matched && pc.unit(ch).scope.contains(var)) {
        matched = true;
        std::optional<UnitId> r = input_on_left ? mul(in, {ch}) : mul({ch}, in);
        if (!r) return std::nullopt;
        factors.push_back(*r);
      } else {
        factors.push_back(input_on_left ? copy_q_(ch) : copy_p_(ch));
      }
    }
    return product_of(std::move(factors));
  }

  std::optional<UnitId> product_times_product(const Operand &a, const Operand &b, const ScopeSet &shared) {
    const std::vector<UnitId> ac = detail::product_children(p_, a);
    const std::vector<UnitId> bc = detail::product_children(q_, b);
    Pairing pairing = pair_children(p_, ac, q_, bc, shared);
    if (pairing.status != PairingStatus::kOk)
      throw RearrangementFailure("cannot align product scopes " + pairing.witness, rules::op_citation("product"));
    std::vector<UnitId> factors;
    for (const ChildPair &pr : pairing.pairs) {
      std::optional<UnitId> r;
      if (pr.right.empty()) {
        if (!nonempty(pr.left, ne_p_)) return std::nullopt;
        for (UnitId u : pr.left) factors.push_back(copy_p_(u));
        continue;
      }
      if (pr.left.empty()) {
        if (!nonempty(pr.right, ne_q_)) return std::nullopt;
        for (UnitId u : pr.right) factors.push_back(copy_q_(u));
        continue;
      }
      r = mul(pr.left, pr.right);
      if (!r) return std::nullopt;
      factors.push_back(*r);
    }
    return product_of(std::move(factors));
  }

  const Circuit &p_;
  const Circuit &q_;
  CircuitBuilder &b_;
  Copier copy_p_;
  Copier copy_q_;
  std::vector<uint8_t> ne_p_;
  std::vector<uint8_t> ne_q_;
  std::unordered_map<OperandPair, std::optional<UnitId>, OperandPairHash> memo_;
  std::size_t hits_ = 0;
};

OpResult multiply_once(const Circuit &p, const Circuit &q) {
  const std::string citation = rules::op_citation("product");
  require_smooth_decomposable(p, citation);
  require_smooth_decomposable(q, citation);
  const std::vector<Variable> vars = merge_variables(p.variables(), q.variables());
  CircuitBuilder b(vars);
  Multiplier m(p, q, b);
  std::optional<UnitId> root = m.run();
  if (!root) return finish(zero_circuit(vars), m.cache_hits());

  const PropertyFlags &fp = p.flags();
  const PropertyFlags &fq = q.flags();
  PropertyFlags f;
  f.smooth = combine(checked(fp.smooth), checked(fq.smooth));
  f.decomposable = combine(checked(fp.decomposable), checked(fq.decomposable));
  f.deterministic = combine(fp.deterministic, fq.deterministic);
  f.structured = combine(fp.structured, fq.structured);
  if (fp.compat_class && fp.compat_class == fq.compat_class) f.compat_class = fp.compat_class;
  if (holds(fp.omni) && holds(fq.omni)) f.omni = combine(fp.omni, fq.omni);
  return finish(b.build(*root, f), m.cache_hits());
}

void require_decomposable(const Circuit &c, const std::string &citation) {
  if (holds(c.flags().decomposable)) return;
  PropertyCheck r = check_property(c, Property::kDecomposable);
  if (!r.ok()) throw PropertyViolation("circuit is not decomposable: " + r.witness, citation, r.unit);
}

// Multiplies the root of a copied circuit by all-ones inputs over `missing`.
UnitId pad(CircuitBuilder &b, UnitId root, const ScopeSet &missing) {
  if (missing.empty()) return root;
  std::vector<UnitId> factors{root};
  for (uint32_t v : missing.vars()) factors.push_back(b.add_input(v, InputTable::ones(b.cardinality(v))));
  return b.add_product(std::move(factors));
}

}  // namespace

OpResult sum_circuits(const Circuit &p, const Circuit &q, double theta1, double theta2) {
  if (!std::isfinite(theta1) || !std::isfinite(theta2)) throw DomainError("sum weights must be finite");
  const std::string citation = rules::op_citation("sum");
  require_decomposable(p, citation);
  require_decomposable(q, citation);
  const Circuit ps = resolve(p, Property::kSmooth) == Status::kFalse ? smooth_transform(p) : p;
  const Circuit qs = resolve(q, Property::kSmooth) == Status::kFalse ? smooth_transform(q) : q;
  const std::vector<Variable> vars = merge_variables(p.variables(), q.variables());
  const ScopeSet joint = ps.root().scope | qs.root().scope;

  CircuitBuilder b(vars);
  std::vector<UnitId> kids;
  std::vector<double> weights;
  if (theta1 != 0.0) {
    Copier cp(ps, b);
    kids.push_back(pad(b, cp(ps.output()), joint - ps.root().scope));
    weights.push_back(theta1);
  }
  if (theta2 != 0.0) {
    Copier cq(qs, b);
    kids.push_back(pad(b, cq(qs.output()), joint - qs.root().scope));
    weights.push_back(theta2);
  }
  if (kids.empty()) return finish(zero_circuit(vars));
  const UnitId root = *b.add_sum(std::move(kids), std::move(weights));

  PropertyFlags f;
  f.smooth = combine(resolve(ps, Property::kSmooth), resolve(qs, Property::kSmooth));
  f.decomposable = combine(checked(p.flags().decomposable), checked(q.flags().decomposable));
  if (holds(ps.flags().structured) && holds(qs.flags().structured) && ps.root().scope == qs.root().scope) {
    const bool same_class = ps.flags().compat_class && ps.flags().compat_class == qs.flags().compat_class;
    if (same_class || check_compatible(ps, qs).verdict == Compatibility::kCompatible) {
      f.structured = combine(ps.flags().structured, qs.flags().structured);
      if (same_class) f.compat_class = ps.flags().compat_class;
    }
  }
  return finish(b.build(root, f));
}

OpResult multiply(const Circuit &p, const Circuit &q, const MultiplyOptions &options) {
  try {
    return multiply_once(p, q);
  } catch (const RearrangementFailure &) {
    if (options.expansion_budget == 0) throw;
    const bool expand_p = induced_term_count(p) <= induced_term_count(q);
    const Circuit &small = expand_p ? p : q;
    if (induced_term_count(small) > options.expansion_budget) throw;
    const Circuit expanded = expand_to_factorized(small, options.expansion_budget);
    OpResult r = expand_p ? multiply_once(expanded, q) : multiply_once(p, expanded);
    PropertyFlags f = r.circuit.flags();
    f.structured = Status::kUnknown;
    f.compat_class.reset();
    r.circuit = r.circuit.with_flags(f);
    r.flags = f;
    return r;
  }
}

std::vector<ChildPair> sort_pairs_by_scope(const Circuit &p, UnitId p_product, const Circuit &q, UnitId q_product,
                                           const ScopeSet &shared) {
  const Unit &a = p.unit(p_product);
  const Unit &b = q.unit(q_product);
  if (!a.is_product() || !b.is_product()) throw InvalidArgument("sort_pairs_by_scope expects two product units");
  Pairing r = pair_children(p, a.children, q, b.children, shared);
  if (r.status != PairingStatus::kOk)
    throw RearrangementFailure("cannot align product scopes " + r.witness, rules::op_citation("product"));
  return r.pairs;
}

OpResult restricted_power(const Circuit &p, double alpha) {
  if (!std::isfinite(alpha)) throw DomainError("exponent must be finite");
  const std::string citation = rules::op_citation("power_real");
  require_smooth_decomposable(p, citation);
  require_deterministic(p, citation);
  const bool integral = alpha == std::floor(alpha) && alpha >= 0.0;
  if (!integral) require_pc(p, "Real power");

  auto power = [alpha](double v) -> double {
    if (alpha == 0.0) return 1.0;
    if (v == 0.0) {
      if (alpha < 0.0) throw DomainError("negative power of a zero value inside the support");
      return 0.0;
    }
    return std::pow(v, alpha);
  };

  CircuitBuilder b(p.variables());
  for (UnitId id = 0; id < p.unit_count(); ++id) {
    const Unit &u = p.unit(id);
    if (u.is_input()) {
      InputTable t = u.table;
      for (std::size_t i = 0; i < t.values.size(); ++i) t.values[i] = t.support[i] ? power(t.values[i]) : 0.0;
      if (u.is_constant()) {
        b.add_constant(t.values[0]);
      } else {
        b.add_input(u.var, std::move(t));
      }
    } else if (u.is_product()) {
      b.add_product(u.children);
    } else {
      std::vector<double> w;
      for (double x : u.weights) w.push_back(power(x));
      b.add_sum(u.children, std::move(w), u.group);
    }
  }
  PropertyFlags f = p.flags();
  f.omni = Status::kUnknown;
  return finish(b.build(p.output(), f));
}

OpResult natural_power(const Circuit &p, uint32_t n) {
  if (n == 0) throw InvalidArgument("natural power needs n >= 1");
  if (n == 1) return finish(p);
  if (holds(resolve(p, Property::kDeterministic))) return restricted_power(p, n);
  const std::string citation = rules::op_citation("power_natural");
  require_smooth_decomposable(p, citation);
  require_structured(p, citation);

  std::optional<Circuit> result;
  Circuit base = p;
  std::size_t hits = 0;
  for (uint32_t e = n;;) {
    if (e & 1U) {
      if (result) {
        OpResult r = multiply(*result, base);
        hits += r.stats.cache_hits;
        result = r.circuit;
      } else {
        result = base;
      }
    }
    e >>= 1U;
    if (e == 0) break;
    OpResult sq = multiply(base, base);
    hits += sq.stats.cache_hits;
    base = sq.circuit;
  }
  PropertyFlags f = result->flags();
  f.smooth = checked(p.flags().smooth);
  f.structured = checked(p.flags().structured);
  f.decomposable = f.structured;
  f.compat_class = p.flags().compat_class;
  if (result->is_zero()) return finish(*result, hits);
  return finish(result->with_flags(f), hits);
}

OpResult quotient(const Circuit &p, const Circuit &q) {
  const std::string citation = rules::op_citation("quotient");
  require_smooth_decomposable(q, citation);
  require_deterministic(q, citation);
  require_pc(q, "Quotient");
  const OpResult inv = restricted_power(q, -1.0);
  return multiply(p, inv.circuit);
}

OpResult log_circuit(const Circuit &input) {
  const std::string citation = rules::op_citation("log");
  require_smooth_decomposable(input, citation);
  require_deterministic(input, citation);
  require_pc(input, "Log");
  PropertyFlags in_flags = input.flags();
  in_flags.deterministic = checked(in_flags.deterministic);
  const Circuit p = with_support_groups(input.with_flags(in_flags));

  CircuitBuilder b(p.variables());
  std::vector<UnitId> sup(p.unit_count());
  std::vector<UnitId> lg(p.unit_count());
  for (UnitId id = 0; id < p.unit_count(); ++id) {
    const Unit &u = p.unit(id);
    if (u.is_input()) {
      InputTable s = u.table;
      InputTable l = u.table;
      for (std::size_t i = 0; i < s.values.size(); ++i) {
        s.values[i] = s.support[i] ? 1.0 : 0.0;
        if (!l.support[i]) continue;
        if (!(l.values[i] > 0.0)) throw DomainError("logarithm of a zero value inside the support");
        l.values[i] = std::log(l.values[i]);
      }
      if (u.is_constant()) {
        sup[id] = b.add_constant(s.values[0]);
        lg[id] = b.add_constant(l.support[0] ? l.values[0] : 0.0);
      } else {
        sup[id] = b.add_input(u.var, std::move(s));
        lg[id] = b.add_input(u.var, std::move(l));
      }
    } else if (u.is_product()) {
      std::vector<UnitId> skids;
      for (UnitId ch : u.children) skids.push_back(sup[ch]);
      sup[id] = b.add_product(skids);
      std::vector<UnitId> terms;
      for (std::size_t i = 0; i < u.children.size(); ++i) {
        std::vector<UnitId> factors = skids;
        factors[i] = lg[u.children[i]];
        terms.push_back(b.add_product(std::move(factors)));
      }
      lg[id] = *b.add_sum(terms, std::vector<double>(terms.size(), 1.0));
    } else {
      std::vector<UnitId> skids;
      for (UnitId ch : u.children) skids.push_back(sup[ch]);
      sup[id] = *b.add_sum(skids, std::vector<double>(skids.size(), 1.0), u.group);
      std::vector<UnitId> kids;
      std::vector<double> weights;
      SupportGroup own{next_lineage(), id, {}};
      for (uint32_t i = 0; i < u.children.size(); ++i) own.branch.push_back(i);
      const SupportGroup &src = u.group ? *u.group : own;
      SupportGroup g{src.lineage, src.origin, {}};
      for (std::size_t i = 0; i < u.children.size(); ++i) {
        kids.push_back(sup[u.children[i]]);
        weights.push_back(std::log(u.weights[i]));
        kids.push_back(lg[u.children[i]]);
        weights.push_back(1.0);
        g.branch.push_back(src.branch[i]);
        g.branch.push_back(src.branch[i]);
      }
      lg[id] = *b.add_sum(std::move(kids), std::move(weights), std::move(g));
    }
  }
  PropertyFlags f;
  f.smooth = checked(p.flags().smooth);
  f.decomposable = checked(p.flags().decomposable);
  f.structured = holds(p.flags().structured) ? p.flags().structured : Status::kUnknown;
  f.compat_class = p.flags().compat_class;
  return finish(b.build(lg[p.output()], f));
}

OpResult exp_linear(const std::vector<Variable> &variables, double theta0, const std::map<uint32_t, double> &theta) {
  if (theta.empty()) throw InvalidArgument("exp_linear needs at least one variable");
  CircuitBuilder b(variables);
  std::vector<UnitId> factors;
  bool first = true;
  for (auto [var, coef] : theta) {
    const uint32_t card = b.cardinality(var);
    if (card == 0) throw ScopeError("X" + std::to_string(var) + " is not in the variable table");
    std::vector<double> v(card);
    for (uint32_t k = 0; k < card; ++k) v[k] = std::exp((first ? theta0 : 0.0) + coef * k);
    for (double x : v)
      if (!std::isfinite(x) || x == 0.0) throw DomainError("exponential overflows or underflows");
    factors.push_back(b.add_input(var, InputTable::from_values(std::move(v))));
    first = false;
  }
  const UnitId root = b.add_product(std::move(factors));
  PropertyFlags f;
  f.smooth = f.decomposable = f.structured = f.deterministic = f.omni = Status::kVerified;
  return finish(b.build(root, f));
}

Circuit uniform_circuit(const std::vector<Variable> &vars, double c) {
  if (vars.empty()) throw InvalidArgument("uniform circuit needs at least one variable");
  if (!(c > 0.0) || !std::isfinite(c)) throw InvalidArgument("uniform circuit constant must be positive");
  CircuitBuilder b(vars);
  std::vector<UnitId> factors;
  for (const Variable &v : b.variables()) {
    InputTable t = InputTable::ones(v.cardinality);
    if (factors.empty())
      for (double &x : t.values) x = c;
    factors.push_back(b.add_input(v.id, std::move(t)));
  }
  PropertyFlags f;
  f.smooth = f.decomposable = f.structured = f.deterministic = f.omni = Status::kVerified;
  return b.build(b.add_product(std::move(factors)), f);
}

uint64_t induced_term_count(const Circuit &c) {
  constexpr uint64_t kCap = std::numeric_limits<uint64_t>::max();
  std::vector<uint64_t> n(c.unit_count(), 1);
  for (UnitId id = 0; id < c.unit_count(); ++id) {
    const Unit &u = c.unit(id);
    if (u.is_sum()) {
      uint64_t t = 0;
      for (UnitId ch : u.children) t = n[ch] > kCap - t ? kCap : t + n[ch];
      n[id] = t;
    } else if (u.is_product()) {
      uint64_t t = 1;
      for (UnitId ch : u.children) t = (n[ch] != 0 && t > kCap / n[ch]) ? kCap : t * n[ch];
      n[id] = t;
    }
  }
  return n[c.output()];
}

Circuit expand_to_factorized(const Circuit &c, uint64_t budget) {
  if (!holds(c.flags().decomposable) && !check_property(c, Property::kDecomposable).ok())
    throw PropertyViolation("circuit is not decomposable", "Expansion: requires Dec");
  const Circuit s = holds(c.flags().smooth) || check_property(c, Property::kSmooth).ok() ? c : smooth_transform(c);
  const uint64_t total = induced_term_count(s);
  if (total > budget)
    throw BudgetExceeded("expansion needs " + std::to_string(total) + " terms, budget is " + std::to_string(budget));

  CircuitBuilder b(s.variables());
  struct Term {
    double weight = 1.0;
    std::vector<UnitId> factors;
  };
  std::vector<std::vector<Term>> terms(s.unit_count());
  for (UnitId id = 0; id < s.unit_count(); ++id) {
    const Unit &u = s.unit(id);
    std::vector<Term> &out = terms[id];
    if (u.is_input()) {
      if (u.is_constant())
        out.push_back({u.table.values[0], {}});
      else
        out.push_back({1.0, {b.add_input(u.var, u.table)}});
    } else if (u.is_sum()) {
      for (std::size_t i = 0; i < u.children.size(); ++i)
        for (const Term &t : terms[u.children[i]]) out.push_back({u.weights[i] * t.weight, t.factors});
    } else {
      out.push_back({});
      for (UnitId ch : u.children) {
        std::vector<Term> next;
        next.reserve(out.size() * terms[ch].size());
        for (const Term &l : out)
          for (const Term &r : terms[ch]) {
            Term t{l.weight * r.weight, l.factors};
            t.factors.insert(t.factors.end(), r.factors.begin(), r.factors.end());
            next.push_back(std::move(t));
          }
        out = std::move(next);
      }
    }
  }

  std::vector<UnitId> kids;
  std::vector<double> weights;
  for (Term &t : terms[s.output()]) {
    if (t.weight == 0.0) continue;
    kids.push_back(t.factors.empty() ? b.add_constant(1.0) : b.add_product(std::move(t.factors)));
    weights.push_back(t.weight);
  }
  if (kids.empty()) return zero_circuit(s.variables());
  PropertyFlags f;
  f.smooth = f.decomposable = f.structured = f.omni = Status::kVerified;
  f.deterministic = holds(c.flags().deterministic) ? c.flags().deterministic : Status::kUnknown;
  return b.build(*b.add_sum(std::move(kids), std::move(weights)), f);
}

}  // namespace pcq
