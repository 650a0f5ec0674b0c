#include "pcq/compile.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <istream>
#include <map>
#include <numeric>
#include <sstream>
#include <unordered_map>

#include <json.hpp>

#include "pcq/core.hpp"
#include "pcq/error.hpp"
#include "pcq/io.hpp"

namespace pcq {

namespace {

PropertyFlags all_verified() {
  PropertyFlags f;
  f.smooth = f.decomposable = f.structured = f.deterministic = f.omni = Status::kVerified;
  return f;
}

// ---- forests ----

ForestNode parse_forest_node(const nlohmann::json &j, const std::map<uint32_t, uint32_t> &cards,
                             std::vector<uint32_t> &path) {
  ForestNode n;
  if (!j.is_object()) throw InvalidArgument("forest node must be an object");
  if (j.contains("leaf")) {
    if (!j["leaf"].is_number()) throw InvalidArgument("leaf value must be a number");
    n.leaf = j["leaf"].get<double>();
    return n;
  }
  if (!j.contains("var") || !j.contains("children")) throw InvalidArgument("forest node needs 'leaf' or 'var' and 'children'");
  const auto var = j["var"].get<uint32_t>();
  auto it = cards.find(var);
  if (it == cards.end()) throw InvalidArgument("forest node tests undeclared variable X" + std::to_string(var));
  if (std::find(path.begin(), path.end(), var) != path.end())
    throw InvalidArgument("forest path tests X" + std::to_string(var) + " twice");
  n.var = var;
  const auto &kids = j["children"];
  if (!kids.is_array()) throw InvalidArgument("'children' must be an array");
  if (j.contains("groups")) {
    std::vector<uint8_t> seen(it->second, 0);
    for (const auto &g : j["groups"]) {
      std::vector<uint32_t> values;
      for (const auto &v : g) {
        const auto x = v.get<uint32_t>();
        if (x >= it->second || seen[x]) throw InvalidArgument("forest value groups must partition the domain");
        seen[x] = 1;
        values.push_back(x);
      }
      n.groups.push_back(std::move(values));
    }
    if (std::find(seen.begin(), seen.end(), 0) != seen.end())
      throw InvalidArgument("forest value groups must partition the domain");
  } else {
    for (uint32_t v = 0; v < it->second; ++v) n.groups.push_back({v});
  }
  if (kids.size() != n.groups.size()) throw InvalidArgument("forest node needs one child per value group");
  path.push_back(var);
  for (const auto &k : kids) n.children.push_back(parse_forest_node(k, cards, path));
  path.pop_back();
  return n;
}

}  // namespace

Forest parse_forest_json(const std::string &text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error &e) {
    throw ParseError(e.what(), 1, static_cast<int>(e.byte));
  }
  Forest f;
  try {
    std::map<uint32_t, uint32_t> cards;
    for (const auto &v : j.at("variables")) {
      Variable var{v.at("id").get<uint32_t>(), v.at("card").get<uint32_t>()};
      f.variables.push_back(var);
      cards[var.id] = var.cardinality;
    }
    for (const auto &t : j.at("trees")) {
      Tree tree;
      tree.weight = t.contains("weight") ? t["weight"].get<double>() : 1.0;
      std::vector<uint32_t> path;
      tree.root = parse_forest_node(t.at("root"), cards, path);
      f.trees.push_back(std::move(tree));
    }
  } catch (const nlohmann::json::exception &e) {
    throw InvalidArgument(std::string("malformed forest: ") + e.what());
  }
  return f;
}

double forest_evaluate(const Forest &f, const Assignment &x) {
  double total = 0.0;
  for (const Tree &t : f.trees) {
    const ForestNode *n = &t.root;
    while (n->var) {
      const uint32_t value = x.at(*n->var);
      std::size_t k = 0;
      while (k < n->groups.size() && std::find(n->groups[k].begin(), n->groups[k].end(), value) == n->groups[k].end())
        ++k;
      if (k == n->groups.size()) throw InvalidAssignment("value outside the forest's value groups");
      n = &n->children[k];
    }
    total += t.weight * n->leaf;
  }
  return total;
}

Circuit forest_to_circuit(const Forest &f) {
  if (f.trees.empty()) throw InvalidArgument("forest has no trees");
  if (f.variables.empty()) throw InvalidArgument("forest has no variables");
  CircuitBuilder b(f.variables);
  std::map<std::pair<uint32_t, std::vector<uint8_t>>, UnitId> inputs;
  auto input = [&](uint32_t var, std::vector<uint8_t> mask) {
    auto key = std::make_pair(var, mask);
    auto it = inputs.find(key);
    if (it != inputs.end()) return it->second;
    std::vector<double> values(mask.begin(), mask.end());
    const UnitId id = b.add_input(var, InputTable::from_values(std::move(values)));
    inputs.emplace(std::move(key), id);
    return id;
  };

  std::vector<UnitId> kids;
  std::vector<double> weights;
  std::map<uint32_t, std::vector<uint8_t>> path;
  std::function<void(const ForestNode &, double)> walk = [&](const ForestNode &n, double w) {
    if (!n.var) {
      const double weight = w * n.leaf;
      if (weight == 0.0) return;
      std::vector<UnitId> factors;
      for (const Variable &v : b.variables()) {
        auto it = path.find(v.id);
        factors.push_back(input(v.id, it != path.end() ? it->second : std::vector<uint8_t>(v.cardinality, 1)));
      }
      kids.push_back(b.add_product(std::move(factors)));
      weights.push_back(weight);
      return;
    }
    if (path.contains(*n.var)) throw InvalidArgument("a path tests X" + std::to_string(*n.var) + " twice");
    for (std::size_t k = 0; k < n.children.size(); ++k) {
      std::vector<uint8_t> mask(b.cardinality(*n.var), 0);
      for (uint32_t v : n.groups[k]) mask[v] = 1;
      path[*n.var] = std::move(mask);
      walk(n.children[k], w);
    }
    path.erase(*n.var);
  };
  for (const Tree &t : f.trees) {
    if (!std::isfinite(t.weight)) throw InvalidArgument("tree weights must be finite");
    walk(t.root, t.weight);
  }
  if (kids.empty()) return zero_circuit(f.variables);
  PropertyFlags flags = all_verified();
  if (f.trees.size() > 1) flags.deterministic = Status::kUnknown;
  auto root = b.add_sum(std::move(kids), std::move(weights));
  if (!root) return zero_circuit(f.variables);
  return b.build(*root, flags);
}

// ---- CNF ----

Cnf parse_dimacs(std::istream &in) {
  Cnf cnf;
  bool header = false;
  std::string line;
  int number = 0;
  std::vector<int> clause;
  while (std::getline(in, line)) {
    ++number;
    std::istringstream ls(line);
    std::string tok;
    if (!(ls >> tok)) continue;
    if (tok == "c") continue;
    if (tok == "%") break;
    if (tok == "p") {
      std::string fmt;
      long n = -1, m = -1;
      if (!(ls >> fmt >> n >> m) || fmt != "cnf" || n < 0 || m < 0) throw ParseError("bad problem line", number, 1);
      cnf.num_vars = static_cast<uint32_t>(n);
      header = true;
      continue;
    }
    if (!header) throw ParseError("clause before 'p cnf' line", number, 1);
    std::istringstream cs(line);
    long lit = 0;
    while (cs >> lit) {
      if (lit == 0) {
        if (clause.empty()) throw ParseError("empty clause", number, 1);
        cnf.clauses.push_back(std::move(clause));
        clause.clear();
        continue;
      }
      if (static_cast<uint64_t>(std::labs(lit)) > cnf.num_vars) throw ParseError("literal out of range", number, 1);
      clause.push_back(static_cast<int>(lit));
    }
    if (!cs.eof()) throw ParseError("bad literal", number, 1);
  }
  if (!header) throw ParseError("missing 'p cnf' line", number + 1, 1);
  if (!clause.empty()) cnf.clauses.push_back(std::move(clause));
  return cnf;
}

Cnf parse_dimacs_string(const std::string &text) {
  std::istringstream in(text);
  return parse_dimacs(in);
}

uint64_t count_models(const Cnf &cnf) {
  if (cnf.num_vars > 40) throw BudgetExceeded("too many variables for brute-force counting");
  uint64_t count = 0;
  for (uint64_t x = 0; x < (uint64_t{1} << cnf.num_vars); ++x) {
    bool sat = true;
    for (const auto &c : cnf.clauses) {
      bool any = false;
      for (int lit : c) {
        const bool value = (x >> (std::abs(lit) - 1)) & 1U;
        if ((lit > 0) == value) {
          any = true;
          break;
        }
      }
      if (!any) {
        sat = false;
        break;
      }
    }
    if (sat) ++count;
  }
  return count;
}

Gadgets cnf_to_gadgets(const Cnf &cnf) {
  const uint32_t n = cnf.num_vars;
  const auto m = static_cast<uint32_t>(cnf.clauses.size());
  if (n == 0 || m == 0) throw InvalidArgument("CNF needs at least one variable and one clause");
  for (const auto &c : cnf.clauses) {
    if (c.size() != 3) throw InvalidArgument("every clause must have exactly 3 literals");
    if (std::abs(c[0]) == std::abs(c[1]) || std::abs(c[0]) == std::abs(c[2]) || std::abs(c[1]) == std::abs(c[2]))
      throw InvalidArgument("clause literals must use distinct variables");
    for (int lit : c)
      if (lit == 0 || static_cast<uint32_t>(std::abs(lit)) > n) throw InvalidArgument("literal out of range");
  }
  auto id = [m](uint32_t i, uint32_t j) { return (i - 1) * m + j; };
  std::vector<Variable> vars;
  for (uint32_t i = 1; i <= n; ++i)
    for (uint32_t j = 1; j <= m; ++j) vars.push_back({id(i, j), 2});

  Gadgets g;
  {
    CircuitBuilder b(vars);
    std::vector<UnitId> as;
    for (uint32_t i = 1; i <= n; ++i) {
      std::vector<UnitId> pos, neg;
      for (uint32_t j = 1; j <= m; ++j) {
        pos.push_back(b.add_input(id(i, j), InputTable::indicator(2, 1)));
        neg.push_back(b.add_input(id(i, j), InputTable::indicator(2, 0)));
      }
      const UnitId b1 = b.add_product(std::move(pos));
      const UnitId b2 = b.add_product(std::move(neg));
      as.push_back(*b.add_sum({b1, b2}, {1.0, 1.0}));
    }
    g.beta = b.build(b.add_product(std::move(as)), all_verified());
  }
  {
    CircuitBuilder b(vars);
    std::vector<UnitId> ds;
    for (uint32_t j = 1; j <= m; ++j) {
      const auto &c = cnf.clauses[j - 1];
      std::vector<UnitId> free_units(n + 1, 0);
      std::vector<std::array<UnitId, 2>> lits(n + 1);
      for (uint32_t i = 1; i <= n; ++i) {
        lits[i] = {b.add_input(id(i, j), InputTable::indicator(2, 0)), b.add_input(id(i, j), InputTable::indicator(2, 1))};
        const bool in_clause = std::any_of(c.begin(), c.end(), [i](int lit) { return static_cast<uint32_t>(std::abs(lit)) == i; });
        if (!in_clause) free_units[i] = *b.add_sum({lits[i][1], lits[i][0]}, {1.0, 1.0});
      }
      std::vector<UnitId> es;
      for (uint32_t h = 0; h < 8; ++h) {
        std::map<uint32_t, uint32_t> model;
        bool satisfied = false;
        for (int k = 0; k < 3; ++k) {
          const uint32_t value = (h >> k) & 1U;
          model[static_cast<uint32_t>(std::abs(c[k]))] = value;
          satisfied = satisfied || ((c[k] > 0) == (value == 1));
        }
        if (!satisfied) continue;
        std::vector<UnitId> factors;
        for (uint32_t i = 1; i <= n; ++i) {
          auto it = model.find(i);
          factors.push_back(it == model.end() ? free_units[i] : lits[i][it->second]);
        }
        es.push_back(b.add_product(std::move(factors)));
      }
      ds.push_back(*b.add_sum(es, std::vector<double>(es.size(), 1.0)));
    }
    g.gamma = b.build(b.add_product(std::move(ds)), all_verified());
  }
  return g;
}

// ---- regression circuits ----

RegressionCircuit parse_regression(std::istream &in) {
  RegressionCircuit r;
  std::unordered_map<uint64_t, uint32_t> ids;
  std::optional<uint64_t> last;
  std::map<uint32_t, uint32_t> cards;
  bool header = false;
  bool have_out = false;
  std::string line;
  int number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (auto h = line.find('#'); h != std::string::npos) line.erase(h);
    std::istringstream ls(line);
    std::string kw;
    if (!(ls >> kw)) continue;
    auto fail = [number](const std::string &what) { throw ParseError(what, number, 1); };
    auto uint = [&](const char *what) {
      long long v = -1;
      if (!(ls >> v) || v < 0) fail(std::string("expected ") + what);
      return static_cast<uint64_t>(v);
    };
    auto uid = [&]() {
      const uint64_t u = uint("unit id");
      if (last && u <= *last) fail("unit ids must strictly increase");
      last = u;
      return u;
    };
    auto child = [&]() {
      const uint64_t u = uint("child id");
      auto it = ids.find(u);
      if (it == ids.end()) fail("child " + std::to_string(u) + " is not defined before its parent");
      return it->second;
    };
    if (!header) {
      std::string version;
      if (kw != "rgc" || !(ls >> version) || version != "1") fail("missing 'rgc 1' header");
      header = true;
      continue;
    }
    if (kw == "var") {
      const auto id = static_cast<uint32_t>(uint("variable id"));
      const auto card = static_cast<uint32_t>(uint("cardinality"));
      r.variables.push_back({id, card});
      cards[id] = card;
    } else if (kw == "inp") {
      const uint64_t u = uid();
      Gate g;
      g.kind = GateKind::kInput;
      g.var = static_cast<uint32_t>(uint("variable"));
      if (!cards.contains(g.var)) fail("input over undeclared variable");
      std::string tok;
      while (ls >> tok) {
        if (tok != "0" && tok != "1") fail("support mask entries must be 0 or 1");
        g.support.push_back(tok == "1" ? 1 : 0);
      }
      if (g.support.size() != cards[g.var]) fail("support mask length differs from the cardinality");
      ids[u] = static_cast<uint32_t>(r.gates.size());
      r.gates.push_back(std::move(g));
    } else if (kw == "and" || kw == "or") {
      const uint64_t u = uid();
      Gate g;
      g.kind = kw == "and" ? GateKind::kAnd : GateKind::kOr;
      const uint64_t n = uint("child count");
      if (n == 0) fail("gate needs children");
      for (uint64_t i = 0; i < n; ++i) {
        g.children.push_back(child());
        if (g.kind == GateKind::kOr) {
          std::string tok;
          if (!(ls >> tok)) fail("expected offset");
          try {
            g.phi.push_back(parse_real(tok));
          } catch (const Error &) {
            fail("bad offset '" + tok + "'");
          }
        }
      }
      ids[u] = static_cast<uint32_t>(r.gates.size());
      r.gates.push_back(std::move(g));
    } else if (kw == "out") {
      r.output = child();
      have_out = true;
    } else {
      fail("unknown keyword '" + kw + "'");
    }
    std::string extra;
    if (kw != "inp" && ls >> extra) fail("unexpected token '" + extra + "'");
  }
  if (!header) throw ParseError("missing 'rgc 1' header", number + 1, 1);
  if (!have_out) throw ParseError("missing 'out' line", number + 1, 1);
  return r;
}

RegressionCircuit parse_regression_string(const std::string &text) {
  std::istringstream in(text);
  return parse_regression(in);
}

double regression_evaluate(const RegressionCircuit &r, const Assignment &x) {
  std::vector<uint8_t> s(r.gates.size());
  std::vector<double> f(r.gates.size());
  for (std::size_t k = 0; k <= r.output; ++k) {
    const Gate &g = r.gates[k];
    switch (g.kind) {
      case GateKind::kInput:
        s[k] = g.support.at(x.at(g.var));
        f[k] = 0.0;
        break;
      case GateKind::kAnd:
        s[k] = 1;
        f[k] = 0.0;
        for (uint32_t c : g.children) {
          s[k] = s[k] && s[c];
          f[k] += f[c];
        }
        break;
      case GateKind::kOr:
        s[k] = 0;
        f[k] = 0.0;
        for (std::size_t i = 0; i < g.children.size(); ++i) {
          const uint32_t c = g.children[i];
          if (!s[c]) continue;
          s[k] = 1;
          f[k] += g.phi[i] + f[c];
        }
        break;
    }
  }
  return f[r.output];
}

Circuit regression_to_circuit(const RegressionCircuit &r) {
  if (r.gates.empty() || r.output >= r.gates.size()) throw InvalidArgument("regression circuit has no output gate");
  if (r.gates[r.output].kind != GateKind::kOr) throw InvalidArgument("regression circuit output must be an OR gate");
  CircuitBuilder b(r.variables);
  std::vector<ScopeSet> scope(r.gates.size());
  std::vector<UnitId> sup(r.gates.size()), val(r.gates.size());
  for (std::size_t k = 0; k < r.gates.size(); ++k) {
    const Gate &g = r.gates[k];
    for (uint32_t c : g.children)
      if (c >= k) throw InvalidArgument("gate child defined after its parent");
    if (g.kind == GateKind::kInput) {
      const uint32_t card = b.cardinality(g.var);
      if (card == 0 || g.support.size() != card) throw InvalidArgument("malformed input gate");
      scope[k] = ScopeSet::single(g.var);
      sup[k] = b.add_input(g.var, InputTable::from_values(std::vector<double>(g.support.begin(), g.support.end())));
      val[k] = b.add_input(g.var, InputTable::zeros(card));
    } else if (g.kind == GateKind::kAnd) {
      if (g.children.size() < 2) throw InvalidArgument("AND gate needs at least two children");
      std::vector<UnitId> sups;
      for (uint32_t c : g.children) {
        if (scope[k].intersects(scope[c])) throw InvalidArgument("AND gate children must have disjoint scopes");
        scope[k] |= scope[c];
        sups.push_back(sup[c]);
      }
      sup[k] = b.add_product(sups);
      std::vector<UnitId> terms;
      for (std::size_t i = 0; i < g.children.size(); ++i) {
        std::vector<UnitId> factors = sups;
        factors[i] = val[g.children[i]];
        terms.push_back(b.add_product(std::move(factors)));
      }
      val[k] = *b.add_sum(terms, std::vector<double>(terms.size(), 1.0));
    } else {
      if (g.phi.size() != g.children.size()) throw InvalidArgument("OR gate needs one offset per child");
      std::vector<UnitId> sups, kids;
      std::vector<double> weights;
      for (std::size_t i = 0; i < g.children.size(); ++i) {
        const uint32_t c = g.children[i];
        scope[k] |= scope[c];
        sups.push_back(sup[c]);
        kids.push_back(sup[c]);
        weights.push_back(g.phi[i]);
        kids.push_back(val[c]);
        weights.push_back(1.0);
      }
      sup[k] = *b.add_sum(sups, std::vector<double>(sups.size(), 1.0));
      val[k] = *b.add_sum(std::move(kids), std::move(weights));
    }
  }
  PropertyFlags flags;
  flags.decomposable = Status::kVerified;
  Circuit c = b.build(val[r.output], flags);
  if (!check_property(c, Property::kSmooth).ok()) c = smooth_transform(c);
  flags = c.flags();
  flags.smooth = Status::kVerified;
  return c.with_flags(flags);
}

// ---- random circuits ----

Vtree random_vtree(Rng &rng, const std::vector<uint32_t> &vars) {
  if (vars.empty()) throw InvalidArgument("vtree needs at least one variable");
  std::vector<uint32_t> order = vars;
  for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);
  Vtree t;
  std::function<int(std::size_t, std::size_t)> build = [&](std::size_t lo, std::size_t hi) -> int {
    Vtree::Node node;
    if (hi - lo == 1) {
      node.var = order[lo];
      node.scope = ScopeSet::single(order[lo]);
    } else {
      const std::size_t mid = lo + 1 + rng.below(hi - lo - 1);
      node.left = build(lo, mid);
      node.right = build(mid, hi);
      node.scope = t.nodes[node.left].scope | t.nodes[node.right].scope;
    }
    t.nodes.push_back(node);
    return static_cast<int>(t.nodes.size()) - 1;
  };
  build(0, order.size());
  return t;
}

namespace {

class Generator {
 public:
  Generator(uint64_t seed, const RandomOptions &o, std::vector<Variable> vars)
      : rng_(seed), o_(o), b_(vars), vars_(b_.variables()) {}

  Circuit run() {
    std::vector<uint32_t> ids;
    for (const Variable &v : vars_) ids.push_back(v.id);
    PropertyFlags flags;
    flags.smooth = flags.decomposable = Status::kVerified;
    UnitId root = 0;
    if (o_.structured) {
      vtree_ = o_.vtree ? *o_.vtree : random_vtree(rng_, ids);
      for (const auto &n : vtree_.nodes)
        if (n.left < 0 && b_.cardinality(n.var) == 0) throw InvalidArgument("vtree mentions an unknown variable");
      if (vtree_.nodes[vtree_.root()].scope != scope_of(ids)) throw InvalidArgument("vtree does not cover the variables");
      flags.structured = Status::kVerified;
      flags.compat_class = "vtree-" + vtree_signature();
      root = o_.deterministic ? det_node(vtree_.root(), full_constraint()) : structured_root();
    } else {
      root = o_.deterministic ? det_free(scope_of(ids), full_constraint()) : free_unit(scope_of(ids));
    }
    if (o_.deterministic) flags.deterministic = Status::kVerified;
    return b_.build(root, flags);
  }

 private:
  using Constraint = std::vector<uint32_t>;  // allowed-value bitmask per variable slot

  static ScopeSet scope_of(const std::vector<uint32_t> &ids) {
    ScopeSet s;
    for (uint32_t v : ids) s.insert(v);
    return s;
  }

  Constraint full_constraint() const {
    Constraint c;
    for (const Variable &v : vars_) c.push_back(v.cardinality >= 32 ? ~0U : (1U << v.cardinality) - 1);
    return c;
  }

  std::size_t slot(uint32_t var) const {
    for (std::size_t i = 0; i < vars_.size(); ++i)
      if (vars_[i].id == var) return i;
    return 0;
  }

  std::string vtree_signature() const {
    std::string s;
    for (const auto &n : vtree_.nodes) s += n.left < 0 ? "v" + std::to_string(n.var) : "(" + std::to_string(n.left) + "," + std::to_string(n.right) + ")";
    return std::to_string(std::hash<std::string>{}(s));
  }

  bool over_cap() const { return b_.size() >= o_.max_units; }

  std::vector<double> weights(std::size_t k) {
    std::vector<double> w(k);
    for (double &x : w) x = rng_.uniform(0.05, 1.0);
    if (o_.normalized) {
      const double s = std::accumulate(w.begin(), w.end(), 0.0);
      for (double &x : w) x /= s;
    }
    return w;
  }

  UnitId leaf(uint32_t var, uint32_t allowed, bool allow_zeros) {
    const uint32_t card = b_.cardinality(var);
    std::vector<double> v(card, 0.0);
    bool any = false;
    for (uint32_t k = 0; k < card; ++k) {
      if (!((allowed >> k) & 1U)) continue;
      if (allow_zeros && rng_.chance(o_.zero_probability)) continue;
      v[k] = rng_.uniform(0.05, 1.0);
      any = true;
    }
    if (!any) {
      for (uint32_t k = 0; k < card; ++k)
        if ((allowed >> k) & 1U) {
          v[k] = rng_.uniform(0.05, 1.0);
          break;
        }
    }
    if (o_.normalized) {
      const double s = std::accumulate(v.begin(), v.end(), 0.0);
      for (double &x : v) x /= s;
    }
    return b_.add_input(var, InputTable::from_values(std::move(v)));
  }

  // Structured, non-deterministic: pools of units per vtree node.
  UnitId structured_root() {
    std::vector<std::vector<UnitId>> pools(vtree_.nodes.size());
    for (std::size_t i = 0; i < vtree_.nodes.size(); ++i) {
      const auto &n = vtree_.nodes[i];
      const std::size_t size = static_cast<int>(i) == vtree_.root() ? 1 : std::max<uint32_t>(1, o_.pool);
      for (std::size_t k = 0; k < size; ++k) {
        if (n.left < 0) {
          pools[i].push_back(leaf(n.var, ~0U, true));
          continue;
        }
        const std::size_t nk = over_cap() ? 1 : 1 + rng_.below(o_.max_children);
        std::vector<UnitId> kids;
        for (std::size_t c = 0; c < nk; ++c) {
          const auto &lp = pools[n.left];
          const auto &rp = pools[n.right];
          kids.push_back(b_.add_product({lp[rng_.below(lp.size())], rp[rng_.below(rp.size())]}));
        }
        pools[i].push_back(*b_.add_sum(kids, weights(kids.size())));
      }
    }
    return pools[vtree_.root()][0];
  }

  // Picks a variable of `scope` with at least two allowed values and
  // partitions them into groups.
  std::optional<std::pair<uint32_t, std::vector<uint32_t>>> split(const ScopeSet &scope, const Constraint &c) {
    std::vector<uint32_t> candidates;
    for (uint32_t v : scope.vars())
      if (std::popcount(c[slot(v)]) >= 2) candidates.push_back(v);
    if (candidates.empty() || over_cap()) return std::nullopt;
    const uint32_t var = candidates[rng_.below(candidates.size())];
    std::vector<uint32_t> values;
    for (uint32_t k = 0; k < 32; ++k)
      if ((c[slot(var)] >> k) & 1U) values.push_back(k);
    for (std::size_t i = values.size(); i > 1; --i) std::swap(values[i - 1], values[rng_.below(i)]);
    const std::size_t groups = 2 + rng_.below(std::min<std::size_t>(o_.max_children, values.size()) - 1);
    std::vector<uint32_t> masks(groups, 0);
    for (std::size_t i = 0; i < values.size(); ++i)
      masks[i < groups ? i : rng_.below(groups)] |= 1U << values[i];
    return std::make_pair(var, masks);
  }

  // Optionally narrows one variable of `scope` to a random nonempty subset.
  Constraint perturb(const ScopeSet &scope, Constraint c) {
    if (!rng_.chance(0.5)) return c;
    auto vars = scope.vars();
    const uint32_t var = vars[rng_.below(vars.size())];
    const uint32_t m = c[slot(var)];
    if (std::popcount(m) < 2) return c;
    uint32_t sub = 0;
    while (sub == 0) sub = m & static_cast<uint32_t>(rng_.next());
    c[slot(var)] = sub;
    return c;
  }

  Constraint restrict(const Constraint &c, const ScopeSet &scope) const {
    Constraint r = full_constraint();
    for (uint32_t v : scope.vars()) r[slot(v)] = c[slot(v)];
    return r;
  }

  // Deterministic and structured (PSDD-style).
  UnitId det_node(int node, const Constraint &c) {
    const auto &n = vtree_.nodes[node];
    const Constraint key_c = restrict(c, n.scope);
    auto key = std::make_pair(node, key_c);
    if (auto it = det_memo_.find(key); it != det_memo_.end()) return it->second;
    UnitId out = 0;
    if (n.left < 0) {
      out = leaf(n.var, key_c[slot(n.var)], false);
    } else {
      const ScopeSet &ls = vtree_.nodes[n.left].scope;
      const ScopeSet &rs = vtree_.nodes[n.right].scope;
      auto s = split(ls, key_c);
      if (!s) {
        out = b_.add_product({det_node(n.left, key_c), det_node(n.right, key_c)});
      } else {
        std::vector<UnitId> kids;
        for (uint32_t mask : s->second) {
          Constraint prime = key_c;
          prime[slot(s->first)] = mask;
          kids.push_back(b_.add_product({det_node(n.left, prime), det_node(n.right, perturb(rs, key_c))}));
        }
        out = *b_.add_sum(kids, weights(kids.size()));
      }
    }
    det_memo_.emplace(std::move(key), out);
    return out;
  }

  std::pair<ScopeSet, ScopeSet> random_split(const ScopeSet &scope) {
    auto vars = scope.vars();
    for (std::size_t i = vars.size(); i > 1; --i) std::swap(vars[i - 1], vars[rng_.below(i)]);
    const std::size_t mid = 1 + rng_.below(vars.size() - 1);
    ScopeSet a, b;
    for (std::size_t i = 0; i < vars.size(); ++i) (i < mid ? a : b).insert(vars[i]);
    return {a, b};
  }

  // Deterministic, product splits drawn independently per unit.
  UnitId det_free(const ScopeSet &scope, const Constraint &c) {
    const Constraint key_c = restrict(c, scope);
    auto key = std::make_pair(scope, key_c);
    if (auto it = free_memo_.find(key); it != free_memo_.end()) return it->second;
    UnitId out = 0;
    const auto vars = scope.vars();
    if (vars.size() == 1) {
      out = leaf(vars[0], key_c[slot(vars[0])], false);
    } else {
      auto [ls, rs] = random_split(scope);
      auto s = split(ls, key_c);
      if (!s) {
        out = b_.add_product({det_free(ls, key_c), det_free(rs, key_c)});
      } else {
        std::vector<UnitId> kids;
        for (uint32_t mask : s->second) {
          Constraint prime = key_c;
          prime[slot(s->first)] = mask;
          auto [l2, r2] = random_split(scope);
          // Keep the split variable on the left so the primes stay disjoint.
          if (!l2.contains(s->first)) std::swap(l2, r2);
          kids.push_back(b_.add_product({det_free(l2, prime), det_free(r2, perturb(r2, prime))}));
        }
        out = *b_.add_sum(kids, weights(kids.size()));
      }
    }
    free_memo_.emplace(std::move(key), out);
    return out;
  }

  // Smooth and decomposable only.
  UnitId free_unit(const ScopeSet &scope) {
    auto &pool = plain_pool_[scope];
    if (pool.size() >= std::max<uint32_t>(1, o_.pool) || (over_cap() && !pool.empty()))
      return pool[rng_.below(pool.size())];
    const auto vars = scope.vars();
    UnitId out = 0;
    if (vars.size() == 1) {
      out = leaf(vars[0], ~0U, true);
    } else {
      const std::size_t nk = over_cap() ? 1 : 1 + rng_.below(o_.max_children);
      std::vector<UnitId> kids;
      for (std::size_t k = 0; k < nk; ++k) {
        auto [a, b] = random_split(scope);
        const UnitId left = free_unit(a);
        const UnitId right = free_unit(b);
        kids.push_back(b_.add_product({left, right}));
      }
      out = *b_.add_sum(kids, weights(kids.size()));
    }
    plain_pool_[scope].push_back(out);
    return out;
  }

  Rng rng_;
  const RandomOptions &o_;
  CircuitBuilder b_;
  std::vector<Variable> vars_;
  Vtree vtree_;
  std::map<std::pair<int, Constraint>, UnitId> det_memo_;
  std::map<std::pair<ScopeSet, Constraint>, UnitId> free_memo_;
  std::map<ScopeSet, std::vector<UnitId>> plain_pool_;
};

}  // namespace

Circuit random_circuit(uint64_t seed, const RandomOptions &options) {
  std::vector<Variable> vars;
  if (options.variables) {
    vars = *options.variables;
  } else {
    if (options.nvars == 0) throw InvalidArgument("random circuit needs at least one variable");
    if (options.cardinality < 2 || options.cardinality > 31) throw InvalidArgument("cardinality must be in [2, 31]");
    Rng card_rng(seed ^ 0x5bd1e995ULL);
    for (uint32_t i = 1; i <= options.nvars; ++i) {
      uint32_t card = options.cardinality;
      if (options.max_cardinality > options.cardinality)
        card += static_cast<uint32_t>(card_rng.below(options.max_cardinality - options.cardinality + 1));
      vars.push_back({i, card});
    }
  }
  if (options.max_children < 2) throw InvalidArgument("max_children must be at least 2");
  Generator g(seed, options, vars);
  return g.run();
}

RandomOptions random_options_from_flags(const std::string &flags, uint32_t nvars) {
  RandomOptions o;
  o.nvars = nvars;
  std::istringstream in(flags);
  std::string tok;
  while (std::getline(in, tok, ',')) {
    if (tok.empty() || tok == "smooth" || tok == "dec") continue;
    if (tok == "sd") {
      o.structured = true;
    } else if (tok == "det") {
      o.deterministic = true;
    } else if (tok == "norm") {
      o.normalized = true;
    } else {
      throw InvalidArgument("unsupported generator flag '" + tok + "'");
    }
  }
  return o;
}

}  // namespace pcq
