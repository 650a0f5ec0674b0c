#include <doctest.h>

#include "helpers.hpp"
#include "pcq/compile.hpp"
#include "pcq/error.hpp"
#include "pcq/io.hpp"
#include "pcq/ops.hpp"

using namespace pcq;

namespace {

Assignment decode(const std::vector<Variable> &vars, uint64_t s) {
  Assignment x(vars.empty() ? 1 : vars.back().id + 1, 0);
  for (std::size_t i = vars.size(); i-- > 0;) {
    x[vars[i].id] = static_cast<uint32_t>(s % vars[i].cardinality);
    s /= vars[i].cardinality;
  }
  return x;
}

uint64_t states(const std::vector<Variable> &vars) {
  uint64_t n = 1;
  for (const Variable &v : vars) n *= v.cardinality;
  return n;
}

std::string random_forest_json(Rng &rng, uint32_t nvars, int trees) {
  std::function<std::string(std::vector<uint32_t>, int)> node = [&](std::vector<uint32_t> free, int depth) {
    if (free.empty() || depth == 0 || rng.chance(0.25)) return "{\"leaf\":" + std::to_string(rng.below(9)) + "}";
    const std::size_t k = rng.below(free.size());
    const uint32_t var = free[k];
    free.erase(free.begin() + static_cast<long>(k));
    const uint32_t card = var % 2 == 0 ? 3 : 2;
    std::string s = "{\"var\":" + std::to_string(var) + ",\"children\":[";
    for (uint32_t v = 0; v < card; ++v) s += (v ? "," : "") + node(free, depth - 1);
    return s + "]}";
  };
  std::string s = "{\"variables\":[";
  std::vector<uint32_t> all;
  for (uint32_t i = 1; i <= nvars; ++i) {
    s += (i > 1 ? "," : "") + std::string("{\"id\":") + std::to_string(i) + ",\"card\":" + (i % 2 == 0 ? "3" : "2") + "}";
    all.push_back(i);
  }
  s += "],\"trees\":[";
  for (int t = 0; t < trees; ++t)
    s += (t ? "," : "") + std::string("{\"weight\":") + std::to_string(0.5 * static_cast<double>(rng.below(4) + 1)) +
         ",\"root\":" + node(all, 3) + "}";
  return s + "]}";
}

Cnf random_cnf(Rng &rng, uint32_t n, uint32_t m) {
  Cnf cnf;
  cnf.num_vars = n;
  for (uint32_t j = 0; j < m; ++j) {
    std::vector<uint32_t> pool;
    for (uint32_t i = 1; i <= n; ++i) pool.push_back(i);
    std::vector<int> clause;
    for (int k = 0; k < 3; ++k) {
      const std::size_t idx = rng.below(pool.size());
      const int lit = static_cast<int>(pool[idx]);
      pool.erase(pool.begin() + static_cast<long>(idx));
      clause.push_back(rng.chance(0.5) ? lit : -lit);
    }
    cnf.clauses.push_back(clause);
  }
  return cnf;
}

}  // namespace

TEST_CASE("forest_to_circuit") {
  Forest leaf = parse_forest_json(R"({"variables":[{"id":1,"card":2}],"trees":[{"weight":1,"root":{"leaf":2.5}}]})");
  Circuit c = forest_to_circuit(leaf);
  CHECK(evaluate(c, Assignment{0, 0}) == 2.5);
  CHECK(evaluate(c, Assignment{0, 1}) == 2.5);

  Forest stump = parse_forest_json(
      R"({"variables":[{"id":1,"card":2}],"trees":[{"weight":1,"root":{"var":1,"children":[{"leaf":3},{"leaf":7}]}}]})");
  Circuit s = forest_to_circuit(stump);
  CHECK(s.root().children.size() == 2);
  CHECK(evaluate(s, Assignment{0, 0}) == 3.0);
  CHECK(evaluate(s, Assignment{0, 1}) == 7.0);

  Forest grouped = parse_forest_json(
      R"({"variables":[{"id":1,"card":4}],"trees":[{"weight":2,"root":{"var":1,"groups":[[0,1,2],[3]],"children":[{"leaf":1},{"leaf":5}]}}]})");
  Circuit g = forest_to_circuit(grouped);
  CHECK(evaluate(g, Assignment{0, 2}) == 2.0);
  CHECK(evaluate(g, Assignment{0, 3}) == 10.0);

  Rng rng(3);
  for (int k = 0; k < 20; ++k) {
    Forest f = parse_forest_json(random_forest_json(rng, 5, 3));
    Circuit fc = forest_to_circuit(f);
    CHECK(fc.flags().omni == Status::kVerified);
    CHECK(check_property(fc, Property::kSmooth).ok());
    CHECK(check_property(fc, Property::kDecomposable).ok());
    for (uint64_t i = 0; i < states(f.variables); ++i) {
      const Assignment x = decode(f.variables, i);
      CHECK(evaluate(fc, x) == forest_evaluate(f, x));
    }
    Circuit p = random_circuit(static_cast<uint64_t>(k), [&] {
      RandomOptions o = test::family(5, false, false);
      o.variables = f.variables;
      return o;
    }());
    CHECK(check_compatible(fc, p).verdict == Compatibility::kCompatible);
  }

  CHECK_THROWS_AS(forest_to_circuit(parse_forest_json(R"({"variables":[{"id":1,"card":2}],"trees":[]})")),
                  InvalidArgument);
  CHECK_THROWS_AS(parse_forest_json("{\"variables\":"), ParseError);
  CHECK_THROWS_AS(parse_forest_json(
                      R"({"variables":[{"id":1,"card":2}],"trees":[{"weight":1,"root":{"var":1,"children":[{"var":1,"children":[{"leaf":1},{"leaf":1}]},{"leaf":0}]}}]})"),
                  InvalidArgument);
}

TEST_CASE("dimacs and brute-force counting") {
  Cnf one = parse_dimacs_string("c comment\np cnf 3 1\n1 2 3 0\n");
  CHECK(one.num_vars == 3);
  CHECK(one.clauses.size() == 1);
  CHECK(count_models(one) == 7);
  CHECK_THROWS_AS(cnf_to_gadgets(parse_dimacs_string("p cnf 3 1\n1 2 0\n")), InvalidArgument);
  CHECK_THROWS_AS(parse_dimacs_string("p cnf 3 1\n1 4 2 0\n"), ParseError);
  CHECK_THROWS_AS(parse_dimacs_string("1 2 3 0\n"), ParseError);
}

TEST_CASE("cnf gadgets count models") {
  MultiplyOptions o;
  o.expansion_budget = 1 << 16;
  Gadgets g = cnf_to_gadgets(parse_dimacs_string("p cnf 3 1\n1 2 3 0\n"));
  for (Property p : {Property::kSmooth, Property::kDecomposable, Property::kStructured, Property::kDeterministic}) {
    CHECK(check_property(g.beta, p).ok());
    CHECK(check_property(g.gamma, p).ok());
  }
  CHECK(integrate(multiply(g.beta, g.gamma, o).circuit) == 7.0);

  std::string unsat = "p cnf 3 8\n";
  for (int m = 0; m < 8; ++m)
    unsat += std::to_string((m & 1) ? 1 : -1) + " " + std::to_string((m & 2) ? 2 : -2) + " " +
             std::to_string((m & 4) ? 3 : -3) + " 0\n";
  Gadgets u = cnf_to_gadgets(parse_dimacs_string(unsat));
  CHECK(u.beta.variables().size() == 24);
  CHECK(integrate(multiply(u.beta, u.gamma, o).circuit) == 0.0);

  Rng rng(17);
  for (int k = 0; k < 10; ++k) {
    Cnf cnf = random_cnf(rng, 4, 5);
    Gadgets gg = cnf_to_gadgets(cnf);
    CHECK(integrate(multiply(gg.beta, gg.gamma, o).circuit) == static_cast<double>(count_models(cnf)));
  }
}

TEST_CASE("regression_to_circuit") {
  RegressionCircuit single = parse_regression_string("rgc 1\nvar 1 2\ninp 0 1 1 1\nout 0\n");
  CHECK_THROWS_AS(regression_to_circuit(single), InvalidArgument);
  CHECK(regression_evaluate(single, Assignment{0, 1}) == 0.0);

  RegressionCircuit orr = parse_regression_string(
      "rgc 1\nvar 1 2\ninp 0 1 1 0\ninp 1 1 0 1\nor 2 2 0 1.5 1 -2\nout 2\n");
  Circuit oc = regression_to_circuit(orr);
  CHECK(evaluate(oc, Assignment{0, 0}) == 1.5);
  CHECK(evaluate(oc, Assignment{0, 1}) == -2.0);

  const std::string nested =
      "rgc 1\nvar 1 2\nvar 2 2\nvar 3 2\n"
      "inp 0 1 1 0\ninp 1 1 0 1\ninp 2 2 1 0\ninp 3 2 0 1\ninp 4 3 1 1\n"
      "or 5 2 0 0.5 1 2\nor 6 2 2 -1 3 4\nand 7 2 5 6\nor 8 1 4 0.25\nand 9 2 7 8\nor 10 1 9 3\nout 10\n";
  RegressionCircuit r = parse_regression_string(nested);
  Circuit rc = regression_to_circuit(r);
  CHECK(check_property(rc, Property::kSmooth).ok());
  CHECK(check_property(rc, Property::kDecomposable).ok());
  CHECK(rc.edge_count() <= 8 * (r.gates.size() + 4));
  for (uint64_t i = 0; i < 8; ++i) {
    const Assignment x = decode(r.variables, i);
    CHECK(evaluate(rc, x) == doctest::Approx(regression_evaluate(r, x)).epsilon(1e-12));
  }
  CHECK_THROWS_AS(parse_regression_string("rgc 1\nvar 1 2\nor 0 1 3 1\nout 0\n"), ParseError);
}

TEST_CASE("random_circuit") {
  for (uint64_t seed = 0; seed < 20; ++seed) {
    RandomOptions o = random_options_from_flags("sd,det,norm", 6);
    Circuit a = random_circuit(seed, o);
    Circuit b = random_circuit(seed, o);
    CHECK(write_circuit_string(a) == write_circuit_string(b));
    CHECK(check_property(a, Property::kStructured).ok());
    CHECK(check_property(a, Property::kDeterministic).status == Status::kVerified);
    CHECK(integrate(a) == doctest::Approx(1.0));

    Circuit plain = random_circuit(seed, random_options_from_flags("smooth,dec", 6));
    CHECK(check_property(plain, Property::kSmooth).ok());
    CHECK(check_property(plain, Property::kDecomposable).ok());
  }
  CHECK_THROWS_AS(random_options_from_flags("sd,bogus", 4), InvalidArgument);

  Rng rng(9);
  Vtree vt = random_vtree(rng, {1, 2, 3, 4, 5});
  RandomOptions o = test::family(5, true, false);
  o.vtree = vt;
  Circuit c = random_circuit(1, o);
  for (const Unit &u : c.units()) {
    if (!u.is_product() || u.children.size() != 2) continue;
    bool found = false;
    for (const Vtree::Node &n : vt.nodes)
      if (n.left >= 0 && n.scope == u.scope) {
        const ScopeSet &l = vt.nodes[static_cast<std::size_t>(n.left)].scope;
        const ScopeSet &r = vt.nodes[static_cast<std::size_t>(n.right)].scope;
        const ScopeSet &a = c.unit(u.children[0]).scope;
        const ScopeSet &b = c.unit(u.children[1]).scope;
        found = (a == l && b == r) || (a == r && b == l);
      }
    CHECK(found);
  }
}
