#include <doctest.h>

#include "helpers.hpp"
#include "pcq/error.hpp"
#include "pcq/ops.hpp"

using namespace pcq;
using pcq::test::close;

namespace {

std::vector<Variable> binary(uint32_t n) {
  std::vector<Variable> v;
  for (uint32_t i = 1; i <= n; ++i) v.push_back({i, 2});
  return v;
}

// Sum whose children split {X1}{X2X3} and {X1X2}{X3}.
Circuit crossing_circuit() {
  CircuitBuilder b(binary(3));
  UnitId x1 = b.add_input(1, InputTable::from_values({0.4, 0.6}));
  UnitId x2 = b.add_input(2, InputTable::from_values({0.3, 0.7}));
  UnitId x3 = b.add_input(3, InputTable::from_values({0.2, 0.8}));
  UnitId p23 = b.add_product({x2, x3});
  UnitId p12 = b.add_product({x1, x2});
  UnitId a = b.add_product({x1, p23});
  UnitId c = b.add_product({p12, x3});
  return b.build(*b.add_sum({a, c}, {0.5, 0.5}));
}

Circuit split_circuit(bool first_alone) {
  CircuitBuilder b(binary(3));
  UnitId x1 = b.add_input(1, InputTable::from_values({0.4, 0.6}));
  UnitId x2 = b.add_input(2, InputTable::from_values({0.3, 0.7}));
  UnitId x3 = b.add_input(3, InputTable::from_values({0.2, 0.8}));
  if (first_alone) return b.build(b.add_product({x1, b.add_product({x2, x3})}));
  return b.build(b.add_product({b.add_product({x1, x2}), x3}));
}

// 0.5 * p(X1) + 0.5 * q(X2): not smooth.
Circuit unsmooth() {
  CircuitBuilder b(binary(2));
  UnitId a = b.add_input(1, InputTable::from_values({0.4, 0.6}));
  UnitId c = b.add_input(2, InputTable::from_values({0.1, 0.9}));
  return b.build(*b.add_sum({a, c}, {0.5, 0.5}));
}

}  // namespace

TEST_CASE("evaluate: uniform circuit and table lookup") {
  Circuit u = uniform_circuit(binary(2), 1.0);
  CHECK(evaluate(u, Assignment{0, 1, 0}) == 1.0);
  Circuit b = test::bernoulli(0.7);
  CHECK(evaluate(b, Assignment{0, 1}) == doctest::Approx(0.7).epsilon(1e-15));
  CHECK_THROWS_AS(evaluate(b, Assignment{0, 2}), InvalidAssignment);
  CHECK_THROWS_AS(evaluate(b, Assignment{0}), InvalidAssignment);
  CHECK(evaluate(b, Evidence{{1, 0}}) == doctest::Approx(0.3));
}

TEST_CASE("evaluate matches the oracle on random circuits") {
  for (uint64_t seed = 0; seed < 5; ++seed) {
    Circuit c = random_circuit(seed, test::family(8, false, false));
    DenseTable t = dense_table(c);
    Rng rng(seed);
    for (int k = 0; k < 100; ++k) {
      const uint64_t i = rng.below(t.values.size());
      CHECK(close(evaluate(c, t.state(i)), t.values[i], 1e-12));
    }
  }
}

TEST_CASE("integrate: uniform, evidence and oracle") {
  CHECK(integrate(uniform_circuit(binary(3), 1.0)) == 8.0);
  CircuitBuilder b(binary(2));
  UnitId a = b.add_input(1, InputTable::from_values({0.7, 0.3}));
  UnitId c = b.add_input(2, InputTable::from_values({0.5, 0.5}));
  Circuit p = b.build(b.add_product({a, c}));
  CHECK(integrate(p, {{1, 1}}) == doctest::Approx(0.3));
  for (uint64_t seed = 0; seed < 5; ++seed) {
    Circuit r = random_circuit(seed, test::family(7, seed % 2 == 0, false, false));
    CHECK(close(integrate(r), dense_table(r).total(), 1e-9));
  }
  CHECK_THROWS_AS(integrate(unsmooth()), PropertyViolation);
  CHECK_THROWS_AS(integrate(p, {{1, 5}}), InvalidAssignment);
}

TEST_CASE("marginalize") {
  Circuit u = uniform_circuit(binary(2), 3.0);
  Circuit all = marginalize(u, ScopeSet::single(1) | ScopeSet::single(2));
  CHECK(evaluate(all, Assignment{0}) == doctest::Approx(12.0));

  CircuitBuilder b(binary(2));
  UnitId a = b.add_input(1, InputTable::from_values({0.7, 0.3}));
  UnitId c = b.add_input(2, InputTable::from_values({0.5, 0.5}));
  Circuit p = b.build(b.add_product({a, c}));
  Circuit m = marginalize(p, ScopeSet::single(2));
  CHECK(m.edge_count() <= p.edge_count());
  CHECK(evaluate(m, Assignment{0, 0}) == doctest::Approx(0.7));
  CHECK(evaluate(m, Assignment{0, 1}) == doctest::Approx(0.3));
  CHECK_THROWS_AS(marginalize(p, ScopeSet::single(7)), ScopeError);

  for (uint64_t seed = 0; seed < 5; ++seed) {
    Circuit r = random_circuit(seed, test::family(5, false, false, false));
    Circuit mr = marginalize(r, ScopeSet::single(2) | ScopeSet::single(4));
    DenseTable full = dense_table(r);
    DenseTable mt = dense_table(mr);
    REQUIRE(mt.values.size() == 8);
    for (uint64_t i = 0; i < mt.values.size(); ++i) {
      const Assignment x = mt.state(i);
      double s = 0.0;
      for (uint32_t a2 = 0; a2 < 2; ++a2)
        for (uint32_t a4 = 0; a4 < 2; ++a4) {
          Assignment y{0, x[1], a2, x[3], a4, x[5]};
          s += evaluate(r, y);
        }
      CHECK(close(mt.values[i], s, 1e-12));
    }
    CHECK(mr.edge_count() <= r.edge_count());
  }
}

TEST_CASE("check_property examples") {
  CircuitBuilder b(binary(1));
  UnitId i0 = b.add_input(1, InputTable::indicator(2, 0));
  UnitId i1 = b.add_input(1, InputTable::indicator(2, 1));
  Circuit det = b.build(*b.add_sum({i0, i1}, {1.0, 1.0}));
  CHECK(check_property(det, Property::kDeterministic).status == Status::kVerified);

  CircuitBuilder b2(binary(1));
  UnitId o1 = b2.add_input(1, InputTable::ones(2));
  UnitId o2 = b2.add_input(1, InputTable::ones(2));
  Circuit nondet = b2.build(*b2.add_sum({o1, o2}, {1.0, 1.0}));
  PropertyCheck r = check_property(nondet, Property::kDeterministic);
  CHECK(r.status == Status::kFalse);
  CHECK(r.witness == "X1=0");

  CHECK(check_property(crossing_circuit(), Property::kStructured).status == Status::kFalse);
  CHECK(check_property(unsmooth(), Property::kSmooth).status == Status::kFalse);
  CHECK(check_property(split_circuit(true), Property::kStructured).ok());

  Circuit big = random_circuit(1, test::family(6, false, false));
  CHECK_THROWS_AS(check_property(big, Property::kDeterministic, 8), BudgetExceeded);
}

TEST_CASE("deterministic verdicts agree with the oracle") {
  for (uint64_t seed = 0; seed < 20; ++seed) {
    Circuit c = random_circuit(seed, test::family(5, seed % 2 == 0, seed % 3 == 0, false));
    const bool verdict = check_property(c, Property::kDeterministic).ok();
    bool oracle = true;
    for (UnitId id = 0; id < c.unit_count() && oracle; ++id) {
      const Unit &u = c.unit(id);
      if (!u.is_sum()) continue;
      std::vector<DenseTable> kids;
      for (UnitId ch : u.children) {
        CircuitBuilder b(c.variables());
        // Rebuild the child sub-circuit as its own circuit.
        std::vector<UnitId> map(c.unit_count());
        for (UnitId k = 0; k <= ch; ++k) {
          const Unit &w = c.unit(k);
          if (w.is_input()) map[k] = b.add_input(w.var, w.table);
          else if (w.is_product()) {
            std::vector<UnitId> cc;
            for (UnitId x : w.children) cc.push_back(map[x]);
            map[k] = b.add_product(cc);
          } else {
            std::vector<UnitId> cc;
            for (UnitId x : w.children) cc.push_back(map[x]);
            map[k] = *b.add_sum(cc, w.weights);
          }
        }
        kids.push_back(dense_table(b.build(map[ch]), c.variables()));
      }
      for (std::size_t s = 0; s < kids[0].values.size(); ++s) {
        int nonzero = 0;
        for (const auto &t : kids) nonzero += t.values[s] != 0.0;
        if (nonzero > 1) oracle = false;
      }
    }
    CHECK(verdict == oracle);
  }
}

TEST_CASE("check_compatible") {
  Circuit a = split_circuit(true);
  Circuit b = split_circuit(false);
  CHECK(check_compatible(a, a).verdict == Compatibility::kCompatible);
  CompatibilityResult r = check_compatible(a, b);
  CHECK(r.verdict == Compatibility::kIncompatible);
  CHECK(!r.witness.empty());

  // Fully factorized circuits.
  Circuit u = uniform_circuit(binary(3), 1.0);
  CHECK(check_compatible(u, u).verdict == Compatibility::kCompatible);
  CHECK(check_compatible(u, a).verdict == Compatibility::kCompatible);
  CHECK(check_compatible(b, u).verdict == Compatibility::kCompatible);

  // Omni-compatible mixture against any smooth, decomposable circuit.
  Circuit omni = expand_to_factorized(b, 1 << 10);
  for (uint64_t seed = 0; seed < 5; ++seed) {
    Circuit r3 = random_circuit(seed, test::family(3, false, false));
    CHECK(check_compatible(omni, r3).verdict == Compatibility::kCompatible);
  }
  CHECK_THROWS_AS(check_compatible(unsmooth(), a), PropertyViolation);
}

TEST_CASE("check_compatible is symmetric and reflexive on structured circuits") {
  for (uint64_t seed = 0; seed < 10; ++seed) {
    auto [p, q] = test::compatible_pair(seed, 6, seed % 2 == 0);
    CHECK(check_compatible(p, p).verdict == Compatibility::kCompatible);
    CHECK(check_compatible(p, q).verdict == Compatibility::kCompatible);
    CHECK(check_compatible(q, p).verdict == Compatibility::kCompatible);
    Circuit other = random_circuit(seed + 100, test::family(6, true, false));
    CHECK(check_compatible(p, other).verdict == check_compatible(other, p).verdict);
  }
}

TEST_CASE("smooth_transform") {
  Circuit s = split_circuit(true);
  Circuit t = smooth_transform(s);
  CHECK(t.unit_count() == s.unit_count());
  Circuit u = smooth_transform(unsmooth());
  CHECK(check_property(u, Property::kSmooth).ok());
  for (uint32_t x1 = 0; x1 < 2; ++x1)
    for (uint32_t x2 = 0; x2 < 2; ++x2) {
      const double expect = 0.5 * (x1 ? 0.6 : 0.4) + 0.5 * (x2 ? 0.9 : 0.1);
      CHECK(evaluate(u, Assignment{0, x1, x2}) == doctest::Approx(expect));
    }
  CHECK(u.edge_count() <= unsmooth().edge_count() + 2 * 2);
}

TEST_CASE("support_circuit") {
  Circuit b = test::bernoulli(0.3);
  Circuit s = support_circuit(b);
  CHECK(s.unit(s.output()).table.values == std::vector<double>{1.0, 1.0});
  Circuit ind = test::table_circuit(1, {0.0, 1.0});
  CHECK(support_circuit(ind).unit(0).table.values == std::vector<double>{0.0, 1.0});
  for (uint64_t seed = 0; seed < 10; ++seed) {
    RandomOptions o = test::family(6, seed % 2 == 0, true);
    Circuit c = random_circuit(seed, o);
    Circuit sc = support_circuit(c);
    DenseTable a = dense_table(c), t = dense_table(sc);
    for (std::size_t i = 0; i < a.values.size(); ++i) CHECK(t.values[i] == (a.values[i] != 0.0 ? 1.0 : 0.0));
    CHECK(holds(sc.flags().deterministic));
  }
  CircuitBuilder b2(binary(1));
  UnitId o1 = b2.add_input(1, InputTable::ones(2));
  UnitId o2 = b2.add_input(1, InputTable::ones(2));
  Circuit nondet = b2.build(*b2.add_sum({o1, o2}, {1.0, 1.0}));
  CHECK_THROWS_AS(support_circuit(nondet), PropertyViolation);
}

TEST_CASE("pair_children groups subset scopes") {
  CircuitBuilder b(binary(3));
  UnitId a = b.add_input(1, InputTable::ones(2));
  UnitId bb = b.add_input(2, InputTable::ones(2));
  UnitId e = b.add_input(3, InputTable::ones(2));
  Circuit p = b.build(b.add_product({a, bb, e}));
  CircuitBuilder b2(binary(3));
  UnitId c1 = b2.add_input(1, InputTable::ones(2));
  UnitId c2 = b2.add_input(2, InputTable::ones(2));
  UnitId c = b2.add_product({c1, c2});
  UnitId d = b2.add_input(3, InputTable::ones(2));
  Circuit q = b2.build(b2.add_product({c, d}));
  auto pairs = sort_pairs_by_scope(p, p.output(), q, q.output(), p.root().scope);
  REQUIRE(pairs.size() == 2);
  CHECK(pairs[0].left.size() == 2);
  CHECK(pairs[0].right.size() == 1);
  CHECK(pairs[1].left.size() == 1);
}

TEST_CASE("verify_flags fills in statuses") {
  Circuit c = random_circuit(3, test::family(5, true, true));
  Circuit v = verify_flags(c.with_flags({}));
  CHECK(v.flags().smooth == Status::kVerified);
  CHECK(v.flags().decomposable == Status::kVerified);
  CHECK(v.flags().structured == Status::kVerified);
  CHECK(v.flags().deterministic == Status::kVerified);
}

TEST_CASE("structured check agrees with self-compatibility") {
  for (uint64_t seed = 0; seed < 40; ++seed) {
    Circuit c = random_circuit(seed, test::family(6, seed % 2 == 0, false));
    const bool laminar = check_property(c, Property::kStructured).ok();
    CHECK(laminar == (check_compatible(c, c).verdict == Compatibility::kCompatible));
  }
}
