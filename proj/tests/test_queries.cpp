#include <doctest.h>

#include <cmath>

#include "helpers.hpp"
#include "pcq/compile.hpp"
#include "pcq/error.hpp"
#include "pcq/ops.hpp"
#include "pcq/queries.hpp"

using namespace pcq;
using pcq::test::close;

namespace {

std::vector<Variable> binary(uint32_t n) {
  std::vector<Variable> v;
  for (uint32_t i = 1; i <= n; ++i) v.push_back({i, 2});
  return v;
}

Circuit independent_bits(uint32_t n) {
  CircuitBuilder b(binary(n));
  std::vector<UnitId> f;
  for (uint32_t i = 1; i <= n; ++i) f.push_back(b.add_input(i, InputTable::from_values({0.5, 0.5})));
  PropertyFlags flags;
  flags.deterministic = Status::kVerified;
  return b.build(b.add_product(std::move(f)), flags);
}

Circuit perfect_copy() {
  CircuitBuilder b(binary(2));
  UnitId a0 = b.add_input(1, InputTable::indicator(2, 0));
  UnitId a1 = b.add_input(1, InputTable::indicator(2, 1));
  UnitId b0 = b.add_input(2, InputTable::indicator(2, 0));
  UnitId b1 = b.add_input(2, InputTable::indicator(2, 1));
  return b.build(*b.add_sum({b.add_product({a0, b0}), b.add_product({a1, b1})}, {0.5, 0.5}));
}

Circuit nondeterministic() {
  CircuitBuilder b(binary(1));
  UnitId x = b.add_input(1, InputTable::from_values({0.2, 0.8}));
  UnitId y = b.add_input(1, InputTable::from_values({0.6, 0.4}));
  return b.build(*b.add_sum({x, y}, {0.5, 0.5}));
}

double oracle(OracleKind kind, const std::vector<Circuit> &cs, const OracleParams &params = {}) {
  std::vector<Variable> vars;
  for (const Circuit &c : cs) vars = merge_variables(vars, c.variables());
  std::vector<DenseTable> tables;
  for (const Circuit &c : cs) tables.push_back(dense_table(c, vars));
  return oracle_query(kind, tables, params);
}

// sum_i w_i A_i(X1,X2,X3) B_i(X4,X5,X6) with A_i pinning X1=i and B_i pinning
// X4=sigma(i), so both marginals stay deterministic.
Circuit marginal_deterministic(uint64_t seed) {
  Rng rng(seed);
  RandomOptions ox = test::family(2, true, true);
  ox.variables = std::vector<Variable>{{2, 2}, {3, 2}};
  ox.vtree = random_vtree(rng, {2, 3});
  RandomOptions oy = test::family(2, true, true);
  oy.variables = std::vector<Variable>{{5, 2}, {6, 2}};
  oy.vtree = random_vtree(rng, {5, 6});
  const std::vector<uint32_t> sigma = rng.chance(0.5) ? std::vector<uint32_t>{2, 0, 1} : std::vector<uint32_t>{0, 1, 2};
  std::optional<Circuit> acc;
  double total = 0.0;
  for (uint32_t i = 0; i < 3; ++i) {
    Circuit a = multiply(test::table_circuit(1, [&] {
                           std::vector<double> v(3, 0.0);
                           v[i] = 1.0;
                           return v;
                         }()),
                         random_circuit(seed * 3 + i, ox))
                    .circuit;
    Circuit b = multiply(test::table_circuit(4, [&] {
                           std::vector<double> v(3, 0.0);
                           v[sigma[i]] = 1.0;
                           return v;
                         }()),
                         random_circuit(seed * 3 + i + 100, oy))
                    .circuit;
    Circuit term = multiply(a, b).circuit;
    const double w = rng.uniform(0.1, 1.0);
    acc = acc ? sum_circuits(*acc, term, 1.0, w).circuit : sum_circuits(term, term, w, 0.0).circuit;
    total += w;
  }
  return sum_circuits(*acc, *acc, 1.0 / total, 0.0).circuit;
}

}  // namespace

TEST_CASE("entropy anchors") {
  CHECK(close(shannon_entropy(test::bernoulli(0.5)).value, std::log(2.0), 1e-12));
  CHECK(close(shannon_entropy(independent_bits(5)).value, 5 * std::log(2.0), 1e-12));
  CHECK(close(renyi_entropy(test::bernoulli(0.25), 2).value, -std::log(0.625), 1e-12));
  CHECK(close(renyi_entropy(uniform_circuit(binary(4), 1.0 / 16), 2).value, 4 * std::log(2.0), 1e-12));
  CHECK_THROWS_AS(renyi_entropy(test::bernoulli(0.5), 1.0), InvalidArgument);
  try {
    shannon_entropy(nondeterministic());
    FAIL("expected refusal");
  } catch (const PropertyViolation &e) {
    CHECK(e.citation() == "Shannon Entropy: coNP-hard w/o Det");
  }
}

TEST_CASE("divergence anchors") {
  Circuit b3 = test::bernoulli(0.3), b5 = test::bernoulli(0.5), b75 = test::bernoulli(0.75);
  CHECK(close(cross_entropy(test::bernoulli(0.5), test::table_circuit(1, {0.25, 0.75})).value,
              -(0.5 * std::log(0.25) + 0.5 * std::log(0.75)), 1e-12));
  CHECK(close(kld(b75, b5).value, 0.75 * std::log(1.5) + 0.25 * std::log(0.5), 1e-12));
  CHECK(std::abs(kld(b3, b3).value) <= 1e-12);
  CHECK(close(alpha_divergence(b75, b5, 2).value, -std::log(1.25), 1e-12));
  CHECK(std::abs(alpha_divergence(b3, b3, 0.5).value) <= 1e-12);
  CHECK(close(itakura_saito(b3, b5).value, (0.7 / 0.5 + 0.3 / 0.5) - (std::log(1.4) + std::log(0.6)) - 2, 1e-12));
  CHECK(std::abs(itakura_saito(b3, b3).value) <= 1e-12);
  CHECK(close(cauchy_schwarz(b3, b5).value, -std::log(0.5 / std::sqrt(0.58 * 0.5)), 1e-12));
  CHECK(std::abs(cauchy_schwarz(b3, b3).value) <= 1e-12);
  CHECK(std::abs(squared_loss(b3, b5).value - 0.08) <= 1e-12);
  CHECK(std::abs(squared_loss(b3, b3).value) <= 1e-12);
  CHECK_THROWS_AS(cauchy_schwarz(test::table_circuit(1, {0.0, 1.0}), test::table_circuit(1, {1.0, 0.0})),
                  DivergenceUndefined);
  CHECK_THROWS_AS(alpha_divergence(b3, b5, 1.0), InvalidArgument);
}

TEST_CASE("mutual information anchors") {
  CHECK(std::abs(mutual_information(independent_bits(2), {1}, {2}).value) <= 1e-12);
  CHECK(close(mutual_information(perfect_copy(), {1}, {2}).value, std::log(2.0), 1e-9));
  CHECK_THROWS_AS(mutual_information(perfect_copy(), {1}, {1, 2}), ScopeError);
  CHECK_THROWS_AS(mutual_information(perfect_copy(), {1}, {}), InvalidArgument);
}

TEST_CASE("moment and expectation anchors") {
  CHECK(close(moment(test::table_circuit(1, {0.2, 0.3, 0.5}), {{1, 2}}).value, 2.3, 1e-12));
  CHECK(close(moment(test::bernoulli(0.3), {{1, 1}}).value, 0.3, 1e-12));
  Circuit p = random_circuit(3, test::family(4, false, false));
  CHECK(close(moment(p, {{1, 0}}, true).value, 1.0, 1e-12));
  CHECK(close(moment(p, {}).value, integrate(p), 1e-12));

  Circuit u = uniform_circuit(binary(3), 1.0 / 8);
  CHECK(close(formula_probability(u, uniform_circuit(binary(3), 1.0)).value, 1.0, 1e-12));
  CHECK(formula_probability(u, zero_circuit(binary(3))).value == 0.0);
  CircuitBuilder b(binary(3));
  std::vector<UnitId> models;
  for (uint32_t m = 1; m < 8; ++m)
    models.push_back(b.add_product({b.add_input(1, InputTable::indicator(2, m & 1)),
                                    b.add_input(2, InputTable::indicator(2, (m >> 1) & 1)),
                                    b.add_input(3, InputTable::indicator(2, (m >> 2) & 1))}));
  Circuit clause = b.build(*b.add_sum(std::move(models), std::vector<double>(7, 1.0)));
  CHECK(close(formula_probability(u, clause).value, 7.0 / 8.0, 1e-12));
  CHECK_THROWS_AS(formula_probability(u, uniform_circuit(binary(3), 2.0)), InvalidArgument);

  Forest leaf = parse_forest_json(R"({"variables":[{"id":1,"card":2}],"trees":[{"weight":1,"root":{"leaf":4}}]})");
  CHECK(close(expected_prediction(test::bernoulli(0.3), forest_to_circuit(leaf)).value, 4.0, 1e-12));
  Forest stump = parse_forest_json(
      R"({"variables":[{"id":1,"card":2}],"trees":[{"weight":1,"root":{"var":1,"children":[{"leaf":1},{"leaf":3}]}}]})");
  Circuit p2 = multiply(test::bernoulli(0.75, 1), test::bernoulli(0.4, 2)).circuit;
  CHECK(close(expected_prediction(p2, forest_to_circuit(stump)).value, 0.25 * 1 + 0.75 * 3, 1e-12));
}

TEST_CASE("queries match the oracle") {
  for (uint64_t seed = 0; seed < 12; ++seed) {
    const uint32_t n = 4 + static_cast<uint32_t>(seed % 5);
    auto [p, q] = test::compatible_pair(seed, n, true);
    CHECK(close(shannon_entropy(p).value, oracle(OracleKind::kEntropy, {p}), 1e-9));
    OracleParams a;
    for (double alpha : {0.5, 2.0, 3.0}) {
      a.alpha = alpha;
      CHECK(close(renyi_entropy(p, alpha).value, oracle(OracleKind::kRenyi, {p}, a), 1e-9));
      CHECK(close(alpha_divergence(p, q, alpha).value, oracle(OracleKind::kAlpha, {p, q}, a), 1e-9));
    }
    CHECK(close(cross_entropy(p, q).value, oracle(OracleKind::kCrossEntropy, {p, q}), 1e-9));
    CHECK(close(kld(p, q).value, oracle(OracleKind::kKld, {p, q}), 1e-9));
    CHECK(close(itakura_saito(p, q).value, oracle(OracleKind::kItakuraSaito, {p, q}), 1e-9));
    CHECK(close(cauchy_schwarz(p, q).value, oracle(OracleKind::kCauchySchwarz, {p, q}), 1e-9));
    CHECK(close(squared_loss(p, q).value, oracle(OracleKind::kSquaredLoss, {p, q}), 1e-9, 1e-12));

    auto [a1, a2] = test::compatible_pair(seed + 300, n, false);
    a.alpha = 2.0;
    CHECK(close(renyi_entropy(a1, 2).value, oracle(OracleKind::kRenyi, {a1}, a), 1e-9));
    CHECK(close(cauchy_schwarz(a1, a2).value, oracle(OracleKind::kCauchySchwarz, {a1, a2}), 1e-9));
    CHECK(close(squared_loss(a1, a2).value, oracle(OracleKind::kSquaredLoss, {a1, a2}), 1e-9, 1e-12));
    const Circuit mix = sum_circuits(p, q, 0.5, 0.5).circuit;
    CHECK(close(cross_entropy(mix, q).value, oracle(OracleKind::kCrossEntropy, {mix, q}), 1e-9));

    OracleParams m;
    m.degrees = {{1, 1}, {2, 2}};
    CHECK(close(moment(a1, m.degrees).value, oracle(OracleKind::kMoment, {a1}, m), 1e-9));
    m.normalize = true;
    CHECK(close(moment(a1, m.degrees, true).value, oracle(OracleKind::kMoment, {a1}, m), 1e-9));
  }
}

TEST_CASE("query invariants") {
  for (uint64_t seed = 0; seed < 10; ++seed) {
    auto [p, q] = test::compatible_pair(seed + 50, 6, true);
    const double d = kld(p, q).value;
    DenseTable tp = dense_table(p), tq = dense_table(q);
    bool nested = true;
    for (std::size_t i = 0; i < tp.values.size(); ++i) nested = nested && (tp.values[i] == 0.0 || tq.values[i] > 0.0);
    if (nested) CHECK(d >= -1e-12);
    CHECK(std::abs(kld(p, p).value) <= 1e-12);
    CHECK(cauchy_schwarz(p, q).value >= -1e-12);
    CHECK(squared_loss(p, q).value >= -1e-12);
    const double h = shannon_entropy(p).value;
    CHECK(std::abs(renyi_entropy(p, 1 + 1e-4).value - h) <= 1e-3);
    CHECK(std::abs(renyi_entropy(p, 1 - 1e-4).value - h) <= 1e-3);
    // Full-support q: cross entropy minus entropy is the divergence.
    Circuit full = random_circuit(seed, [&] {
      RandomOptions o = test::family(6, true, true);
      o.variables = p.variables();
      return o;
    }());
    DenseTable tf = dense_table(full);
    bool positive = true;
    for (double v : tf.values) positive = positive && v > 0.0;
    if (positive && check_compatible(p, full).verdict == Compatibility::kCompatible)
      CHECK(std::abs(cross_entropy(p, full).value - h - kld(p, full).value) <= 1e-9);
  }
}

TEST_CASE("mutual information on marginal-deterministic circuits") {
  int tested = 0;
  for (uint64_t seed = 0; seed < 10; ++seed) {
    Circuit p = marginal_deterministic(seed);
    std::vector<uint32_t> x{1, 2, 3}, y{4, 5, 6};
    QueryReport r = mutual_information(p, x, y);
    OracleParams o;
    o.x = x;
    o.y = y;
    CHECK(close(r.value, oracle(OracleKind::kMutualInformation, {p}, o), 1e-9, 1e-12));
    CHECK(std::abs(mutual_information(p, y, x).value - r.value) <= 1e-9);
  }
  for (uint64_t seed = 0; seed < 10; ++seed) {
    Circuit p = random_circuit(seed, test::family(6, true, true));
    std::vector<uint32_t> x{1, 2, 3}, y{4, 5, 6};
    try {
      QueryReport r = mutual_information(p, x, y);
      OracleParams o;
      o.x = x;
      o.y = y;
      CHECK(close(r.value, oracle(OracleKind::kMutualInformation, {p}, o), 1e-9, 1e-12));
      CHECK(std::abs(mutual_information(p, y, x).value - r.value) <= 1e-9);
      ++tested;
    } catch (const PropertyViolation &e) {
      CHECK(e.citation() == "Mutual Information: coNP-hard w/o SD");
    }
  }
}

TEST_CASE("expected predictions match the oracle") {
  Rng rng(21);
  for (uint64_t seed = 0; seed < 8; ++seed) {
    Circuit p = random_circuit(seed, test::family(4, false, false));
    std::string json = R"({"variables":[{"id":1,"card":2},{"id":2,"card":2},{"id":3,"card":2},{"id":4,"card":2}],"trees":[)";
    for (int t = 0; t < 3; ++t) {
      const uint32_t v = static_cast<uint32_t>(rng.below(4) + 1);
      json += (t ? "," : "") + std::string(R"({"weight":0.5,"root":{"var":)") + std::to_string(v) +
              R"(,"children":[{"leaf":)" + std::to_string(rng.below(5)) + R"(},{"leaf":)" +
              std::to_string(rng.below(5)) + "}]}}";
    }
    json += "]}";
    Circuit f = forest_to_circuit(parse_forest_json(json));
    CHECK(close(expected_prediction(p, f).value, oracle(OracleKind::kExpectedPrediction, {p, f}), 1e-9));
  }
}

TEST_CASE("query reports") {
  QueryReport r = shannon_entropy(test::bernoulli(0.5));
  CHECK(r.plan == "mul(-1,integ(mul(p,log(p))))");
  CHECK(r.conditions_used == "Shannon Entropy: Sm, Dec, Det");
  CHECK(!r.cost.empty());
  const std::string j = to_json(r, true);
  CHECK(j.find("\"value\":1") != std::string::npos);
  CHECK(j.find("\"unit\":\"bits\"") != std::string::npos);
}
