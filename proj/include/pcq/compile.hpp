#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "pcq/circuit.hpp"

namespace pcq {

// ---- Decision forests ----

struct ForestNode {
  std::optional<uint32_t> var;               // internal node when set
  std::vector<std::vector<uint32_t>> groups;  // value group per child
  std::vector<ForestNode> children;
  double leaf = 0.0;
};

struct Tree {
  double weight = 1.0;
  ForestNode root;
};

struct Forest {
  std::vector<Variable> variables;
  std::vector<Tree> trees;
};

// {"variables":[{"id":1,"card":2}],"trees":[{"weight":1.0,"root":{"var":1,"children":[{"leaf":1.0},...]}}]}
// An internal node may carry "groups": [[values],...] with one child per group;
// by default there is one child per value.
Forest parse_forest_json(const std::string &text);
double forest_evaluate(const Forest &f, const Assignment &x);
Circuit forest_to_circuit(const Forest &f);

// ---- CNF and the model-counting gadgets ----

struct Cnf {
  uint32_t num_vars = 0;
  std::vector<std::vector<int>> clauses;
};

Cnf parse_dimacs(std::istream &in);
Cnf parse_dimacs_string(const std::string &text);
uint64_t count_models(const Cnf &cnf);

struct Gadgets {
  Circuit beta;   // copies of each variable agree
  Circuit gamma;  // each clause holds on its own copies
};

// Copy variable X_ij (original variable i, clause j) gets id (i-1)*m + j.
Gadgets cnf_to_gadgets(const Cnf &cnf);

// ---- Regression circuits ----

enum class GateKind : uint8_t { kInput, kAnd, kOr };

struct Gate {
  GateKind kind = GateKind::kInput;
  uint32_t var = 0;                  // input gates
  std::vector<uint8_t> support;      // input gates
  std::vector<uint32_t> children;    // indices into gates
  std::vector<double> phi;           // OR gates, per child
};

struct RegressionCircuit {
  std::vector<Variable> variables;
  std::vector<Gate> gates;  // children precede parents
  uint32_t output = 0;
};

// Header `rgc 1`, then `var <id> <card>`, `inp <uid> <var> <m0> <m1> ...`
// (0/1 support mask), `and <uid> <n> <children>`, `or <uid> <n> (<child> <phi>)*n`,
// `out <uid>`.
RegressionCircuit parse_regression(std::istream &in);
RegressionCircuit parse_regression_string(const std::string &text);
// Recursive definition: inputs 0, AND sums its children, OR adds phi_c to
// the child whose support holds x.
double regression_evaluate(const RegressionCircuit &r, const Assignment &x);
// The output gate must be an OR gate.
Circuit regression_to_circuit(const RegressionCircuit &r);

// ---- Random circuits ----

// Binary scope-partition tree. Leaves hold one variable.
struct Vtree {
  struct Node {
    int left = -1;
    int right = -1;
    uint32_t var = 0;
    ScopeSet scope;
  };
  std::vector<Node> nodes;  // children precede parents; root last
  int root() const { return static_cast<int>(nodes.size()) - 1; }
};

// Portable generator: std::mt19937_64 with explicit conversions.
class Rng {
 public:
  explicit Rng(uint64_t seed) : engine_(seed) {}
  uint64_t next() { return engine_(); }
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  // Uniform integer in [0, n).
  uint64_t below(uint64_t n) { return n <= 1 ? 0 : engine_() % n; }
  bool chance(double p) { return uniform() < p; }

 private:
  std::mt19937_64 engine_;
};

Vtree random_vtree(Rng &rng, const std::vector<uint32_t> &vars);

struct RandomOptions {
  uint32_t nvars = 6;
  uint32_t cardinality = 2;
  uint32_t max_cardinality = 0;  // when > cardinality, each variable draws from [cardinality, max]
  bool structured = false;
  bool deterministic = false;
  bool normalized = false;
  uint32_t max_children = 3;
  uint32_t pool = 2;             // units per vtree node (structured, non-deterministic)
  std::size_t max_units = 600;   // soft cap on generated units
  double zero_probability = 0.0; // chance of a zero input entry (non-deterministic families)
  std::optional<Vtree> vtree;    // share one vtree to obtain compatible circuits
  std::optional<std::vector<Variable>> variables;
};

Circuit random_circuit(uint64_t seed, const RandomOptions &options);

// Parses "sd,det,smooth,dec,norm" style lists into options.
RandomOptions random_options_from_flags(const std::string &flags, uint32_t nvars);

}  // namespace pcq
