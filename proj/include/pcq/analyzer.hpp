#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <variant>
#include <vector>

#include "pcq/circuit.hpp"

namespace pcq {

// ---- Pipelines ----

enum class PipelineOp : uint8_t { kSymbol, kNumber, kAdd, kMul, kDiv, kPow, kLog, kExp, kMarg, kInteg, kSupp };
const char *to_string(PipelineOp op);

struct PipelineNode {
  PipelineOp op = PipelineOp::kSymbol;
  std::string symbol;           // kSymbol
  double number = 0.0;          // kNumber; exponent for kPow
  std::vector<int> args;        // node indices
  std::vector<double> weights;  // kAdd: theta1, theta2
  std::vector<uint32_t> vars;   // kMarg: variables summed out
  bool scalar = false;          // value is a number rather than a circuit
  std::string text;             // canonical text, unique per node
};

struct SymbolDecl {
  bool smooth = false;
  bool decomposable = false;
  bool structured = false;
  bool deterministic = false;
  bool omni = false;
  bool linear = false;
};

struct PropertyEnv {
  std::map<std::string, SymbolDecl> symbols;
  std::vector<std::string> order;                  // declaration order
  std::vector<std::vector<std::string>> cmp_groups;  // mutually compatible symbols
  std::vector<std::pair<std::string, std::set<uint32_t>>> mdet;  // deterministic after summing out

  // Index of the compatibility group holding `s`, merged transitively.
  std::optional<std::size_t> group_of(const std::string &s) const;
  bool marginal_deterministic(const std::string &s, const std::set<uint32_t> &vars) const;
};

// Nodes are stored children first and deduplicated by canonical text.
struct Pipeline {
  std::vector<PipelineNode> nodes;
  int root = -1;
  PropertyEnv env;

  const PipelineNode &node(int i) const { return nodes[static_cast<std::size_t>(i)]; }
  std::string text() const { return node(root).text; }
};

// Grammar: `name ':' flag (',' flag)* ';'` declarations, `cmp(a,b,...);`,
// `mdet(name; vars);`, then one expression. Flags: sm, dec, sd, det, omni,
// linear. Operations: add(x,y[,t1,t2]), mul, div, pow(x,alpha), log, exp,
// marg(x; vars), integ, supp. `#` starts a comment.
Pipeline parse_pipeline(const std::string &text);

// ---- Symbolic cost ----

// Sum of monomials over symbol sizes |p|, coefficients dropped.
class CostPolynomial {
 public:
  using Monomial = std::map<std::string, int>;

  static CostPolynomial constant();
  static CostPolynomial symbol(const std::string &name);

  CostPolynomial operator+(const CostPolynomial &o) const;
  CostPolynomial operator*(const CostPolynomial &o) const;
  CostPolynomial pow(int n) const;
  // Drops monomials dominated by another one.
  CostPolynomial pruned() const;
  bool empty() const { return terms_.empty(); }
  const std::set<Monomial> &terms() const { return terms_; }

  // "O(|p||q|+|p|^2)" with symbols ordered by `order`.
  std::string big_o(const std::vector<std::string> &order) const;

 private:
  std::set<Monomial> terms_;
};

// ---- Verdicts ----

struct NodeFacts {
  bool scalar = false;
  bool smooth = false;
  bool decomposable = false;
  bool structured = false;
  bool deterministic = false;
  bool omni = false;
  bool linear = false;
  CostPolynomial size;
  std::set<std::string> origins;  // symbols whose scope partitioning the node follows
  std::set<int> skeleton;         // deterministic nodes whose support partition the node refines
};

struct PlanVerdict {
  std::vector<NodeFacts> facts;  // parallel to Pipeline::nodes
  CostPolynomial cost;
  std::string complexity;  // big-O string
  std::optional<std::string> query;  // matched query row id
  std::string conditions;            // the row's conditions when matched
};

struct HardVerdict {
  std::string operation;  // failing operation row name
  std::string missing;    // condition traced back to the inputs
  std::string citation;
  int node = -1;
  std::string node_text;
  std::optional<std::string> query;
};

struct Verdict {
  std::variant<PlanVerdict, HardVerdict> result;

  bool tractable() const { return std::holds_alternative<PlanVerdict>(result); }
  const PlanVerdict &plan() const { return std::get<PlanVerdict>(result); }
  const HardVerdict &hard() const { return std::get<HardVerdict>(result); }
};

Verdict analyze(const Pipeline &p);

std::string describe(const Pipeline &p, const Verdict &v);
std::string to_json(const Pipeline &p, const Verdict &v);

// Query row whose canonical pipeline occurs in `p`, by priority.
std::optional<std::string> match_query(const Pipeline &p);

// ---- Execution ----

using PipelineValue = std::variant<double, Circuit>;

// Runs the pipeline on concrete circuits; ops re-check their preconditions.
PipelineValue execute(const Pipeline &p, const std::map<std::string, Circuit> &bindings);

// ---- Golden rule-base pipelines ----

struct GoldenCase {
  std::string row;        // rule row id
  bool query = false;     // query row (true) or operation row
  std::string tractable;  // full program with the row's conditions
  std::string hard;       // same pipeline with the named condition removed
  std::string expected_complexity;
};

const std::vector<GoldenCase> &golden_cases();

}  // namespace pcq
