#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "pcq/circuit.hpp"

namespace pcq {

struct StepCost {
  std::string step;
  std::size_t units = 0;
  std::size_t edges = 0;
};

struct QueryReport {
  double value = 0.0;            // nats where logarithmic
  std::string plan;              // pipeline expression over the named inputs
  std::vector<StepCost> cost;    // intermediate circuits, in execution order
  std::string conditions_used;   // rule row and the conditions it relies on
  bool logarithmic = false;      // value scales with the log base
  std::optional<double> partition;
};

QueryReport shannon_entropy(const Circuit &p);
// alpha != 1. Natural alpha uses natural powers; other alpha restricted powers.
QueryReport renyi_entropy(const Circuit &p, double alpha);
// Restricted to supp(q).
QueryReport cross_entropy(const Circuit &p, const Circuit &q);
// The divergences below integrate over supp(p) and supp(q) jointly.
QueryReport kld(const Circuit &p, const Circuit &q);
QueryReport alpha_divergence(const Circuit &p, const Circuit &q, double alpha);
QueryReport itakura_saito(const Circuit &p, const Circuit &q);
QueryReport cauchy_schwarz(const Circuit &p, const Circuit &q);
QueryReport squared_loss(const Circuit &p, const Circuit &q);
// x and y partition the domain of p.
QueryReport mutual_information(const Circuit &p, const std::vector<uint32_t> &x, const std::vector<uint32_t> &y);
// Integral of prod_i x_i^{k_i} p(x), x_i the 0-based value index.
QueryReport moment(const Circuit &p, const std::map<uint32_t, uint32_t> &degrees, bool normalize = false);
// P_p[f] for a 0/1-valued f; divided by the partition function of p.
QueryReport formula_probability(const Circuit &p, const Circuit &f);
// E_{x ~ p}[f(x)].
QueryReport expected_prediction(const Circuit &p, const Circuit &f);

// JSON object with value, plan, cost, conditions_used and optional partition.
std::string to_json(const QueryReport &r, bool bits = false);

}  // namespace pcq
