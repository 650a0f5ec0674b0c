#pragma once

#include <cmath>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "pcq/circuit.hpp"
#include "pcq/core.hpp"

namespace pcq {

// Function values at every joint state, row-major by ascending variable id
// (the last variable varies fastest).
struct DenseTable {
  std::vector<Variable> variables;
  std::vector<double> values;

  // Joint state of flat index `i`, indexed by variable id.
  Assignment state(uint64_t i) const;
  double total() const;
};

DenseTable dense_table(const Circuit &c, uint64_t budget = enumeration_budget());
// Table over `variables`, a superset of c's variable table.
DenseTable dense_table(const Circuit &c, const std::vector<Variable> &variables, uint64_t budget = enumeration_budget());

enum class OracleKind : uint8_t {
  kEntropy,
  kRenyi,
  kCrossEntropy,
  kKld,
  kAlpha,
  kItakuraSaito,
  kCauchySchwarz,
  kSquaredLoss,
  kMutualInformation,
  kMoment,
  kProbability,
  kExpectedPrediction,
};

struct OracleParams {
  double alpha = 2.0;
  std::vector<uint32_t> x;                // mutual information
  std::vector<uint32_t> y;
  std::map<uint32_t, uint32_t> degrees;   // moments
  bool normalize = false;                 // moments
};

// Direct per-state summation of a query's defining formula. Binary queries
// read tables[0] as p and tables[1] as q (or f).
double oracle_query(OracleKind kind, const std::vector<DenseTable> &tables, const OracleParams &params = {});

// Compensated (Neumaier) sum in ascending index order.
class Accumulator {
 public:
  void add(double v) {
    const double t = sum_ + v;
    if (std::abs(sum_) >= std::abs(v)) {
      comp_ += (sum_ - t) + v;
    } else {
      comp_ += (v - t) + sum_;
    }
    sum_ = t;
  }
  double value() const { return sum_ + comp_; }

 private:
  double sum_ = 0.0;
  double comp_ = 0.0;
};

}  // namespace pcq
