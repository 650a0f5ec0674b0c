#include "pcq/oracle.hpp"

#include <cmath>

#include "pcq/error.hpp"

namespace pcq {

namespace {

uint64_t state_count(const std::vector<Variable> &vars, uint64_t budget) {
  uint64_t n = 1;
  for (const Variable &v : vars) {
    if (n > budget / v.cardinality) throw BudgetExceeded("dense table exceeds budget of " + std::to_string(budget));
    n *= v.cardinality;
  }
  if (n > budget) throw BudgetExceeded("dense table exceeds budget of " + std::to_string(budget));
  return n;
}

void require_same_shape(const std::vector<DenseTable> &tables, std::size_t n) {
  if (tables.size() < n) throw InvalidArgument("oracle query needs " + std::to_string(n) + " tables");
  for (std::size_t i = 1; i < n; ++i) {
    if (tables[i].variables != tables[0].variables || tables[i].values.size() != tables[0].values.size())
      throw InvalidArgument("oracle tables must share one variable list");
  }
}

// Marginal of `t` onto `keep`, indexed by the flat index over `keep` in ascending id order.
std::vector<double> marginal(const DenseTable &t, const std::vector<uint32_t> &keep, std::vector<uint64_t> &index_of) {
  std::vector<uint64_t> stride(t.variables.size(), 0);
  uint64_t size = 1;
  for (std::size_t i = t.variables.size(); i-- > 0;) {
    for (uint32_t k : keep) {
      if (k == t.variables[i].id) {
        stride[i] = size;
        size *= t.variables[i].cardinality;
      }
    }
  }
  std::vector<Accumulator> acc(size);
  index_of.assign(t.values.size(), 0);
  std::vector<uint32_t> s(t.variables.size(), 0);
  for (uint64_t i = 0; i < t.values.size(); ++i) {
    uint64_t m = 0;
    for (std::size_t j = 0; j < s.size(); ++j) m += stride[j] * s[j];
    index_of[i] = m;
    acc[m].add(t.values[i]);
    for (std::size_t j = s.size(); j-- > 0;) {
      if (++s[j] < t.variables[j].cardinality) break;
      s[j] = 0;
    }
  }
  std::vector<double> out(size);
  for (uint64_t m = 0; m < size; ++m) out[m] = acc[m].value();
  return out;
}

}  // namespace

Assignment DenseTable::state(uint64_t i) const {
  Assignment a(variables.empty() ? 1 : variables.back().id + 1, 0);
  for (std::size_t j = variables.size(); j-- > 0;) {
    a[variables[j].id] = static_cast<uint32_t>(i % variables[j].cardinality);
    i /= variables[j].cardinality;
  }
  return a;
}

double DenseTable::total() const {
  Accumulator acc;
  for (double v : values) acc.add(v);
  return acc.value();
}

DenseTable dense_table(const Circuit &c, uint64_t budget) { return dense_table(c, c.variables(), budget); }

DenseTable dense_table(const Circuit &c, const std::vector<Variable> &variables, uint64_t budget) {
  std::vector<Variable> vars = merge_variables(variables, {});
  if (merge_variables(vars, c.variables()).size() != vars.size())
    throw ScopeError("table variables must include every circuit variable");
  const uint64_t n = state_count(vars, budget);
  DenseTable t{vars, std::vector<double>(n)};
  Assignment a(vars.empty() ? 1 : vars.back().id + 1, 0);
  std::vector<uint32_t> s(vars.size(), 0);
  for (uint64_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < vars.size(); ++j) a[vars[j].id] = s[j];
    t.values[i] = evaluate(c, a);
    for (std::size_t j = vars.size(); j-- > 0;) {
      if (++s[j] < vars[j].cardinality) break;
      s[j] = 0;
    }
  }
  return t;
}

double oracle_query(OracleKind kind, const std::vector<DenseTable> &tables, const OracleParams &params) {
  Accumulator acc;
  const double alpha = params.alpha;
  switch (kind) {
    case OracleKind::kEntropy: {
      require_same_shape(tables, 1);
      for (double p : tables[0].values)
        if (p > 0.0) acc.add(-p * std::log(p));
      return acc.value();
    }
    case OracleKind::kRenyi: {
      require_same_shape(tables, 1);
      if (alpha == 1.0) throw InvalidArgument("Renyi entropy needs alpha != 1");
      for (double p : tables[0].values)
        if (p > 0.0) acc.add(std::pow(p, alpha));
      return std::log(acc.value()) / (1.0 - alpha);
    }
    case OracleKind::kCrossEntropy: {
      require_same_shape(tables, 2);
      for (std::size_t i = 0; i < tables[0].values.size(); ++i) {
        const double p = tables[0].values[i], q = tables[1].values[i];
        if (q > 0.0 && p != 0.0) acc.add(-p * std::log(q));
      }
      return acc.value();
    }
    case OracleKind::kKld: {
      require_same_shape(tables, 2);
      for (std::size_t i = 0; i < tables[0].values.size(); ++i) {
        const double p = tables[0].values[i], q = tables[1].values[i];
        if (p > 0.0 && q > 0.0) acc.add(p * std::log(p / q));
      }
      return acc.value();
    }
    case OracleKind::kAlpha: {
      require_same_shape(tables, 2);
      if (alpha == 1.0) throw InvalidArgument("alpha divergence needs alpha != 1");
      for (std::size_t i = 0; i < tables[0].values.size(); ++i) {
        const double p = tables[0].values[i], q = tables[1].values[i];
        if (p > 0.0 && q > 0.0) acc.add(std::pow(p, alpha) * std::pow(q, 1.0 - alpha));
      }
      return std::log(acc.value()) / (1.0 - alpha);
    }
    case OracleKind::kItakuraSaito: {
      require_same_shape(tables, 2);
      for (std::size_t i = 0; i < tables[0].values.size(); ++i) {
        const double p = tables[0].values[i], q = tables[1].values[i];
        if (p > 0.0 && q > 0.0) acc.add(p / q - std::log(p / q) - 1.0);
      }
      return acc.value();
    }
    case OracleKind::kCauchySchwarz: {
      require_same_shape(tables, 2);
      Accumulator pp, qq;
      for (std::size_t i = 0; i < tables[0].values.size(); ++i) {
        const double p = tables[0].values[i], q = tables[1].values[i];
        acc.add(p * q);
        pp.add(p * p);
        qq.add(q * q);
      }
      if (acc.value() == 0.0) throw DivergenceUndefined("Cauchy-Schwarz divergence undefined: integral of p*q is 0");
      return -std::log(acc.value() / std::sqrt(pp.value() * qq.value()));
    }
    case OracleKind::kSquaredLoss: {
      require_same_shape(tables, 2);
      for (std::size_t i = 0; i < tables[0].values.size(); ++i) {
        const double d = tables[0].values[i] - tables[1].values[i];
        acc.add(d * d);
      }
      return acc.value();
    }
    case OracleKind::kMutualInformation: {
      require_same_shape(tables, 1);
      const DenseTable &t = tables[0];
      std::vector<uint64_t> ix, iy;
      const std::vector<double> px = marginal(t, params.x, ix);
      const std::vector<double> py = marginal(t, params.y, iy);
      for (uint64_t i = 0; i < t.values.size(); ++i) {
        const double p = t.values[i];
        if (p > 0.0) acc.add(p * std::log(p / (px[ix[i]] * py[iy[i]])));
      }
      return acc.value();
    }
    case OracleKind::kMoment: {
      require_same_shape(tables, 1);
      const DenseTable &t = tables[0];
      for (uint64_t i = 0; i < t.values.size(); ++i) {
        const Assignment a = t.state(i);
        double m = t.values[i];
        for (auto [var, k] : params.degrees) {
          if (var >= a.size()) throw ScopeError("moment variable not in the table");
          m *= std::pow(static_cast<double>(a[var]), static_cast<double>(k));
        }
        acc.add(m);
      }
      return params.normalize ? acc.value() / t.total() : acc.value();
    }
    case OracleKind::kProbability:
    case OracleKind::kExpectedPrediction: {
      require_same_shape(tables, 2);
      for (std::size_t i = 0; i < tables[0].values.size(); ++i) acc.add(tables[0].values[i] * tables[1].values[i]);
      return acc.value() / tables[0].total();
    }
  }
  throw InvalidArgument("unknown oracle query");
}

}  // namespace pcq
