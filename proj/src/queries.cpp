#include "pcq/queries.hpp"

#include <cmath>
#include <json.hpp>
#include <numbers>

#include "pcq/core.hpp"
#include "pcq/error.hpp"
#include "pcq/io.hpp"
#include "pcq/oracle.hpp"
#include "pcq/ops.hpp"
#include "pcq/rules.hpp"

namespace pcq {
namespace {

std::string conditions(std::string_view row_id) {
  const rules::Row &r = rules::query_row(row_id);
  return std::string(r.name) + ": " + std::string(r.input_conditions);
}

class Trace {
 public:
  explicit Trace(QueryReport &report) : report_(report) {}

  Circuit keep(const std::string &step, const OpResult &r) { return keep(step, r.circuit); }
  Circuit keep(const std::string &step, const Circuit &c) {
    report_.cost.push_back({step, c.unit_count(), c.edge_count()});
    return c;
  }

 private:
  QueryReport &report_;
};

bool is_natural(double alpha) { return alpha >= 2.0 && alpha == std::floor(alpha) && alpha <= 64.0; }

bool structured(const Circuit &c) {
  if (c.flags().structured == Status::kFalse) return false;
  return holds(c.flags().structured) || check_property(c, Property::kStructured).ok();
}

bool deterministic(const Circuit &c) {
  if (c.flags().deterministic == Status::kFalse) return false;
  if (holds(c.flags().deterministic)) return true;
  return check_property(c, Property::kDeterministic).ok();
}

// Sets the deterministic flag after a successful check so ops skip re-checking.
Circuit checked_deterministic(const Circuit &c, const std::string &citation) {
  require_deterministic(c, citation);
  if (holds(c.flags().deterministic)) return c;
  PropertyFlags f = c.flags();
  f.deterministic = Status::kVerified;
  return c.with_flags(f);
}

void require_compatible(const Circuit &p, const Circuit &q, const std::string &citation) {
  CompatibilityResult r = check_compatible(p, q);
  if (r.verdict == Compatibility::kIncompatible)
    throw PropertyViolation("circuits are not compatible: " + r.witness, citation);
}

// p * log(p) with support-group pruning; p must be deterministic.
Circuit p_log_p(const Circuit &p, Trace &t) {
  const Circuit labelled = with_support_groups(p);
  const Circuit lp = t.keep("log(p)", log_circuit(labelled));
  return t.keep("mul(p,log(p))", multiply(labelled, lp));
}

std::string var_list(const std::vector<uint32_t> &vars) {
  std::string s;
  for (uint32_t v : vars) s += (s.empty() ? "X" : ",X") + std::to_string(v);
  return s;
}

double log_of_integral(double integral, const std::string &what) {
  if (integral <= 0.0) throw DivergenceUndefined(what + " is undefined: the integral is " + format_real(integral));
  return std::log(integral);
}

}  // namespace

QueryReport shannon_entropy(const Circuit &p) {
  const std::string citation = rules::query_citation("shannon_entropy");
  require_pc(p, "Shannon entropy");
  require_smooth_decomposable(p, citation);
  const Circuit pd = checked_deterministic(p, citation);
  QueryReport r;
  Trace t(r);
  r.plan = "mul(-1,integ(mul(p,log(p))))";
  r.conditions_used = conditions("shannon_entropy");
  r.logarithmic = true;
  r.value = -integrate(p_log_p(pd, t));
  return r;
}

QueryReport renyi_entropy(const Circuit &p, double alpha) {
  if (!std::isfinite(alpha)) throw InvalidArgument("alpha must be finite");
  if (alpha == 1.0) throw InvalidArgument("alpha = 1 is the Shannon entropy; use the entropy query");
  require_pc(p, "Renyi entropy");
  QueryReport r;
  Trace t(r);
  r.logarithmic = true;
  const std::string a = format_real(alpha);
  r.plan = "mul(" + format_real(1.0 / (1.0 - alpha)) + ",log(integ(pow(p," + a + "))))";
  Circuit powered;
  if (is_natural(alpha)) {
    const std::string citation = rules::query_citation("renyi_natural");
    require_smooth_decomposable(p, citation);
    if (structured(p)) {
      powered = t.keep("pow(p," + a + ")", natural_power(p, static_cast<uint32_t>(alpha)));
      r.conditions_used = conditions("renyi_natural");
    } else if (deterministic(p)) {
      powered = t.keep("pow(p," + a + ")", restricted_power(checked_deterministic(p, citation), alpha));
      r.conditions_used = conditions("renyi_real");
    } else {
      throw PropertyViolation("natural power needs a structured-decomposable circuit", citation);
    }
  } else {
    const std::string citation = rules::query_citation("renyi_real");
    require_smooth_decomposable(p, citation);
    powered = t.keep("pow(p," + a + ")", restricted_power(checked_deterministic(p, citation), alpha));
    r.conditions_used = conditions("renyi_real");
  }
  r.value = log_of_integral(integrate(powered), "Renyi entropy") / (1.0 - alpha);
  return r;
}

QueryReport cross_entropy(const Circuit &p, const Circuit &q) {
  const std::string citation = rules::query_citation("cross_entropy");
  require_pc(p, "Cross entropy");
  require_pc(q, "Cross entropy");
  require_smooth_decomposable(p, citation);
  require_smooth_decomposable(q, citation);
  const Circuit qd = checked_deterministic(q, citation);
  QueryReport r;
  Trace t(r);
  r.plan = "mul(-1,integ(mul(p,log(q))))";
  r.conditions_used = conditions("cross_entropy");
  r.logarithmic = true;
  const Circuit lq = t.keep("log(q)", log_circuit(qd));
  r.value = -integrate(t.keep("mul(p,log(q))", multiply(p, lq)));
  return r;
}

QueryReport kld(const Circuit &p, const Circuit &q) {
  const std::string citation = rules::query_citation("kld");
  require_pc(p, "KL divergence");
  require_pc(q, "KL divergence");
  require_smooth_decomposable(p, citation);
  require_smooth_decomposable(q, citation);
  const Circuit pd = checked_deterministic(p, citation);
  const Circuit qd = checked_deterministic(q, citation);
  QueryReport r;
  Trace t(r);
  r.plan = "add(integ(mul(mul(p,log(p)),supp(q))),integ(mul(p,log(q))),1,-1)";
  r.conditions_used = conditions("kld");
  r.logarithmic = true;
  const Circuit plp = p_log_p(pd, t);
  const Circuit sq = t.keep("supp(q)", support_circuit(qd));
  const double own = integrate(t.keep("mul(mul(p,log(p)),supp(q))", multiply(plp, sq)));
  const Circuit lq = t.keep("log(q)", log_circuit(qd));
  const double cross = integrate(t.keep("mul(p,log(q))", multiply(with_support_groups(pd), lq)));
  r.value = own - cross;
  return r;
}

QueryReport alpha_divergence(const Circuit &p, const Circuit &q, double alpha) {
  if (!std::isfinite(alpha)) throw InvalidArgument("alpha must be finite");
  if (alpha == 1.0) throw InvalidArgument("alpha = 1 is the KL divergence; use the kld query");
  require_pc(p, "Alpha divergence");
  require_pc(q, "Alpha divergence");
  const bool natural = is_natural(alpha);
  const std::string row = natural ? "alpha_natural" : "alpha_real";
  const std::string citation = rules::query_citation(row);
  require_smooth_decomposable(p, citation);
  require_smooth_decomposable(q, citation);
  QueryReport r;
  Trace t(r);
  r.logarithmic = true;
  r.conditions_used = conditions(row);
  const std::string a = format_real(alpha);
  const std::string b = format_real(1.0 - alpha);
  r.plan = "mul(" + format_real(1.0 / (1.0 - alpha)) + ",log(integ(mul(pow(p," + a + "),pow(q," + b + ")))))";

  const Circuit qd = checked_deterministic(q, citation);
  Circuit pa;
  if (natural && structured(p)) {
    pa = t.keep("pow(p," + a + ")", natural_power(p, static_cast<uint32_t>(alpha)));
  } else {
    pa = t.keep("pow(p," + a + ")", restricted_power(checked_deterministic(p, citation), alpha));
  }
  const Circuit qb = t.keep("pow(q," + b + ")", restricted_power(qd, 1.0 - alpha));
  const Circuit prod = t.keep("mul(pow(p," + a + "),pow(q," + b + "))", multiply(pa, qb));
  r.value = log_of_integral(integrate(prod), "alpha divergence") / (1.0 - alpha);
  return r;
}

QueryReport itakura_saito(const Circuit &p, const Circuit &q) {
  const std::string citation = rules::query_citation("itakura_saito");
  require_pc(p, "Itakura-Saito divergence");
  require_pc(q, "Itakura-Saito divergence");
  require_smooth_decomposable(p, citation);
  require_smooth_decomposable(q, citation);
  const Circuit pd = checked_deterministic(p, citation);
  const Circuit qd = checked_deterministic(q, citation);
  QueryReport r;
  Trace t(r);
  r.plan = "add(add(integ(div(p,q)),integ(log(div(p,q))),1,-1),integ(mul(supp(p),supp(q))),1,-1)";
  r.conditions_used = conditions("itakura_saito");
  const Circuit ratio = t.keep("div(p,q)", quotient(pd, qd));
  const Circuit log_ratio = t.keep("log(div(p,q))", log_circuit(ratio));
  const Circuit sp = t.keep("supp(p)", support_circuit(pd));
  const Circuit sq = t.keep("supp(q)", support_circuit(qd));
  const Circuit both = t.keep("mul(supp(p),supp(q))", multiply(sp, sq));
  r.value = integrate(ratio) - integrate(log_ratio) - integrate(both);
  return r;
}

QueryReport cauchy_schwarz(const Circuit &p, const Circuit &q) {
  const std::string citation = rules::query_citation("cauchy_schwarz");
  require_pc(p, "Cauchy-Schwarz divergence");
  require_pc(q, "Cauchy-Schwarz divergence");
  require_structured(p, citation);
  require_structured(q, citation);
  require_compatible(p, q, citation);
  QueryReport r;
  Trace t(r);
  r.plan = "mul(-1,log(div(integ(mul(p,q)),pow(mul(integ(pow(p,2)),integ(pow(q,2))),0.5))))";
  r.conditions_used = conditions("cauchy_schwarz");
  r.logarithmic = true;
  const double pq = integrate(t.keep("mul(p,q)", multiply(p, q)));
  if (pq == 0.0) throw DivergenceUndefined("Cauchy-Schwarz divergence is undefined: p and q have disjoint supports");
  const double pp = integrate(t.keep("pow(p,2)", natural_power(p, 2)));
  const double qq = integrate(t.keep("pow(q,2)", natural_power(q, 2)));
  r.value = -std::log(pq / std::sqrt(pp * qq));
  return r;
}

QueryReport squared_loss(const Circuit &p, const Circuit &q) {
  const std::string citation = rules::query_citation("squared_loss");
  require_structured(p, citation);
  require_structured(q, citation);
  require_compatible(p, q, citation);
  QueryReport r;
  Trace t(r);
  r.plan = "add(add(integ(pow(p,2)),integ(pow(q,2))),integ(mul(p,q)),1,-2)";
  r.conditions_used = conditions("squared_loss");
  const double pp = integrate(t.keep("pow(p,2)", natural_power(p, 2)));
  const double qq = integrate(t.keep("pow(q,2)", natural_power(q, 2)));
  const double pq = integrate(t.keep("mul(p,q)", multiply(p, q)));
  r.value = pp + qq - 2.0 * pq;
  return r;
}

QueryReport mutual_information(const Circuit &p, const std::vector<uint32_t> &x, const std::vector<uint32_t> &y) {
  const std::string citation = rules::query_citation("mutual_information");
  if (x.empty() || y.empty()) throw InvalidArgument("mutual information needs nonempty X and Y");
  ScopeSet sx, sy;
  for (uint32_t v : x) sx.insert(v);
  for (uint32_t v : y) sy.insert(v);
  if (sx.intersects(sy)) throw ScopeError("X and Y overlap on " + (sx & sy).to_string());
  if (!((sx | sy) == p.domain()))
    throw ScopeError("X and Y must partition the domain " + p.domain().to_string());
  require_pc(p, "Mutual information");
  require_structured(p, citation);
  const Circuit pd = checked_deterministic(p, citation);

  QueryReport r;
  Trace t(r);
  r.logarithmic = true;
  r.conditions_used = conditions("mutual_information");
  const std::string mx = "marg(p;" + var_list(y) + ")";
  const std::string my = "marg(p;" + var_list(x) + ")";
  r.plan = "add(add(integ(mul(p,log(p))),integ(mul(p,log(" + mx + "))),1,-1),integ(mul(p,log(" + my + "))),1,-1)";

  auto marginal = [&](const ScopeSet &drop, const std::string &name) {
    Circuit m = t.keep(name, marginalize(pd, drop));
    PropertyCheck det = check_property(m, Property::kDeterministic);
    if (!det.ok())
      throw PropertyViolation("marginal " + name + " is not deterministic" +
                                  (det.witness.empty() ? "" : ": " + det.witness),
                              citation, det.unit);
    PropertyFlags f = m.flags();
    f.deterministic = det.status;
    return m.with_flags(f);
  };
  const Circuit px = marginal(sy, mx);
  const Circuit py = marginal(sx, my);
  const Circuit labelled = with_support_groups(pd);
  const double joint = integrate(p_log_p(pd, t));
  const Circuit lx = t.keep("log(" + mx + ")", log_circuit(px));
  const double hx = integrate(t.keep("mul(p,log(" + mx + "))", multiply(labelled, lx)));
  const Circuit ly = t.keep("log(" + my + ")", log_circuit(py));
  const double hy = integrate(t.keep("mul(p,log(" + my + "))", multiply(labelled, ly)));
  r.value = joint - hx - hy;
  return r;
}

QueryReport moment(const Circuit &p, const std::map<uint32_t, uint32_t> &degrees, bool normalize) {
  require_smooth_decomposable(p, "Moment: requires Sm, Dec");
  QueryReport r;
  Trace t(r);
  r.conditions_used = "Moment: Sm, Dec";
  CircuitBuilder b(p.variables());
  std::vector<UnitId> factors;
  for (auto [var, k] : degrees) {
    const uint32_t card = p.cardinality(var);
    if (card == 0) throw ScopeError("moment variable X" + std::to_string(var) + " is not in the circuit's domain");
    if (k == 0) continue;
    std::vector<double> values(card);
    for (uint32_t v = 0; v < card; ++v) values[v] = std::pow(static_cast<double>(v), static_cast<double>(k));
    factors.push_back(b.add_input(var, InputTable::from_values(std::move(values))));
  }
  double value = 0.0;
  if (factors.empty()) {
    r.plan = "integ(p)";
    value = integrate(p);
  } else {
    r.plan = "integ(mul(p,m))";
    PropertyFlags f;
    f.smooth = f.decomposable = f.structured = f.deterministic = f.omni = Status::kVerified;
    const Circuit mono = t.keep("m", b.build(b.add_product(std::move(factors)), f));
    value = integrate(t.keep("mul(p,m)", multiply(p, mono)));
  }
  if (normalize) {
    const double z = integrate(p);
    if (z == 0.0) throw DivergenceUndefined("cannot normalize: the partition function is 0");
    r.partition = z;
    r.plan = "div(" + r.plan + ",integ(p))";
    value /= z;
  }
  r.value = value;
  return r;
}

namespace {

QueryReport expectation(const Circuit &p, const Circuit &f, const std::string &conditions_used) {
  QueryReport r;
  Trace t(r);
  require_smooth_decomposable(p, "Expectation: requires Sm, Dec");
  require_smooth_decomposable(f, "Expectation: requires Sm, Dec");
  r.conditions_used = conditions_used;
  r.plan = "div(integ(mul(p,f)),integ(p))";
  const double z = integrate(p);
  if (z == 0.0) throw DivergenceUndefined("expectation is undefined: the partition function of p is 0");
  r.partition = z;
  r.value = integrate(t.keep("mul(p,f)", multiply(p, f))) / z;
  return r;
}

}  // namespace

QueryReport formula_probability(const Circuit &p, const Circuit &f) {
  require_pc(p, "Formula probability");
  if (f.state_count() <= enumeration_budget()) {
    for (double v : dense_table(f).values)
      if (v != 0.0 && v != 1.0) throw InvalidArgument("formula circuit must output only 0 or 1, found " + format_real(v));
  }
  return expectation(p, f, "Formula probability: Cmp");
}

QueryReport expected_prediction(const Circuit &p, const Circuit &f) {
  return expectation(p, f, holds(f.flags().omni) ? "Expected prediction: Sm, Dec, f omni" : "Expected prediction: Cmp");
}

std::string to_json(const QueryReport &r, bool bits) {
  nlohmann::ordered_json j;
  const bool rescale = bits && r.logarithmic;
  j["value"] = rescale ? r.value / std::numbers::ln2 : r.value;
  j["unit"] = r.logarithmic ? (rescale ? "bits" : "nats") : "none";
  j["plan"] = r.plan;
  j["conditions_used"] = r.conditions_used;
  nlohmann::ordered_json cost = nlohmann::ordered_json::array();
  for (const StepCost &s : r.cost) cost.push_back({{"step", s.step}, {"units", s.units}, {"edges", s.edges}});
  j["cost"] = cost;
  if (r.partition) j["partition"] = *r.partition;
  return j.dump(-1, ' ', false, nlohmann::json::error_handler_t::replace);
}

}  // namespace pcq
