#include "pcq/cli.hpp"

#include <CLI11.hpp>
#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <json.hpp>
#include <numbers>
#include <sstream>

#include "pcq/analyzer.hpp"
#include "pcq/compile.hpp"
#include "pcq/core.hpp"
#include "pcq/error.hpp"
#include "pcq/io.hpp"
#include "pcq/oracle.hpp"
#include "pcq/ops.hpp"
#include "pcq/queries.hpp"
#include "pcq/rules.hpp"

namespace pcq {
namespace {

using json = nlohmann::ordered_json;

// Raised for bad command-line input.
class UsageError : public Error {
 public:
  using Error::Error;
};

struct Config {
  std::string op;
  std::vector<std::string> files;
  std::string output;
  double alpha = 2.0;
  uint32_t n = 2;
  bool n_set = false;
  bool alpha_set = false;
  double theta1 = 1.0;
  double theta2 = 1.0;
  double constant = 1.0;
  std::string vars;
  std::string x;
  std::string y;
  std::string k;
  std::string flags;
  std::string evidence;
  std::vector<std::string> bind;
  std::string compatible;
  uint64_t seed = 1;
  uint32_t nvars = 6;
  uint32_t card = 2;
  uint64_t budget = 0;
  bool bits = false;
  bool as_json = false;
  bool verify = false;
  bool normalize = false;
  bool count = false;
};

std::string read_file(const std::string &path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw UsageError("cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_output(const Config &cfg, const std::string &text, std::ostream &out) {
  if (cfg.output.empty() || cfg.output == "-") {
    out << text;
    return;
  }
  std::ofstream f(cfg.output, std::ios::binary);
  if (!f) throw UsageError("cannot write '" + cfg.output + "'");
  f << text;
}

void need_files(const Config &cfg, std::size_t n, const std::string &what) {
  if (cfg.files.size() != n) throw UsageError(what + " expects " + std::to_string(n) + " input file(s)");
}

// "1,2" or "X1,X2".
std::vector<uint32_t> parse_vars(const std::string &s) {
  std::vector<uint32_t> out;
  std::stringstream ss(s);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    tok.erase(std::remove_if(tok.begin(), tok.end(), [](unsigned char c) { return std::isspace(c); }), tok.end());
    if (!tok.empty() && (tok[0] == 'X' || tok[0] == 'x')) tok.erase(0, 1);
    if (tok.empty() || !std::all_of(tok.begin(), tok.end(), [](unsigned char c) { return std::isdigit(c); }))
      throw UsageError("bad variable list '" + s + "'");
    const unsigned long v = std::stoul(tok);
    if (v == 0) throw UsageError("variable ids are positive");
    out.push_back(static_cast<uint32_t>(v));
  }
  return out;
}

// "1=0,2=3" pairs.
std::map<uint32_t, uint32_t> parse_pairs(const std::string &s) {
  std::map<uint32_t, uint32_t> out;
  std::stringstream ss(s);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    const auto eq = tok.find('=');
    if (eq == std::string::npos) throw UsageError("expected var=value in '" + s + "'");
    const std::vector<uint32_t> v = parse_vars(tok.substr(0, eq));
    try {
      out[v.at(0)] = static_cast<uint32_t>(std::stoul(tok.substr(eq + 1)));
    } catch (const std::logic_error &) {
      throw UsageError("bad value in '" + tok + "'");
    }
  }
  return out;
}

// "1:2,2:3" variable table.
std::vector<Variable> parse_table(const std::string &s) {
  std::vector<Variable> out;
  for (const auto &[id, card] : [&] {
         std::string t = s;
         std::replace(t.begin(), t.end(), ':', '=');
         return parse_pairs(t);
       }())
    out.push_back({id, card});
  if (out.empty()) throw UsageError("--vars expects id:cardinality pairs");
  return out;
}

Circuit load_model(const std::string &path) {
  if (path.size() > 5 && path.substr(path.size() - 5) == ".json") return forest_to_circuit(parse_forest_json(read_file(path)));
  return load_circuit(path);
}

int cmd_check(const Config &cfg, std::ostream &out, std::ostream &err) {
  need_files(cfg, 1, "check");
  const Circuit c = load_circuit(cfg.files[0]);
  json j;
  j["units"] = c.unit_count();
  j["edges"] = c.edge_count();
  j["mode"] = c.mode() == Mode::kPc ? "pc" : "general";
  json props = json::object();
  std::vector<std::string> failures;
  for (Property p : {Property::kSmooth, Property::kDecomposable, Property::kStructured, Property::kDeterministic}) {
    const Status declared = c.flags().get(p);
    const PropertyCheck r = check_property(c, p);
    json e;
    e["declared"] = to_string(declared);
    e["checked"] = to_string(r.status);
    if (!r.ok() && !r.witness.empty()) e["witness"] = r.witness;
    if (r.unit) e["unit"] = *r.unit;
    props[to_string(p)] = e;
    if (cfg.verify && holds(declared) && r.status == Status::kFalse)
      failures.push_back(std::string("declared ") + to_string(p) + " fails" +
                         (r.unit ? " at unit " + std::to_string(*r.unit) : std::string()) +
                         (r.witness.empty() ? std::string() : ": " + r.witness));
  }
  j["properties"] = props;
  if (!cfg.compatible.empty()) {
    const CompatibilityResult r = check_compatible(c, load_circuit(cfg.compatible));
    j["compatible"] = to_string(r.verdict);
    if (!r.witness.empty()) j["compatible_witness"] = r.witness;
  }
  if (cfg.as_json) {
    j["verified"] = failures.empty();
    out << j.dump() << "\n";
  } else {
    out << "units " << c.unit_count() << "\nedges " << c.edge_count() << "\nmode "
        << (c.mode() == Mode::kPc ? "pc" : "general") << "\n";
    for (const auto &[name, e] : props.items()) {
      out << name << " " << e["checked"].get<std::string>();
      if (e.contains("witness")) out << " (" << e["witness"].get<std::string>() << ")";
      out << "\n";
    }
    if (j.contains("compatible")) out << "compatible " << j["compatible"].get<std::string>() << "\n";
  }
  for (const std::string &f : failures) err << "verification failed: " << f << "\n";
  return failures.empty() ? 0 : 2;
}

int cmd_apply(const Config &cfg, std::ostream &out) {
  const std::string &op = cfg.op;
  Circuit result;
  if (op == "add") {
    need_files(cfg, 2, "apply add");
    result = sum_circuits(load_circuit(cfg.files[0]), load_circuit(cfg.files[1]), cfg.theta1, cfg.theta2).circuit;
  } else if (op == "mul") {
    need_files(cfg, 2, "apply mul");
    result = multiply(load_circuit(cfg.files[0]), load_circuit(cfg.files[1])).circuit;
  } else if (op == "div") {
    need_files(cfg, 2, "apply div");
    result = quotient(load_circuit(cfg.files[0]), load_circuit(cfg.files[1])).circuit;
  } else if (op == "pow") {
    need_files(cfg, 1, "apply pow");
    const Circuit c = load_circuit(cfg.files[0]);
    if (cfg.n_set && cfg.alpha_set) throw UsageError("apply pow takes --n or --alpha, not both");
    if (cfg.n_set) {
      if (cfg.n == 0) throw UsageError("--n must be positive");
      result = natural_power(c, cfg.n).circuit;
    } else {
      result = restricted_power(c, cfg.alpha).circuit;
    }
  } else if (op == "log") {
    need_files(cfg, 1, "apply log");
    result = log_circuit(load_circuit(cfg.files[0])).circuit;
  } else if (op == "exp") {
    need_files(cfg, 1, "apply exp");
    result = std::get<Circuit>(execute(parse_pipeline("l: linear; exp(l)"), {{"l", load_circuit(cfg.files[0])}}));
  } else if (op == "support") {
    need_files(cfg, 1, "apply support");
    result = support_circuit(load_circuit(cfg.files[0]));
  } else if (op == "marg") {
    need_files(cfg, 1, "apply marg");
    ScopeSet drop;
    for (uint32_t v : parse_vars(cfg.x)) drop.insert(v);
    result = marginalize(load_circuit(cfg.files[0]), drop);
  } else if (op == "uniform") {
    need_files(cfg, 0, "apply uniform");
    result = uniform_circuit(parse_table(cfg.vars), cfg.constant);
  } else if (op == "smooth") {
    need_files(cfg, 1, "apply smooth");
    result = smooth_transform(load_circuit(cfg.files[0]));
  } else {
    throw UsageError("unknown operation '" + op + "'");
  }
  if (cfg.verify) {
    const Circuit checked = verify_flags(result, false);
    for (Property p : {Property::kSmooth, Property::kDecomposable, Property::kStructured, Property::kDeterministic}) {
      if (holds(result.flags().get(p)) && checked.flags().get(p) == Status::kFalse)
        throw PropertyViolation(std::string("output flag ") + to_string(p) + " fails verification",
                                "Output verification");
    }
    result = checked;
  }
  write_output(cfg, write_circuit_string(result), out);
  return 0;
}

QueryReport run_query(const Config &cfg) {
  const std::string &q = cfg.op;
  auto one = [&] {
    need_files(cfg, 1, "query " + q);
    return load_model(cfg.files[0]);
  };
  auto two = [&] {
    need_files(cfg, 2, "query " + q);
    return std::pair{load_model(cfg.files[0]), load_model(cfg.files[1])};
  };
  if (q == "entropy") return shannon_entropy(one());
  if (q == "renyi") return renyi_entropy(one(), cfg.alpha);
  if (q == "xent") { auto [a, b] = two(); return cross_entropy(a, b); }
  if (q == "kld") { auto [a, b] = two(); return kld(a, b); }
  if (q == "alpha") { auto [a, b] = two(); return alpha_divergence(a, b, cfg.alpha); }
  if (q == "is") { auto [a, b] = two(); return itakura_saito(a, b); }
  if (q == "cs") { auto [a, b] = two(); return cauchy_schwarz(a, b); }
  if (q == "sql" || q == "sl") { auto [a, b] = two(); return squared_loss(a, b); }
  if (q == "mi") return mutual_information(one(), parse_vars(cfg.x), parse_vars(cfg.y));
  if (q == "moment") return moment(one(), cfg.k.empty() ? std::map<uint32_t, uint32_t>{} : parse_pairs(cfg.k), cfg.normalize);
  if (q == "prob") { auto [a, b] = two(); return formula_probability(a, b); }
  if (q == "expred") { auto [a, b] = two(); return expected_prediction(a, b); }
  throw UsageError("unknown query '" + q + "'");
}

int cmd_query(const Config &cfg, std::ostream &out) {
  const QueryReport r = run_query(cfg);
  if (cfg.as_json) {
    out << to_json(r, cfg.bits) << "\n";
  } else {
    const double v = cfg.bits && r.logarithmic ? r.value / std::numbers::ln2 : r.value;
    out << format_real(v) << "\n";
  }
  return 0;
}

int cmd_analyze(const Config &cfg, std::ostream &out, std::ostream &err) {
  need_files(cfg, 1, "analyze");
  const Pipeline p = parse_pipeline(read_file(cfg.files[0]));
  const Verdict v = analyze(p);
  if (cfg.as_json) {
    out << to_json(p, v) << "\n";
  } else if (v.tractable()) {
    out << describe(p, v);
  } else {
    err << describe(p, v);
  }
  if (!v.tractable()) return 2;
  if (cfg.bind.empty()) return 0;
  std::map<std::string, Circuit> bindings;
  for (const std::string &b : cfg.bind) {
    const auto eq = b.find('=');
    if (eq == std::string::npos) throw UsageError("--bind expects name=file");
    bindings.emplace(b.substr(0, eq), load_model(b.substr(eq + 1)));
  }
  const PipelineValue r = execute(p, bindings);
  if (std::holds_alternative<double>(r)) {
    out << "value " << format_real(std::get<double>(r)) << "\n";
  } else {
    write_output(cfg, write_circuit_string(std::get<Circuit>(r)), out);
  }
  return 0;
}

int cmd_compile_forest(const Config &cfg, std::ostream &out) {
  need_files(cfg, 1, "compile-forest");
  write_output(cfg, write_circuit_string(forest_to_circuit(parse_forest_json(read_file(cfg.files[0])))), out);
  return 0;
}

int cmd_compile_cnf(const Config &cfg, std::ostream &out) {
  need_files(cfg, 1, "compile-cnf");
  const Cnf cnf = parse_dimacs_string(read_file(cfg.files[0]));
  const Gadgets g = cnf_to_gadgets(cnf);
  if (cfg.count) {
    MultiplyOptions opts;
    opts.expansion_budget = uint64_t{1} << 20;
    const double models = integrate(multiply(g.beta, g.gamma, opts).circuit);
    out << "models " << format_real(std::round(models)) << "\n";
    return 0;
  }
  if (cfg.output.empty() || cfg.output == "-") {
    out << "# beta\n" << write_circuit_string(g.beta) << "# gamma\n" << write_circuit_string(g.gamma);
  } else {
    save_circuit(cfg.output + ".beta.pc", g.beta);
    save_circuit(cfg.output + ".gamma.pc", g.gamma);
  }
  return 0;
}

int cmd_compile_rgc(const Config &cfg, std::ostream &out) {
  need_files(cfg, 1, "compile-rgc");
  write_output(cfg, write_circuit_string(regression_to_circuit(parse_regression_string(read_file(cfg.files[0])))),
               out);
  return 0;
}

int cmd_gen(const Config &cfg, std::ostream &out) {
  need_files(cfg, 0, "gen");
  RandomOptions o = random_options_from_flags(cfg.flags, cfg.nvars);
  o.cardinality = cfg.card;
  write_output(cfg, write_circuit_string(random_circuit(cfg.seed, o)), out);
  return 0;
}

OracleKind oracle_kind(const std::string &q) {
  static const std::map<std::string, OracleKind> m{
      {"entropy", OracleKind::kEntropy},      {"renyi", OracleKind::kRenyi},
      {"xent", OracleKind::kCrossEntropy},    {"kld", OracleKind::kKld},
      {"alpha", OracleKind::kAlpha},          {"is", OracleKind::kItakuraSaito},
      {"cs", OracleKind::kCauchySchwarz},     {"sql", OracleKind::kSquaredLoss},
      {"sl", OracleKind::kSquaredLoss},       {"mi", OracleKind::kMutualInformation},
      {"moment", OracleKind::kMoment},        {"prob", OracleKind::kProbability},
      {"expred", OracleKind::kExpectedPrediction},
  };
  auto it = m.find(q);
  if (it == m.end()) throw UsageError("unknown query '" + q + "'");
  return it->second;
}

int cmd_oracle(const Config &cfg, std::ostream &out) {
  if (cfg.files.empty()) throw UsageError("oracle expects eval|query and inputs");
  const std::string mode = cfg.files[0];
  std::vector<std::string> rest(cfg.files.begin() + 1, cfg.files.end());
  const uint64_t budget = cfg.budget ? cfg.budget : enumeration_budget();
  if (mode == "eval") {
    if (rest.size() != 1) throw UsageError("oracle eval expects one circuit");
    const DenseTable t = dense_table(load_model(rest[0]), budget);
    if (cfg.as_json) {
      json j;
      json vars = json::array();
      for (const Variable &v : t.variables) vars.push_back({{"id", v.id}, {"card", v.cardinality}});
      j["variables"] = vars;
      j["values"] = t.values;
      out << j.dump() << "\n";
    } else {
      for (double v : t.values) out << format_real(v) << "\n";
    }
    return 0;
  }
  if (mode == "query") {
    if (rest.empty()) throw UsageError("oracle query expects a query name");
    const OracleKind kind = oracle_kind(rest[0]);
    std::vector<Circuit> circuits;
    for (std::size_t i = 1; i < rest.size(); ++i) circuits.push_back(load_model(rest[i]));
    if (circuits.empty()) throw UsageError("oracle query expects input circuits");
    std::vector<Variable> vars = circuits[0].variables();
    for (const Circuit &c : circuits) vars = merge_variables(vars, c.variables());
    std::vector<DenseTable> tables;
    for (const Circuit &c : circuits) tables.push_back(dense_table(c, vars, budget));
    OracleParams params;
    params.alpha = cfg.alpha;
    if (!cfg.x.empty()) params.x = parse_vars(cfg.x);
    if (!cfg.y.empty()) params.y = parse_vars(cfg.y);
    if (!cfg.k.empty()) params.degrees = parse_pairs(cfg.k);
    params.normalize = cfg.normalize;
    double v = oracle_query(kind, tables, params);
    const bool logarithmic = kind != OracleKind::kSquaredLoss && kind != OracleKind::kMoment &&
                             kind != OracleKind::kProbability && kind != OracleKind::kExpectedPrediction &&
                             kind != OracleKind::kItakuraSaito;
    if (cfg.bits && logarithmic) v /= std::numbers::ln2;
    out << format_real(v) << "\n";
    return 0;
  }
  throw UsageError("oracle expects eval or query, got '" + mode + "'");
}

int cmd_eval(const Config &cfg, std::ostream &out) {
  need_files(cfg, 1, "eval");
  const Circuit c = load_model(cfg.files[0]);
  Evidence e;
  if (!cfg.evidence.empty()) e = parse_pairs(cfg.evidence);
  for (const auto &[v, x] : e) {
    const uint32_t card = c.cardinality(v);
    if (card == 0) throw InvalidAssignment("X" + std::to_string(v) + " is not in the circuit's domain");
    if (x >= card) throw InvalidAssignment("X" + std::to_string(v) + "=" + std::to_string(x) + " is out of range");
  }
  out << format_real(integrate(c, e)) << "\n";
  return 0;
}

void report_error(const Config &cfg, std::ostream &out, std::ostream &err, const std::string &kind,
                  const std::string &what, const std::string &citation) {
  if (cfg.as_json) {
    json j;
    j["error"] = kind;
    j["message"] = what;
    if (!citation.empty()) j["citation"] = citation;
    out << j.dump() << "\n";
  }
  err << "error: " << what << "\n";
  if (!citation.empty()) err << "citation: " << citation << "\n";
}

}  // namespace

int run_cli(const std::vector<std::string> &args, std::ostream &out, std::ostream &err) {
  Config cfg;
  CLI::App app{"Probabilistic circuit operations, queries and tractability analysis", "pcq"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all", "Show help for every subcommand");

  auto add_json = [&](CLI::App *s) { s->add_flag("--json", cfg.as_json, "Machine-readable output"); };
  auto add_out = [&](CLI::App *s) { s->add_option("-o,--output", cfg.output, "Output path (default stdout)"); };

  CLI::App *check = app.add_subcommand("check", "Check structural properties of a circuit");
  check->add_option("file", cfg.files, "Circuit file")->required();
  check->add_flag("--verify", cfg.verify, "Fail when a declared property does not hold");
  check->add_option("--compatible", cfg.compatible, "Report compatibility with another circuit");
  add_json(check);

  CLI::App *apply = app.add_subcommand("apply", "Apply a circuit operation");
  apply->add_option("op", cfg.op, "add|mul|div|pow|log|exp|support|marg|uniform|smooth")->required();
  apply->add_option("files", cfg.files, "Input circuits");
  apply->add_option("--alpha", cfg.alpha, "Real exponent for pow");
  apply->add_option("--n", cfg.n, "Natural exponent for pow");
  apply->add_option("--theta1", cfg.theta1, "Weight of the first operand of add");
  apply->add_option("--theta2", cfg.theta2, "Weight of the second operand of add");
  apply->add_option("--vars", cfg.vars, "Variable table id:card,... for uniform");
  apply->add_option("--c", cfg.constant, "Constant for uniform");
  apply->add_option("--x", cfg.x, "Variables summed out by marg");
  apply->add_flag("--verify", cfg.verify, "Re-check the output flags");
  add_out(apply);

  CLI::App *query = app.add_subcommand("query", "Run an information-theoretic query");
  query->add_option("kind", cfg.op, "entropy|renyi|xent|kld|alpha|is|cs|sql|mi|moment|prob|expred")->required();
  query->add_option("files", cfg.files, "Input circuits (.json reads a decision forest)");
  query->add_option("--alpha", cfg.alpha, "Order for renyi and alpha");
  query->add_option("--x", cfg.x, "First variable block for mi");
  query->add_option("--y", cfg.y, "Second variable block for mi");
  query->add_option("--k", cfg.k, "Moment degrees var=deg,...");
  query->add_flag("--normalize", cfg.normalize, "Divide moments by the partition function");
  query->add_flag("--bits", cfg.bits, "Report logarithmic values in bits");
  add_json(query);

  CLI::App *an = app.add_subcommand("analyze", "Analyze a query pipeline");
  an->add_option("file", cfg.files, "Pipeline file")->required();
  an->add_option("--bind", cfg.bind, "Execute with name=circuit bindings");
  add_json(an);
  add_out(an);

  CLI::App *cf = app.add_subcommand("compile-forest", "Compile a decision forest");
  cf->add_option("file", cfg.files, "Forest JSON")->required();
  add_out(cf);

  CLI::App *cc = app.add_subcommand("compile-cnf", "Compile a CNF into the model-counting gadgets");
  cc->add_option("file", cfg.files, "DIMACS file")->required();
  cc->add_flag("--count", cfg.count, "Print the model count from the gadget product");
  cc->add_option("-o,--output", cfg.output, "Output prefix for <prefix>.beta.pc and <prefix>.gamma.pc");

  CLI::App *cr = app.add_subcommand("compile-rgc", "Compile a regression circuit");
  cr->add_option("file", cfg.files, "Regression circuit file")->required();
  add_out(cr);

  CLI::App *gen = app.add_subcommand("gen", "Generate a random circuit");
  gen->add_option("--vars", cfg.nvars, "Number of variables");
  gen->add_option("--seed", cfg.seed, "Seed");
  gen->add_option("--flags", cfg.flags, "Families: sd,det,norm");
  gen->add_option("--card", cfg.card, "Variable cardinality");
  add_out(gen);

  CLI::App *oracle = app.add_subcommand("oracle", "Brute-force reference by enumeration");
  oracle->add_option("args", cfg.files, "eval <file> | query <kind> <files...>")->required();
  oracle->add_option("--budget", cfg.budget, "Enumeration budget");
  oracle->add_option("--alpha", cfg.alpha, "Order for renyi and alpha");
  oracle->add_option("--x", cfg.x, "First variable block for mi");
  oracle->add_option("--y", cfg.y, "Second variable block for mi");
  oracle->add_option("--k", cfg.k, "Moment degrees var=deg,...");
  oracle->add_flag("--normalize", cfg.normalize, "Divide moments by the partition function");
  oracle->add_flag("--bits", cfg.bits, "Report logarithmic values in bits");
  add_json(oracle);

  CLI::App *ev = app.add_subcommand("eval", "Evaluate or marginalize a circuit");
  ev->add_option("file", cfg.files, "Circuit file")->required();
  ev->add_option("--x", cfg.evidence, "Evidence var=value,...; free variables are summed out");

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp &) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp &) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ParseError &e) {
    err << "error: " << e.what() << "\n";
    for (CLI::App *s : app.get_subcommands()) err << s->help();
    return 1;
  }
  cfg.alpha_set = apply->count("--alpha") > 0;
  cfg.n_set = apply->count("--n") > 0;

  const uint64_t saved_budget = enumeration_budget();
  struct Restore {
    uint64_t b;
    ~Restore() { set_enumeration_budget(b); }
  } restore{saved_budget};
  if (const char *env = std::getenv("PCQ_BUDGET")) {
    try {
      std::size_t used = 0;
      const unsigned long long b = std::stoull(env, &used);
      if (used != std::string(env).size() || b == 0) throw std::invalid_argument(env);
      set_enumeration_budget(b);
    } catch (const std::logic_error &) {
      err << "error: PCQ_BUDGET must be a positive integer\n";
      return 1;
    }
  }

  const std::string sub = app.get_subcommands().front()->get_name();
  try {
    if (sub == "check") return cmd_check(cfg, out, err);
    if (sub == "apply") return cmd_apply(cfg, out);
    if (sub == "query") return cmd_query(cfg, out);
    if (sub == "analyze") return cmd_analyze(cfg, out, err);
    if (sub == "compile-forest") return cmd_compile_forest(cfg, out);
    if (sub == "compile-cnf") return cmd_compile_cnf(cfg, out);
    if (sub == "compile-rgc") return cmd_compile_rgc(cfg, out);
    if (sub == "gen") return cmd_gen(cfg, out);
    if (sub == "oracle") return cmd_oracle(cfg, out);
    if (sub == "eval") return cmd_eval(cfg, out);
    throw UsageError("unknown subcommand '" + sub + "'");
  } catch (const PropertyViolation &e) {
    report_error(cfg, out, err, "PropertyViolation", e.what(), e.citation());
    return 2;
  } catch (const UsageError &e) {
    report_error(cfg, out, err, "UsageError", e.what(), "");
    return 1;
  } catch (const ParseError &e) {
    report_error(cfg, out, err, "ParseError", e.what(), "");
    return 1;
  } catch (const std::exception &e) {
    report_error(cfg, out, err, "Error", e.what(), "");
    return 1;
  }
}

}  // namespace pcq
