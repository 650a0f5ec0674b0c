#include "pcq/analyzer.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <functional>
#include <json.hpp>
#include <sstream>

#include "pcq/core.hpp"
#include "pcq/error.hpp"
#include "pcq/io.hpp"
#include "pcq/ops.hpp"
#include "pcq/rules.hpp"

namespace pcq {

const char *to_string(PipelineOp op) {
  switch (op) {
    case PipelineOp::kSymbol: return "symbol";
    case PipelineOp::kNumber: return "number";
    case PipelineOp::kAdd: return "add";
    case PipelineOp::kMul: return "mul";
    case PipelineOp::kDiv: return "div";
    case PipelineOp::kPow: return "pow";
    case PipelineOp::kLog: return "log";
    case PipelineOp::kExp: return "exp";
    case PipelineOp::kMarg: return "marg";
    case PipelineOp::kInteg: return "integ";
    case PipelineOp::kSupp: return "supp";
  }
  return "?";
}

std::optional<std::size_t> PropertyEnv::group_of(const std::string &s) const {
  // Union-find over the declared groups.
  std::vector<std::size_t> parent(cmp_groups.size());
  for (std::size_t i = 0; i < parent.size(); ++i) parent[i] = i;
  std::function<std::size_t(std::size_t)> find = [&](std::size_t i) {
    while (parent[i] != i) i = parent[i] = parent[parent[i]];
    return i;
  };
  std::map<std::string, std::size_t> first;
  for (std::size_t g = 0; g < cmp_groups.size(); ++g) {
    for (const std::string &m : cmp_groups[g]) {
      auto [it, fresh] = first.emplace(m, g);
      if (!fresh) parent[find(g)] = find(it->second);
    }
  }
  auto it = first.find(s);
  if (it == first.end()) return std::nullopt;
  return find(it->second);
}

bool PropertyEnv::marginal_deterministic(const std::string &s, const std::set<uint32_t> &vars) const {
  for (const auto &[name, v] : mdet)
    if (name == s && v == vars) return true;
  return false;
}

// ---- Parsing ----

namespace {

enum class Tok : uint8_t { kIdent, kNumber, kLParen, kRParen, kComma, kSemi, kColon, kEnd };

struct Token {
  Tok kind = Tok::kEnd;
  std::string text;
  double number = 0.0;
  int line = 1;
  int column = 1;
};

std::vector<Token> lex(const std::string &text) {
  std::vector<Token> out;
  int line = 1;
  int col = 1;
  std::size_t i = 0;
  auto advance = [&](std::size_t n) {
    for (std::size_t k = 0; k < n; ++k, ++i) {
      if (text[i] == '\n') {
        ++line;
        col = 1;
      } else {
        ++col;
      }
    }
  };
  while (i < text.size()) {
    const char c = text[i];
    if (std::isspace(static_cast<unsigned char>(c))) {
      advance(1);
      continue;
    }
    if (c == '#') {
      while (i < text.size() && text[i] != '\n') advance(1);
      continue;
    }
    Token t;
    t.line = line;
    t.column = col;
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
      std::size_t j = i;
      while (j < text.size() && (std::isalnum(static_cast<unsigned char>(text[j])) || text[j] == '_')) ++j;
      t.kind = Tok::kIdent;
      t.text = text.substr(i, j - i);
      advance(j - i);
    } else if (std::isdigit(static_cast<unsigned char>(c)) || c == '.' || c == '-' || c == '+') {
      std::size_t j = i + 1;
      while (j < text.size() &&
             (std::isdigit(static_cast<unsigned char>(text[j])) || text[j] == '.' || text[j] == 'e' ||
              text[j] == 'E' || ((text[j] == '-' || text[j] == '+') && (text[j - 1] == 'e' || text[j - 1] == 'E'))))
        ++j;
      t.kind = Tok::kNumber;
      t.text = text.substr(i, j - i);
      std::size_t used = 0;
      try {
        t.number = std::stod(t.text, &used);
      } catch (const std::exception &) {
        used = 0;
      }
      if (used != t.text.size() || !std::isfinite(t.number))
        throw ParseError("malformed number '" + t.text + "'", line, col);
      advance(j - i);
    } else {
      switch (c) {
        case '(': t.kind = Tok::kLParen; break;
        case ')': t.kind = Tok::kRParen; break;
        case ',': t.kind = Tok::kComma; break;
        case ';': t.kind = Tok::kSemi; break;
        case ':': t.kind = Tok::kColon; break;
        default: throw ParseError(std::string("unexpected character '") + c + "'", line, col);
      }
      t.text = std::string(1, c);
      advance(1);
    }
    out.push_back(std::move(t));
  }
  Token end;
  end.line = line;
  end.column = col;
  out.push_back(end);
  return out;
}

const std::map<std::string, PipelineOp> &op_names() {
  static const std::map<std::string, PipelineOp> m{
      {"add", PipelineOp::kAdd},   {"mul", PipelineOp::kMul},     {"div", PipelineOp::kDiv},
      {"pow", PipelineOp::kPow},   {"log", PipelineOp::kLog},     {"exp", PipelineOp::kExp},
      {"marg", PipelineOp::kMarg}, {"integ", PipelineOp::kInteg}, {"supp", PipelineOp::kSupp},
  };
  return m;
}

std::string var_text(const std::vector<uint32_t> &vars) {
  std::string s;
  for (uint32_t v : vars) s += (s.empty() ? "X" : ",X") + std::to_string(v);
  return s;
}

class Parser {
 public:
  explicit Parser(const std::string &text) : toks_(lex(text)) {}

  Pipeline run() {
    while (peek().kind != Tok::kEnd) {
      const Token &t = peek();
      if (t.kind == Tok::kIdent && peek(1).kind == Tok::kColon) {
        declaration();
      } else if (t.kind == Tok::kIdent && (t.text == "cmp" || t.text == "mdet") && peek(1).kind == Tok::kLParen) {
        if (t.text == "cmp")
          compatibility();
        else
          marginal_det();
      } else {
        out_.root = expression();
        if (peek().kind == Tok::kSemi) next();
        if (peek().kind != Tok::kEnd) fail("expected end of input after the expression", peek());
        break;
      }
    }
    if (out_.root < 0) fail("missing expression", peek());
    if (out_.node(out_.root).op == PipelineOp::kNumber) fail("the expression has no circuit input", toks_.front());
    return std::move(out_);
  }

 private:
  const Token &peek(std::size_t k = 0) const { return toks_[std::min(pos_ + k, toks_.size() - 1)]; }
  const Token &next() { return toks_[std::min(pos_++, toks_.size() - 1)]; }
  [[noreturn]] static void fail(const std::string &what, const Token &t) { throw ParseError(what, t.line, t.column); }
  const Token &expect(Tok kind, const char *what) {
    if (peek().kind != kind) fail(std::string("expected ") + what, peek());
    return next();
  }

  SymbolDecl &declare(const std::string &name) {
    auto [it, fresh] = out_.env.symbols.emplace(name, SymbolDecl{});
    if (fresh) out_.env.order.push_back(name);
    return it->second;
  }

  void declaration() {
    const Token name = next();
    if (op_names().count(name.text) || name.text == "cmp" || name.text == "mdet")
      fail("'" + name.text + "' is reserved", name);
    next();  // ':'
    SymbolDecl &d = declare(name.text);
    while (true) {
      const Token &f = expect(Tok::kIdent, "a flag");
      const std::string &s = f.text;
      if (s == "sm" || s == "smooth") {
        d.smooth = true;
      } else if (s == "dec" || s == "decomposable") {
        d.decomposable = true;
      } else if (s == "sd" || s == "structured") {
        d.structured = d.decomposable = true;
      } else if (s == "det" || s == "deterministic") {
        d.deterministic = true;
      } else if (s == "omni") {
        d.omni = true;
      } else if (s == "linear") {
        d.linear = true;
      } else {
        fail("unknown flag '" + s + "'", f);
      }
      if (peek().kind == Tok::kComma) {
        next();
        continue;
      }
      break;
    }
    expect(Tok::kSemi, "';' after the declaration");
  }

  void compatibility() {
    const Token head = next();
    next();  // '('
    std::vector<std::string> group;
    while (true) {
      const Token &s = expect(Tok::kIdent, "a symbol");
      SymbolDecl &d = declare(s.text);
      d.smooth = d.decomposable = true;
      group.push_back(s.text);
      if (peek().kind == Tok::kComma) {
        next();
        continue;
      }
      break;
    }
    expect(Tok::kRParen, "')'");
    if (group.size() < 2) throw ArityError("cmp expects at least 2 symbols", head.line, head.column);
    expect(Tok::kSemi, "';' after cmp(...)");
    out_.env.cmp_groups.push_back(std::move(group));
  }

  void marginal_det() {
    next();
    next();  // '('
    const std::string name = expect(Tok::kIdent, "a symbol").text;
    declare(name);
    expect(Tok::kSemi, "';' before the variable list");
    const std::vector<uint32_t> vars = var_list();
    expect(Tok::kRParen, "')'");
    expect(Tok::kSemi, "';' after mdet(...)");
    out_.env.mdet.emplace_back(name, std::set<uint32_t>(vars.begin(), vars.end()));
  }

  // Comma-separated X<id> or <id>; sorted and deduplicated.
  std::vector<uint32_t> var_list() {
    std::set<uint32_t> vars;
    while (true) {
      const Token &t = next();
      std::string digits;
      if (t.kind == Tok::kIdent && t.text.size() > 1 && (t.text[0] == 'X' || t.text[0] == 'x'))
        digits = t.text.substr(1);
      else if (t.kind == Tok::kNumber)
        digits = t.text;
      const bool ok = !digits.empty() && std::all_of(digits.begin(), digits.end(), [](char c) {
        return std::isdigit(static_cast<unsigned char>(c)) != 0;
      });
      if (!ok) fail("expected a variable such as X1", t);
      const unsigned long v = std::stoul(digits);
      if (v == 0 || v > 0xffffffffUL) fail("variable ids are positive", t);
      vars.insert(static_cast<uint32_t>(v));
      if (peek().kind == Tok::kComma) {
        next();
        continue;
      }
      break;
    }
    return {vars.begin(), vars.end()};
  }

  int intern(PipelineNode n) {
    auto it = by_text_.find(n.text);
    if (it != by_text_.end()) return it->second;
    const int id = static_cast<int>(out_.nodes.size());
    by_text_.emplace(n.text, id);
    out_.nodes.push_back(std::move(n));
    return id;
  }

  int number_node(double v) {
    PipelineNode n;
    n.op = PipelineOp::kNumber;
    n.number = v;
    n.scalar = true;
    n.text = format_real(v);
    return intern(std::move(n));
  }

  double literal(const char *what) {
    const Token &t = peek();
    if (t.kind != Tok::kNumber) fail(std::string(what) + " must be a numeric literal", t);
    next();
    return t.number;
  }

  int expression() {
    const Token &t = peek();
    if (t.kind == Tok::kNumber) {
      next();
      return number_node(t.number);
    }
    if (t.kind != Tok::kIdent) fail("expected an expression", t);
    const Token head = next();
    if (peek().kind != Tok::kLParen) {
      if (!out_.env.symbols.count(head.text)) fail("undeclared symbol '" + head.text + "'", head);
      PipelineNode n;
      n.op = PipelineOp::kSymbol;
      n.symbol = head.text;
      n.text = head.text;
      return intern(std::move(n));
    }
    auto op = op_names().find(head.text);
    if (op == op_names().end()) throw UnknownOperation("unknown operation '" + head.text + "'", head.line, head.column);
    next();  // '('
    PipelineNode n;
    n.op = op->second;
    auto arity = [&](const std::string &expected) {
      throw ArityError(head.text + " expects " + expected, head.line, head.column);
    };
    auto close = [&](const std::string &expected) {
      if (peek().kind == Tok::kComma) arity(expected);
      if (peek().kind != Tok::kRParen) fail("expected ')'", peek());
      next();
    };
    auto comma = [&](const std::string &expected) {
      if (peek().kind != Tok::kComma) arity(expected);
      next();
    };
    switch (n.op) {
      case PipelineOp::kAdd: {
        n.args.push_back(expression());
        comma("2 or 4 arguments");
        n.args.push_back(expression());
        if (peek().kind == Tok::kComma) {
          next();
          const double t1 = literal("a weight");
          comma("2 or 4 arguments");
          const double t2 = literal("a weight");
          n.weights = {t1, t2};
        } else {
          n.weights = {1.0, 1.0};
        }
        close("2 or 4 arguments");
        break;
      }
      case PipelineOp::kMul:
      case PipelineOp::kDiv:
        n.args.push_back(expression());
        comma("2 arguments");
        n.args.push_back(expression());
        close("2 arguments");
        break;
      case PipelineOp::kPow:
        n.args.push_back(expression());
        comma("2 arguments");
        n.number = literal("the exponent");
        close("2 arguments");
        break;
      case PipelineOp::kMarg:
        n.args.push_back(expression());
        if (peek().kind != Tok::kSemi) arity("a variable list after ';'");
        next();
        n.vars = var_list();
        close("1 argument and a variable list");
        break;
      default:
        if (peek().kind == Tok::kRParen) arity("1 argument");
        n.args.push_back(expression());
        close("1 argument");
        break;
    }
    bool scalar = true;
    for (int a : n.args) scalar = scalar && out_.node(a).scalar;
    if (n.op == PipelineOp::kInteg || n.op == PipelineOp::kMarg || n.op == PipelineOp::kSupp) {
      if (scalar) fail(head.text + " expects a circuit-valued argument", head);
      scalar = n.op == PipelineOp::kInteg;
    }
    n.scalar = scalar;

    std::string text = head.text + "(";
    for (std::size_t i = 0; i < n.args.size(); ++i) text += (i ? "," : "") + out_.node(n.args[i]).text;
    if (n.op == PipelineOp::kAdd && n.weights != std::vector<double>{1.0, 1.0})
      text += "," + format_real(n.weights[0]) + "," + format_real(n.weights[1]);
    if (n.op == PipelineOp::kPow) text += "," + format_real(n.number);
    if (n.op == PipelineOp::kMarg) text += ";" + var_text(n.vars);
    n.text = text + ")";
    return intern(std::move(n));
  }

  std::vector<Token> toks_;
  std::size_t pos_ = 0;
  Pipeline out_;
  std::map<std::string, int> by_text_;
};

}  // namespace

Pipeline parse_pipeline(const std::string &text) { return Parser(text).run(); }

// ---- Cost polynomials ----

CostPolynomial CostPolynomial::constant() {
  CostPolynomial c;
  c.terms_.insert(Monomial{});
  return c;
}

CostPolynomial CostPolynomial::symbol(const std::string &name) {
  CostPolynomial c;
  c.terms_.insert(Monomial{{name, 1}});
  return c;
}

CostPolynomial CostPolynomial::operator+(const CostPolynomial &o) const {
  CostPolynomial r = *this;
  r.terms_.insert(o.terms_.begin(), o.terms_.end());
  return r;
}

CostPolynomial CostPolynomial::operator*(const CostPolynomial &o) const {
  if (terms_.empty()) return o;
  if (o.terms_.empty()) return *this;
  CostPolynomial r;
  for (const Monomial &a : terms_) {
    for (const Monomial &b : o.terms_) {
      Monomial m = a;
      for (const auto &[s, e] : b) m[s] += e;
      r.terms_.insert(std::move(m));
    }
  }
  return r;
}

CostPolynomial CostPolynomial::pow(int n) const {
  CostPolynomial r = constant();
  for (int i = 0; i < n; ++i) r = r * *this;
  return r;
}

namespace {

bool divides(const CostPolynomial::Monomial &a, const CostPolynomial::Monomial &b) {
  for (const auto &[s, e] : a) {
    auto it = b.find(s);
    if (it == b.end() || it->second < e) return false;
  }
  return true;
}

}  // namespace

CostPolynomial CostPolynomial::pruned() const {
  CostPolynomial r;
  for (const Monomial &a : terms_) {
    bool dominated = false;
    for (const Monomial &b : terms_)
      if (a != b && divides(a, b)) dominated = true;
    if (!dominated) r.terms_.insert(a);
  }
  return r;
}

std::string CostPolynomial::big_o(const std::vector<std::string> &order) const {
  const CostPolynomial p = pruned();
  std::vector<std::string> symbols = order;
  for (const Monomial &m : p.terms_)
    for (const auto &[s, e] : m)
      if (std::find(symbols.begin(), symbols.end(), s) == symbols.end()) symbols.push_back(s);
  std::vector<std::vector<int>> rows;
  for (const Monomial &m : p.terms_) {
    std::vector<int> v;
    for (const std::string &s : symbols) {
      auto it = m.find(s);
      v.push_back(it == m.end() ? 0 : it->second);
    }
    rows.push_back(std::move(v));
  }
  auto degree = [](const std::vector<int> &v) {
    int d = 0;
    for (int e : v) d += e;
    return d;
  };
  auto distinct = [](const std::vector<int> &v) { return std::count_if(v.begin(), v.end(), [](int e) { return e > 0; }); };
  std::sort(rows.begin(), rows.end(), [&](const auto &a, const auto &b) {
    if (degree(a) != degree(b)) return degree(a) > degree(b);
    if (distinct(a) != distinct(b)) return distinct(a) > distinct(b);
    return a > b;
  });
  std::string out;
  for (const auto &v : rows) {
    std::string term;
    for (std::size_t i = 0; i < v.size(); ++i) {
      if (v[i] == 0) continue;
      term += "|" + symbols[i] + "|";
      if (v[i] > 1) term += "^" + std::to_string(v[i]);
    }
    if (term.empty()) term = "1";
    out += (out.empty() ? "" : "+") + term;
  }
  return "O(" + (out.empty() ? std::string("1") : out) + ")";
}

// ---- Query templates ----

namespace {

struct Pattern {
  enum Kind : uint8_t { kOp, kBind, kNumber } kind = kOp;
  PipelineOp op = PipelineOp::kSymbol;
  std::string bind;         // "P", "Q"
  char number_class = 'a';  // 'n' natural >= 2, 'r' otherwise, 'a' any, 'x' exact
  double exact = 0.0;
  std::vector<Pattern> args;
};

// Pattern text: op(args), $P binds a symbol, #n / #r / # numbers, #2 an exact value.
Pattern parse_pattern(const std::string &s, std::size_t &i) {
  Pattern p;
  if (s[i] == '$') {
    p.kind = Pattern::kBind;
    p.bind = s.substr(i + 1, 1);
    i += 2;
    return p;
  }
  if (s[i] == '#') {
    p.kind = Pattern::kNumber;
    ++i;
    if (i < s.size() && (s[i] == 'n' || s[i] == 'r')) {
      p.number_class = s[i++];
    } else if (i < s.size() && (std::isdigit(static_cast<unsigned char>(s[i])) || s[i] == '-' || s[i] == '.')) {
      std::size_t used = 0;
      p.exact = std::stod(s.substr(i), &used);
      p.number_class = 'x';
      i += used;
    }
    return p;
  }
  const std::size_t open = s.find('(', i);
  p.op = op_names().at(s.substr(i, open - i));
  i = open + 1;
  while (s[i] != ')') {
    p.args.push_back(parse_pattern(s, i));
    if (s[i] == ',') ++i;
  }
  ++i;
  return p;
}

bool natural(double a) { return a >= 2.0 && a == std::floor(a) && a <= 64.0; }

bool number_matches(const Pattern &p, double v) {
  switch (p.number_class) {
    case 'n': return natural(v);
    case 'r': return !natural(v);
    case 'x': return v == p.exact;
    default: return true;
  }
}

bool match(const Pipeline &pl, const Pattern &pat, int node, std::map<std::string, std::string> &binds) {
  const PipelineNode &n = pl.node(node);
  if (pat.kind == Pattern::kBind) {
    if (n.op != PipelineOp::kSymbol) return false;
    auto [it, fresh] = binds.emplace(pat.bind, n.symbol);
    return fresh || it->second == n.symbol;
  }
  if (pat.kind == Pattern::kNumber) return n.op == PipelineOp::kNumber && number_matches(pat, n.number);
  if (n.op != pat.op) return false;
  std::size_t arity = n.args.size();
  std::vector<Pattern> args = pat.args;
  if (n.op == PipelineOp::kPow) {
    if (args.size() != 2 || !number_matches(args[1], n.number)) return false;
    args.pop_back();
  }
  if (args.size() != arity) return false;
  for (std::size_t i = 0; i < arity; ++i)
    if (!match(pl, args[i], n.args[i], binds)) return false;
  return true;
}

struct Template {
  const char *row;
  const char *pattern;
};

// Priority order: more specific pipelines first.
constexpr Template kTemplates[] = {
    {"mutual_information", "integ(mul($P,log(div($P,mul(marg($P),marg($P))))))"},
    {"kld", "integ(mul($P,log(div($P,$Q))))"},
    {"itakura_saito", "integ(add(div($P,$Q),log(div($P,$Q))))"},
    {"cauchy_schwarz", "log(div(integ(mul($P,$Q)),pow(mul(integ(pow($P,#2)),integ(pow($Q,#2))),#0.5)))"},
    {"squared_loss", "integ(pow(add($P,$Q),#2))"},
    {"alpha_natural", "integ(mul(pow($P,#n),pow($Q,#)))"},
    {"alpha_real", "integ(mul(pow($P,#r),pow($Q,#)))"},
    {"renyi_natural", "integ(pow($P,#n))"},
    {"renyi_real", "integ(pow($P,#r))"},
    {"shannon_entropy", "integ(mul($P,log($P)))"},
    {"cross_entropy", "integ(mul($P,log($Q)))"},
};

}  // namespace

std::optional<std::string> match_query(const Pipeline &p) {
  for (const Template &t : kTemplates) {
    std::size_t i = 0;
    const Pattern pat = parse_pattern(t.pattern, i);
    for (int n = 0; n < static_cast<int>(p.nodes.size()); ++n) {
      std::map<std::string, std::string> binds;
      if (match(p, pat, n, binds)) return std::string(t.row);
    }
  }
  return std::nullopt;
}

// ---- Analysis ----

namespace {

// Why a node lacks a property: the condition traced back to the inputs and
// the operation row to blame (empty: the consuming operation).
struct Cause {
  std::string missing;
  std::string row;
};

struct Failure {
  std::string row;  // operation row id or a pseudo-row name
  Cause cause;
};

struct Info {
  NodeFacts facts;
  Cause no_det{"Det", ""};
  Cause no_sd{"SD", ""};
};

class Analyzer {
 public:
  explicit Analyzer(const Pipeline &p) : p_(p), info_(p.nodes.size()) {}

  Verdict run() {
    CostPolynomial cost;
    for (int i = 0; i < static_cast<int>(p_.nodes.size()); ++i) {
      std::optional<Failure> f = visit(i, cost);
      if (f) return hard(i, *f);
    }
    PlanVerdict plan;
    for (const Info &in : info_) plan.facts.push_back(in.facts);
    plan.cost = cost.pruned();
    plan.complexity = plan.cost.big_o(symbol_order());
    plan.query = match_query(p_);
    if (plan.query) plan.conditions = std::string(rules::query_row(*plan.query).input_conditions);
    return Verdict{std::move(plan)};
  }

 private:
  std::vector<std::string> symbol_order() const {
    std::vector<std::string> order;
    for (const PipelineNode &n : p_.nodes)
      if (n.op == PipelineOp::kSymbol) order.push_back(n.symbol);
    return order;
  }

  Verdict hard(int node, const Failure &f) const {
    HardVerdict h;
    h.node = node;
    h.node_text = p_.node(node).text;
    h.missing = f.cause.missing;
    h.query = match_query(p_);
    const std::string row_id = f.cause.row.empty() ? f.row : f.cause.row;
    const rules::Row *row = nullptr;
    for (const rules::Row &r : rules::kOperationRows)
      if (r.id == row_id) row = &r;
    if (row != nullptr) {
      h.operation = std::string(row->name);
      h.citation = h.missing == row->missing_condition ? row->citation()
                                                       : h.operation + ": requires " + h.missing;
    } else {
      h.operation = row_id;
      h.citation = row_id + ": requires " + h.missing;
    }
    if (h.query && rules::query_row(*h.query).missing_condition == h.missing)
      h.citation = rules::query_citation(*h.query);
    return Verdict{std::move(h)};
  }

  bool self_compatible(const std::string &s) const {
    const SymbolDecl &d = p_.env.symbols.at(s);
    return d.structured || d.linear || d.omni || p_.env.group_of(s).has_value();
  }

  // Failure cause when a and b cannot be multiplied by scope alignment.
  std::optional<Cause> incompatible(const NodeFacts &a, const NodeFacts &b) const {
    if (!a.decomposable || !b.decomposable) return Cause{"Cmp", ""};
    if (a.omni || b.omni) return std::nullopt;
    for (const std::string &u : a.origins) {
      for (const std::string &v : b.origins) {
        if (u == v) {
          if (!self_compatible(u)) return Cause{"SD", ""};
          continue;
        }
        const auto gu = p_.env.group_of(u);
        const auto gv = p_.env.group_of(v);
        if (!gu || !gv || *gu != *gv) return Cause{"Cmp", ""};
      }
    }
    return std::nullopt;
  }

  static bool subset(const std::set<int> &a, const std::set<int> &b) {
    return std::includes(b.begin(), b.end(), a.begin(), a.end());
  }

  // Support-aligned product: a deterministic operand whose support partition
  // the other operand refines.
  static bool aligned(const NodeFacts &a, const NodeFacts &b) {
    if (a.skeleton.empty() || b.skeleton.empty()) return false;
    return (a.deterministic && subset(a.skeleton, b.skeleton)) || (b.deterministic && subset(b.skeleton, a.skeleton));
  }

  static std::set<int> merged(const std::set<int> &a, const std::set<int> &b) {
    std::set<int> r = a;
    r.insert(b.begin(), b.end());
    return r;
  }

  // Product of two circuit nodes into `out`; `quotient` when b is a denominator.
  std::optional<Failure> product(int self, const Info &a, const Info &b, bool quotient, Info &out, CostPolynomial &cost) {
    const char *row = quotient ? "quotient" : "product";
    NodeFacts &f = out.facts;
    if (quotient && !(b.facts.smooth && b.facts.decomposable && b.facts.deterministic))
      return Failure{row, b.facts.deterministic ? Cause{"Sm, Dec", ""} : b.no_det};
    f.smooth = a.facts.smooth && b.facts.smooth;
    f.decomposable = true;
    f.origins = a.facts.origins;
    f.origins.insert(b.facts.origins.begin(), b.facts.origins.end());
    f.deterministic = a.facts.deterministic && b.facts.deterministic;
    out.no_det = a.facts.deterministic ? b.no_det : a.no_det;
    if (aligned(a.facts, b.facts)) {
      f.size = a.facts.size + b.facts.size;
      f.skeleton = merged(a.facts.skeleton, b.facts.skeleton);
      const bool cmp = !incompatible(a.facts, b.facts);
      f.structured = cmp && a.facts.structured && b.facts.structured;
      out.no_sd = !cmp ? Cause{"Cmp", ""} : (a.facts.structured ? b.no_sd : a.no_sd);
    } else {
      if (auto c = incompatible(a.facts, b.facts)) return Failure{"product", *c};
      f.size = a.facts.size * b.facts.size;
      f.structured = a.facts.structured && b.facts.structured;
      out.no_sd = a.facts.structured ? b.no_sd : a.no_sd;
      if (f.deterministic) {
        f.skeleton = merged(a.facts.skeleton, b.facts.skeleton);
        if (f.skeleton.empty()) f.skeleton = {self};
      }
    }
    f.omni = a.facts.omni && b.facts.omni;
    cost = cost + f.size;
    return std::nullopt;
  }

  std::optional<Failure> visit(int i, CostPolynomial &cost) {
    const PipelineNode &n = p_.node(i);
    Info &out = info_[static_cast<std::size_t>(i)];
    NodeFacts &f = out.facts;
    f.scalar = n.scalar;
    auto arg = [&](std::size_t k) -> const Info & { return info_[static_cast<std::size_t>(n.args[k])]; };
    if (n.scalar && n.op != PipelineOp::kInteg) return std::nullopt;

    switch (n.op) {
      case PipelineOp::kSymbol: {
        const SymbolDecl &d = p_.env.symbols.at(n.symbol);
        const bool grouped = p_.env.group_of(n.symbol).has_value();
        f.smooth = d.smooth || grouped || d.linear;
        f.decomposable = d.decomposable || d.structured || grouped || d.linear || d.omni;
        f.structured = d.structured || grouped || d.linear;
        f.deterministic = d.deterministic;
        f.omni = d.omni || d.linear;
        f.linear = d.linear;
        f.size = CostPolynomial::symbol(n.symbol);
        f.origins = {n.symbol};
        if (f.deterministic) f.skeleton = {i};
        return std::nullopt;
      }
      case PipelineOp::kNumber:
        return std::nullopt;
      case PipelineOp::kAdd: {
        const Info &a = arg(0);
        const Info &b = arg(1);
        if (a.facts.scalar || b.facts.scalar) {
          // Circuit plus a constant.
          const Info &c = a.facts.scalar ? b : a;
          out = c;
          f.deterministic = false;
          f.skeleton.clear();
          out.no_det = {"Det", "sum"};
          cost = cost + f.size;
          return std::nullopt;
        }
        f.smooth = a.facts.smooth && b.facts.smooth;
        f.decomposable = a.facts.decomposable && b.facts.decomposable;
        const std::optional<Cause> inc = incompatible(a.facts, b.facts);
        f.structured = !inc && a.facts.structured && b.facts.structured;
        out.no_sd = inc ? *inc : (a.facts.structured ? b.no_sd : a.no_sd);
        f.deterministic = false;
        out.no_det = {"Det", "sum"};
        f.omni = a.facts.omni && b.facts.omni;
        f.linear = a.facts.linear && b.facts.linear;
        f.origins = a.facts.origins;
        f.origins.insert(b.facts.origins.begin(), b.facts.origins.end());
        f.size = a.facts.size + b.facts.size;
        cost = cost + f.size;
        return std::nullopt;
      }
      case PipelineOp::kMul:
      case PipelineOp::kDiv: {
        const Info &a = arg(0);
        const Info &b = arg(1);
        const bool div = n.op == PipelineOp::kDiv;
        if (!a.facts.scalar && !b.facts.scalar) return product(i, a, b, div, out, cost);
        if (div && b.facts.scalar) {
          out = a;
          cost = cost + f.size;
          return std::nullopt;
        }
        if (div) {
          // Constant over a circuit: a reciprocal.
          if (!(b.facts.smooth && b.facts.decomposable && b.facts.deterministic))
            return Failure{"quotient", b.facts.deterministic ? Cause{"Sm, Dec", ""} : b.no_det};
          out = b;
          f.linear = false;
          cost = cost + f.size;
          return std::nullopt;
        }
        out = a.facts.scalar ? b : a;
        cost = cost + f.size;
        return std::nullopt;
      }
      case PipelineOp::kPow: {
        const Info &a = arg(0);
        const double alpha = n.number;
        const bool nat = alpha >= 1.0 && alpha == std::floor(alpha) && alpha <= 64.0;
        const bool det_path = a.facts.deterministic && a.facts.smooth && a.facts.decomposable;
        if (nat && !det_path) {
          if (!a.facts.structured) return Failure{"power_natural", a.no_sd};
          out = a;
          f.deterministic = false;
          f.skeleton.clear();
          f.linear = f.omni = false;
          f.size = a.facts.size.pow(static_cast<int>(alpha));
          cost = cost + f.size;
          return std::nullopt;
        }
        if (!det_path) {
          const Cause c = a.facts.deterministic ? Cause{"Sm, Dec", ""} : a.no_det;
          return Failure{"power_real", c};
        }
        out = a;
        f.linear = false;
        f.omni = false;
        cost = cost + f.size;
        return std::nullopt;
      }
      case PipelineOp::kLog: {
        const Info &a = arg(0);
        if (!a.facts.deterministic) return Failure{"log", a.no_det};
        if (!a.facts.smooth || !a.facts.decomposable) return Failure{"log", {"Sm, Dec", ""}};
        out = a;
        f.deterministic = false;
        out.no_det = {"Det", ""};
        f.linear = f.omni = false;
        cost = cost + f.size;
        return std::nullopt;
      }
      case PipelineOp::kExp: {
        const Info &a = arg(0);
        if (!a.facts.linear) return Failure{"exp", {"linear", ""}};
        f.smooth = f.decomposable = f.structured = f.omni = true;
        f.size = a.facts.size;
        cost = cost + f.size;
        return std::nullopt;
      }
      case PipelineOp::kMarg: {
        const Info &a = arg(0);
        if (!a.facts.smooth || !a.facts.decomposable) return Failure{"Marginalization", {"Sm, Dec", ""}};
        out = a;
        f.linear = false;
        const PipelineNode &src = p_.node(n.args[0]);
        const bool declared = src.op == PipelineOp::kSymbol &&
                              p_.env.marginal_deterministic(src.symbol, std::set<uint32_t>(n.vars.begin(), n.vars.end()));
        if (!a.facts.deterministic) {
          // keeps a.no_det
        } else if (!declared) {
          out.no_det = {"marginal Det", ""};
        } else if (!a.facts.structured) {
          out.no_det = a.no_sd;
        }
        f.deterministic = a.facts.deterministic && declared && a.facts.structured;
        if (!f.deterministic) f.skeleton.clear();
        cost = cost + f.size;
        return std::nullopt;
      }
      case PipelineOp::kInteg: {
        const Info &a = arg(0);
        if (!a.facts.smooth || !a.facts.decomposable) return Failure{"Integration", {"Sm, Dec", ""}};
        f = NodeFacts{};
        f.scalar = true;
        cost = cost + a.facts.size;
        return std::nullopt;
      }
      case PipelineOp::kSupp: {
        const Info &a = arg(0);
        if (!a.facts.deterministic) return Failure{"Support", a.no_det};
        out = a;
        f.linear = false;
        cost = cost + f.size;
        return std::nullopt;
      }
    }
    return std::nullopt;
  }

  const Pipeline &p_;
  std::vector<Info> info_;
};

std::vector<std::string> flag_names(const NodeFacts &f) {
  std::vector<std::string> out;
  if (f.smooth) out.push_back("sm");
  if (f.decomposable) out.push_back("dec");
  if (f.structured) out.push_back("sd");
  if (f.deterministic) out.push_back("det");
  if (f.omni) out.push_back("omni");
  if (f.linear) out.push_back("linear");
  return out;
}

std::vector<std::string> leaf_order(const Pipeline &p) {
  std::vector<std::string> order;
  for (const PipelineNode &n : p.nodes)
    if (n.op == PipelineOp::kSymbol) order.push_back(n.symbol);
  return order;
}

}  // namespace

Verdict analyze(const Pipeline &p) { return Analyzer(p).run(); }

std::string describe(const Pipeline &p, const Verdict &v) {
  std::ostringstream os;
  if (v.tractable()) {
    const PlanVerdict &plan = v.plan();
    os << "Plan " << plan.complexity;
    if (plan.query) {
      const rules::Row &r = rules::query_row(*plan.query);
      os << "  [" << r.name << ": " << r.input_conditions << "]";
    }
    os << "\n";
    const std::vector<std::string> order = leaf_order(p);
    for (std::size_t i = 0; i < p.nodes.size(); ++i) {
      const PipelineNode &n = p.nodes[i];
      if (n.op == PipelineOp::kNumber) continue;
      const NodeFacts &f = plan.facts[i];
      os << "  " << n.text << "  ";
      if (f.scalar) {
        os << "scalar";
      } else {
        std::string flags;
        for (const std::string &s : flag_names(f)) flags += (flags.empty() ? "" : ",") + s;
        os << "{" << flags << "} size " << f.size.big_o(order);
      }
      os << "\n";
    }
  } else {
    const HardVerdict &h = v.hard();
    os << "Hard: " << h.citation << "\n";
    os << "  at " << h.node_text << ": " << h.operation << " missing " << h.missing << "\n";
  }
  return os.str();
}

std::string to_json(const Pipeline &p, const Verdict &v) {
  nlohmann::ordered_json j;
  j["pipeline"] = p.text();
  if (v.tractable()) {
    const PlanVerdict &plan = v.plan();
    j["verdict"] = "plan";
    j["complexity"] = plan.complexity;
    j["query"] = plan.query ? nlohmann::ordered_json(*plan.query) : nlohmann::ordered_json(nullptr);
    j["conditions"] = plan.conditions;
    const std::vector<std::string> order = leaf_order(p);
    nlohmann::ordered_json nodes = nlohmann::ordered_json::array();
    for (std::size_t i = 0; i < p.nodes.size(); ++i) {
      const PipelineNode &n = p.nodes[i];
      nlohmann::ordered_json e;
      e["expr"] = n.text;
      e["kind"] = n.scalar ? "scalar" : "circuit";
      if (!n.scalar) {
        e["flags"] = flag_names(plan.facts[i]);
        e["size"] = plan.facts[i].size.big_o(order);
      }
      nodes.push_back(std::move(e));
    }
    j["nodes"] = std::move(nodes);
  } else {
    const HardVerdict &h = v.hard();
    j["verdict"] = "hard";
    j["operation"] = h.operation;
    j["missing"] = h.missing;
    j["citation"] = h.citation;
    j["node"] = h.node_text;
    j["query"] = h.query ? nlohmann::ordered_json(*h.query) : nlohmann::ordered_json(nullptr);
  }
  return j.dump();
}

// ---- Execution ----

namespace {

Circuit scale(const Circuit &c, double k) { return sum_circuits(c, c, k, 0.0).circuit; }

// Reads exp's argument as theta0 + sum_i theta_i x_i.
Circuit exp_of(const Circuit &c) {
  const std::string citation = rules::op_citation("exp");
  double theta0 = 0.0;
  std::map<uint32_t, double> theta;
  auto constant_value = [&](const Unit &u) -> std::optional<double> {
    if (!u.is_input()) return std::nullopt;
    const auto &t = u.table.values;
    for (double v : t)
      if (v != t.front()) return std::nullopt;
    return t.front();
  };
  std::function<void(UnitId, double)> walk = [&](UnitId id, double m) {
    const Unit &u = c.unit(id);
    if (u.is_sum()) {
      for (std::size_t k = 0; k < u.children.size(); ++k) walk(u.children[k], m * u.weights[k]);
      return;
    }
    if (u.is_product()) {
      std::optional<UnitId> rest;
      for (UnitId ch : u.children) {
        if (auto v = constant_value(c.unit(ch))) {
          m *= *v;
        } else if (!rest) {
          rest = ch;
        } else {
          throw PropertyViolation("exp argument is not a linear circuit", citation, id);
        }
      }
      if (rest) walk(*rest, m);
      else theta0 += m;
      return;
    }
    const auto &t = u.table.values;
    if (u.is_constant()) {
      theta0 += m * t.front();
      return;
    }
    const double slope = t.size() > 1 ? t[1] - t[0] : 0.0;
    for (std::size_t k = 0; k < t.size(); ++k)
      if (std::abs(t[k] - (t[0] + static_cast<double>(k) * slope)) > 1e-12 * (1.0 + std::abs(t[k])))
        throw PropertyViolation("exp argument is not a linear circuit", citation, id);
    theta0 += m * t[0];
    theta[u.var] += m * slope;
  };
  walk(c.output(), 1.0);
  return exp_linear(c.variables(), theta0, theta).circuit;
}

double scalar_log(double v) {
  if (!(v > 0.0)) throw DomainError("log of a non-positive scalar " + format_real(v));
  return std::log(v);
}

}  // namespace

PipelineValue execute(const Pipeline &p, const std::map<std::string, Circuit> &bindings) {
  std::vector<std::optional<PipelineValue>> val(p.nodes.size());
  auto get = [&](int k) -> const PipelineValue & { return *val[static_cast<std::size_t>(k)]; };
  auto num = [](const PipelineValue &v) { return std::get<double>(v); };
  auto circ = [](const PipelineValue &v) -> const Circuit & { return std::get<Circuit>(v); };
  auto is_num = [](const PipelineValue &v) { return std::holds_alternative<double>(v); };
  for (std::size_t i = 0; i < p.nodes.size(); ++i) {
    const PipelineNode &n = p.nodes[i];
    auto arg = [&](std::size_t k) -> const PipelineValue & { return get(n.args[k]); };
    PipelineValue r = 0.0;
    switch (n.op) {
      case PipelineOp::kSymbol: {
        auto it = bindings.find(n.symbol);
        if (it == bindings.end()) throw InvalidArgument("no circuit bound to '" + n.symbol + "'");
        r = it->second;
        break;
      }
      case PipelineOp::kNumber:
        r = n.number;
        break;
      case PipelineOp::kAdd: {
        const PipelineValue &a = arg(0);
        const PipelineValue &b = arg(1);
        const double t1 = n.weights[0];
        const double t2 = n.weights[1];
        if (is_num(a) && is_num(b)) {
          r = t1 * num(a) + t2 * num(b);
        } else if (is_num(a) || is_num(b)) {
          const Circuit &c = is_num(a) ? circ(b) : circ(a);
          const double k = is_num(a) ? t1 * num(a) : t2 * num(b);
          const double w = is_num(a) ? t2 : t1;
          r = sum_circuits(c, uniform_circuit(c.variables(), 1.0), w, k).circuit;
        } else {
          r = sum_circuits(circ(a), circ(b), t1, t2).circuit;
        }
        break;
      }
      case PipelineOp::kMul: {
        const PipelineValue &a = arg(0);
        const PipelineValue &b = arg(1);
        if (is_num(a) && is_num(b)) r = num(a) * num(b);
        else if (is_num(a)) r = scale(circ(b), num(a));
        else if (is_num(b)) r = scale(circ(a), num(b));
        else r = multiply(circ(a), circ(b)).circuit;
        break;
      }
      case PipelineOp::kDiv: {
        const PipelineValue &a = arg(0);
        const PipelineValue &b = arg(1);
        if (is_num(a) && is_num(b)) {
          if (num(b) == 0.0) throw DomainError("division by zero");
          r = num(a) / num(b);
        } else if (is_num(b)) {
          if (num(b) == 0.0) throw DomainError("division by zero");
          r = scale(circ(a), 1.0 / num(b));
        } else if (is_num(a)) {
          r = scale(restricted_power(circ(b), -1.0).circuit, num(a));
        } else {
          r = quotient(circ(a), circ(b)).circuit;
        }
        break;
      }
      case PipelineOp::kPow: {
        const PipelineValue &a = arg(0);
        const double alpha = n.number;
        if (is_num(a)) {
          r = std::pow(num(a), alpha);
          if (!std::isfinite(num(r))) throw DomainError("pow(" + format_real(num(a)) + "," + format_real(alpha) + ")");
        } else if (alpha >= 1.0 && alpha == std::floor(alpha) && alpha <= 64.0) {
          r = natural_power(circ(a), static_cast<uint32_t>(alpha)).circuit;
        } else {
          r = restricted_power(circ(a), alpha).circuit;
        }
        break;
      }
      case PipelineOp::kLog: {
        const PipelineValue &a = arg(0);
        if (is_num(a)) r = scalar_log(num(a));
        else r = log_circuit(circ(a)).circuit;
        break;
      }
      case PipelineOp::kExp: {
        const PipelineValue &a = arg(0);
        if (is_num(a)) r = std::exp(num(a));
        else r = exp_of(circ(a));
        break;
      }
      case PipelineOp::kMarg: {
        ScopeSet drop;
        for (uint32_t v : n.vars) drop.insert(v);
        r = marginalize(circ(arg(0)), drop);
        break;
      }
      case PipelineOp::kInteg:
        r = integrate(circ(arg(0)));
        break;
      case PipelineOp::kSupp:
        r = support_circuit(circ(arg(0)));
        break;
    }
    val[i] = std::move(r);
  }
  return *val[static_cast<std::size_t>(p.root)];
}

// ---- Golden cases ----

const std::vector<GoldenCase> &golden_cases() {
  static const std::vector<GoldenCase> cases{
      {"sum", false, "p: sm,dec,det; q: sm,dec,det; cmp(p,q); add(p,q)",
       "p: sm,dec,det; q: sm,dec,det; cmp(p,q); log(add(p,q))", "O(|p|+|q|)"},
      {"product", false, "p: sm,dec; q: sm,dec; cmp(p,q); mul(p,q)", "p: sm,dec; q: sm,dec; mul(p,q)", "O(|p||q|)"},
      {"power_natural", false, "p: sm,sd; pow(p,3)", "p: sm,dec; pow(p,3)", "O(|p|^3)"},
      {"power_real", false, "p: sm,dec,det; pow(p,0.5)", "p: sm,dec; pow(p,0.5)", "O(|p|)"},
      {"quotient", false, "p: sm,dec; q: sm,dec,det; cmp(p,q); div(p,q)", "p: sm,dec; q: sm,dec; cmp(p,q); div(p,q)",
       "O(|p||q|)"},
      {"log", false, "p: sm,dec,det; log(p)", "p: sm,dec; log(p)", "O(|p|)"},
      {"exp", false, "p: linear; exp(p)", "p: sm,dec; exp(p)", "O(|p|)"},
      {"cross_entropy", true, "p: sm,dec; q: sm,dec,det; cmp(p,q); integ(mul(p,log(q)))",
       "p: sm,dec; q: sm,dec; cmp(p,q); integ(mul(p,log(q)))", "O(|p||q|)"},
      {"shannon_entropy", true, "p: sm,dec,det; integ(mul(p,log(p)))", "p: sm,dec; integ(mul(p,log(p)))", "O(|p|)"},
      {"renyi_natural", true, "p: sm,sd; log(integ(pow(p,3)))", "p: sm,dec; log(integ(pow(p,3)))", "O(|p|^3)"},
      {"renyi_real", true, "p: sm,dec,det; log(integ(pow(p,0.5)))", "p: sm,dec; log(integ(pow(p,0.5)))", "O(|p|)"},
      {"mutual_information", true,
       "p: sm,sd,det; mdet(p; X2,X3); mdet(p; X1); "
       "integ(mul(p,log(div(p,mul(marg(p;X2,X3),marg(p;X1))))))",
       "p: sm,dec,det; mdet(p; X2,X3); mdet(p; X1); "
       "integ(mul(p,log(div(p,mul(marg(p;X2,X3),marg(p;X1))))))",
       "O(|p|)"},
      {"kld", true, "p: sm,dec,det; q: sm,dec,det; cmp(p,q); integ(mul(p,log(div(p,q))))",
       "p: sm,dec; q: sm,dec; cmp(p,q); integ(mul(p,log(div(p,q))))", "O(|p||q|)"},
      {"alpha_natural", true, "p: sm,dec; q: sm,dec,det; cmp(p,q); integ(mul(pow(p,2),pow(q,-1)))",
       "p: sm,dec; q: sm,dec; cmp(p,q); integ(mul(pow(p,2),pow(q,-1)))", "O(|p|^2|q|)"},
      {"alpha_real", true, "p: sm,dec,det; q: sm,dec,det; cmp(p,q); integ(mul(pow(p,0.5),pow(q,0.5)))",
       "p: sm,dec; q: sm,dec; cmp(p,q); integ(mul(pow(p,0.5),pow(q,0.5)))", "O(|p||q|)"},
      {"itakura_saito", true, "p: sm,dec,det; q: sm,dec,det; cmp(p,q); integ(add(div(p,q),log(div(p,q)),1,-1))",
       "p: sm,dec; q: sm,dec; cmp(p,q); integ(add(div(p,q),log(div(p,q)),1,-1))", "O(|p||q|)"},
      {"cauchy_schwarz", true,
       "p: sm,dec; q: sm,dec; cmp(p,q); "
       "log(div(integ(mul(p,q)),pow(mul(integ(pow(p,2)),integ(pow(q,2))),0.5)))",
       "p: sm,dec; q: sm,dec; log(div(integ(mul(p,q)),pow(mul(integ(pow(p,2)),integ(pow(q,2))),0.5)))",
       "O(|p||q|+|p|^2+|q|^2)"},
      {"squared_loss", true, "p: sm,dec; q: sm,dec; cmp(p,q); integ(pow(add(p,q,1,-1),2))",
       "p: sm,dec; q: sm,dec; integ(pow(add(p,q,1,-1),2))", "O(|p||q|+|p|^2+|q|^2)"},
  };
  return cases;
}

}  // namespace pcq
