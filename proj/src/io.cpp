#include "pcq/io.hpp"

#include <charconv>
#include <fstream>
#include <sstream>
#include <unordered_map>

#include "pcq/error.hpp"

namespace pcq {

namespace {

class LineReader {
 public:
  LineReader(const std::string &line, int number) : in_(line), number_(number) {}

  bool next(std::string &tok) { return static_cast<bool>(in_ >> tok); }

  std::string need(const char *what) {
    std::string tok;
    if (!(in_ >> tok)) fail(std::string("expected ") + what);
    return tok;
  }

  uint64_t need_uint(const char *what) {
    const std::string tok = need(what);
    uint64_t v = 0;
    auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
    if (ec != std::errc() || ptr != tok.data() + tok.size()) fail(std::string("bad ") + what + " '" + tok + "'");
    return v;
  }

  double need_real(const char *what) {
    const std::string tok = need(what);
    try {
      return parse_real(tok);
    } catch (const Error &) {
      fail(std::string("bad ") + what + " '" + tok + "'");
    }
    return 0.0;
  }

  void done() {
    std::string tok;
    if (in_ >> tok) fail("unexpected token '" + tok + "'");
  }

  [[noreturn]] void fail(const std::string &what) const { throw ParseError(what, number_, 1); }

 private:
  std::istringstream in_;
  int number_;
};

}  // namespace

std::string format_real(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

double parse_real(const std::string &token) {
  double v = 0.0;
  const char *begin = token.data();
  if (!token.empty() && token[0] == '+') ++begin;
  auto [ptr, ec] = std::from_chars(begin, token.data() + token.size(), v);
  if (ec != std::errc() || ptr != token.data() + token.size() || begin == ptr)
    throw InvalidArgument("not a real number: '" + token + "'");
  return v;
}

Circuit read_circuit(std::istream &in) {
  std::string raw;
  int number = 0;
  bool header = false;
  std::vector<Variable> vars;
  std::optional<CircuitBuilder> builder;
  std::unordered_map<uint64_t, UnitId> ids;
  std::optional<uint64_t> last_uid;
  std::optional<UnitId> output;
  PropertyFlags flags;

  auto ensure_builder = [&](LineReader &lr) -> CircuitBuilder & {
    if (!builder) {
      try {
        builder.emplace(vars);
      } catch (const InvalidArgument &e) {
        lr.fail(e.what());
      }
    }
    return *builder;
  };
  auto new_uid = [&](LineReader &lr) {
    const uint64_t uid = lr.need_uint("unit id");
    if (last_uid && uid <= *last_uid) lr.fail("unit ids must strictly increase");
    last_uid = uid;
    return uid;
  };
  auto child = [&](LineReader &lr) {
    const uint64_t uid = lr.need_uint("child id");
    auto it = ids.find(uid);
    if (it == ids.end()) lr.fail("child " + std::to_string(uid) + " is not defined before its parent");
    return it->second;
  };

  while (std::getline(in, raw)) {
    ++number;
    if (auto hash = raw.find('#'); hash != std::string::npos) raw.erase(hash);
    LineReader lr(raw, number);
    std::string kw;
    if (!lr.next(kw)) continue;
    if (!header) {
      if (kw != "pcirc" || lr.need("version") != "1") lr.fail("missing 'pcirc 1' header");
      lr.done();
      header = true;
      continue;
    }
    try {
      if (kw == "var") {
        if (builder) lr.fail("var declarations must precede units");
        const auto id = static_cast<uint32_t>(lr.need_uint("variable id"));
        const auto card = static_cast<uint32_t>(lr.need_uint("cardinality"));
        vars.push_back({id, card});
        lr.done();
      } else if (kw == "inp") {
        CircuitBuilder &b = ensure_builder(lr);
        const uint64_t uid = new_uid(lr);
        const auto var = static_cast<uint32_t>(lr.need_uint("variable"));
        std::vector<double> values;
        std::vector<uint8_t> mask;
        bool in_mask = false;
        std::string tok;
        while (lr.next(tok)) {
          if (tok == "|") {
            if (in_mask) lr.fail("duplicate '|'");
            in_mask = true;
            continue;
          }
          if (in_mask) {
            if (tok != "0" && tok != "1") lr.fail("mask entries must be 0 or 1");
            mask.push_back(tok == "1" ? 1 : 0);
          } else {
            try {
              values.push_back(parse_real(tok));
            } catch (const Error &) {
              lr.fail("bad value '" + tok + "'");
            }
          }
        }
        InputTable t = InputTable::from_values(values);
        if (in_mask) {
          if (mask.size() != values.size()) lr.fail("mask length differs from value count");
          t.support = mask;
        }
        if (var == 0) {
          if (values.size() != 1) lr.fail("constant input needs exactly one value");
          if (in_mask && mask[0] == 0 && values[0] != 0.0) lr.fail("nonzero value off the support mask");
          ids[uid] = b.add_constant(values[0]);
        } else {
          ids[uid] = b.add_input(var, std::move(t));
        }
      } else if (kw == "sum") {
        CircuitBuilder &b = ensure_builder(lr);
        const uint64_t uid = new_uid(lr);
        const uint64_t n = lr.need_uint("child count");
        if (n == 0) lr.fail("sum unit needs at least one child");
        std::vector<UnitId> kids;
        std::vector<double> weights;
        for (uint64_t i = 0; i < n; ++i) {
          kids.push_back(child(lr));
          weights.push_back(lr.need_real("weight"));
        }
        lr.done();
        auto s = b.add_sum(std::move(kids), std::move(weights));
        if (!s) lr.fail("sum unit has only zero weights");
        ids[uid] = *s;
      } else if (kw == "prd") {
        CircuitBuilder &b = ensure_builder(lr);
        const uint64_t uid = new_uid(lr);
        const uint64_t n = lr.need_uint("child count");
        if (n < 2) lr.fail("product unit needs at least two children");
        std::vector<UnitId> kids;
        for (uint64_t i = 0; i < n; ++i) kids.push_back(child(lr));
        lr.done();
        ids[uid] = b.add_product(std::move(kids));
      } else if (kw == "out") {
        if (output) lr.fail("duplicate output");
        output = child(lr);
        lr.done();
      } else if (kw == "flag") {
        const std::string f = lr.need("flag name");
        lr.done();
        if (f == "smooth") {
          flags.smooth = Status::kDeclared;
        } else if (f == "dec") {
          flags.decomposable = Status::kDeclared;
        } else if (f == "sd") {
          flags.structured = Status::kDeclared;
          flags.decomposable = Status::kDeclared;
        } else if (f == "det") {
          flags.deterministic = Status::kDeclared;
        } else if (f == "omni") {
          flags.omni = Status::kDeclared;
        } else {
          lr.fail("unknown flag '" + f + "'");
        }
      } else if (kw == "class") {
        flags.compat_class = lr.need("class name");
        lr.done();
      } else {
        lr.fail("unknown keyword '" + kw + "'");
      }
    } catch (const ParseError &) {
      throw;
    } catch (const Error &e) {
      lr.fail(e.what());
    }
  }
  if (!header) throw ParseError("missing 'pcirc 1' header", number + 1, 1);
  if (!output) throw ParseError("missing 'out' line", number + 1, 1);
  return builder->build(*output, flags);
}

Circuit read_circuit_string(const std::string &text) {
  std::istringstream in(text);
  return read_circuit(in);
}

Circuit load_circuit(const std::string &path) {
  std::ifstream in(path);
  if (!in) throw InvalidArgument("cannot open '" + path + "'");
  return read_circuit(in);
}

void write_circuit(std::ostream &out, const Circuit &c) {
  out << "pcirc 1\n";
  for (const Variable &v : c.variables()) out << "var " << v.id << ' ' << v.cardinality << '\n';
  for (UnitId id = 0; id < c.unit_count(); ++id) {
    const Unit &u = c.unit(id);
    if (u.is_input()) {
      out << "inp " << id << ' ' << u.var;
      bool default_mask = true;
      for (std::size_t i = 0; i < u.table.values.size(); ++i) {
        out << ' ' << format_real(u.table.values[i]);
        default_mask = default_mask && (u.table.support[i] != 0) == (u.table.values[i] != 0.0);
      }
      if (!default_mask) {
        out << " |";
        for (uint8_t m : u.table.support) out << ' ' << (m ? 1 : 0);
      }
    } else if (u.is_sum()) {
      out << "sum " << id << ' ' << u.children.size();
      for (std::size_t i = 0; i < u.children.size(); ++i) out << ' ' << u.children[i] << ' ' << format_real(u.weights[i]);
    } else {
      out << "prd " << id << ' ' << u.children.size();
      for (UnitId ch : u.children) out << ' ' << ch;
    }
    out << '\n';
  }
  out << "out " << c.output() << '\n';
  const PropertyFlags &f = c.flags();
  if (holds(f.smooth)) out << "flag smooth\n";
  if (holds(f.decomposable)) out << "flag dec\n";
  if (holds(f.structured)) out << "flag sd\n";
  if (holds(f.deterministic)) out << "flag det\n";
  if (holds(f.omni)) out << "flag omni\n";
  if (f.compat_class) out << "class " << *f.compat_class << '\n';
}

std::string write_circuit_string(const Circuit &c) {
  std::ostringstream out;
  write_circuit(out, c);
  return out.str();
}

void save_circuit(const std::string &path, const Circuit &c) {
  std::ofstream out(path);
  if (!out) throw InvalidArgument("cannot write '" + path + "'");
  write_circuit(out, c);
}

}  // namespace pcq
