#pragma once

#include <iosfwd>
#include <string>

#include "pcq/circuit.hpp"

namespace pcq {

// Line-oriented circuit text format:
//   pcirc 1
//   var <id> <cardinality>
//   inp <uid> <var> <v0> ... [| <m0> ...]    (var 0: constant, one value)
//   sum <uid> <n> <child1> <w1> ... <childn> <wn>
//   prd <uid> <n> <child1> ... <childn>
//   out <uid>
//   flag <smooth|dec|sd|det|omni>
//   class <name>
// Unit ids strictly increase and children precede parents. `#` starts a
// comment. Flags load as declared.
Circuit read_circuit(std::istream &in);
Circuit read_circuit_string(const std::string &text);
Circuit load_circuit(const std::string &path);

void write_circuit(std::ostream &out, const Circuit &c);
std::string write_circuit_string(const Circuit &c);
void save_circuit(const std::string &path, const Circuit &c);

// Shortest decimal that parses back to the same double.
std::string format_real(double v);
double parse_real(const std::string &token);

}  // namespace pcq
