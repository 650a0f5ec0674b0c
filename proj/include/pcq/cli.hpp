#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace pcq {

// Runs one `pcq` subcommand. `args` excludes the program name. Returns 0 on
// success, 2 when a structural precondition or hardness verdict refuses the
// request, and 1 on usage, input or other failures.
int run_cli(const std::vector<std::string> &args, std::ostream &out, std::ostream &err);

}  // namespace pcq
