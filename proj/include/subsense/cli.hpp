#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace subsense::cli {

// Runs one subcommand. `args` excludes the program name. Returns 0 on
// success, 1 on a usage error (help on `err`), 2 on a data or contract error.
int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace subsense::cli
