#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace vacstrat {

// Runs one subcommand. `args` excludes the program name. Returns the process
// exit status: 0 on success, 1 for domain errors, 2 for usage errors.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace vacstrat
