#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace warpres {

/// Command-line entry point; `args` excludes the program name. Returns the
/// process exit code: 0 ok, 1 runtime failure, 2 usage error, 3 config error.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

} // namespace warpres
