#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace authformer {

/// Exit codes of the command-line tool.
enum ExitCode : int { kExitOk = 0, kExitRuntime = 1, kExitValidation = 2 };

/// Runs one command. `args` excludes the program name.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace authformer
