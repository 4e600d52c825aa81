#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace plab {

/// Exit codes of the command-line front end.
inline constexpr int kExitOk = 0;
inline constexpr int kExitValidation = 1;
inline constexpr int kExitRuntime = 2;

/// Runs one invocation. `args` excludes the program name. Machine-readable
/// results go to `out`, usage text and diagnostics to `err`.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace plab
