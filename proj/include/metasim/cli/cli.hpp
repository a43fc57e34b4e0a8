#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace metasim::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitDomain = 1;
inline constexpr int kExitUsage = 2;

/// Runs one `metasim` invocation. `args` excludes the program name. Results
/// go to `out`, warnings and errors to `err`. Returns 0 on success, 1 when a
/// pipeline stage fails and 2 for usage errors.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

/// METASIM_BACKEND when set, else "dyn".
std::string default_backend();

}  // namespace metasim::cli
