#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace fedwatch::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitRuntime = 1;
inline constexpr int kExitUsage = 2;

/// Runs one command line; args[0] is the program name. Help and usage
/// errors go to `out`/`err`; data only ever goes to files.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace fedwatch::cli
