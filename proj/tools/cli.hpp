#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace hsdir::cli {

/// Exit statuses besides the detector ladder (0 clean, 1 suspicious, 2 alarm).
inline constexpr int kExitUsage = 64;
inline constexpr int kExitValidation = 65;
inline constexpr int kExitFile = 66;
inline constexpr int kExitInternal = 70;

/// Runs one invocation; args[0] is the program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace hsdir::cli
