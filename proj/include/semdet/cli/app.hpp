#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace semdet::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitDomain = 1;  // a semdet::Error or I/O failure
inline constexpr int kExitUsage = 2;   // bad flags or arguments

/// Entry point of the `semdet` tool. argv[0] is the program name.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

/// Same, with the arguments after the program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

} // namespace semdet::cli
