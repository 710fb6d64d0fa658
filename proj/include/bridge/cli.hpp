#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace bridge {

namespace cli_exit {
inline constexpr int kOk = 0;
inline constexpr int kRemoteFailure = 1;
inline constexpr int kSchema = 2;
inline constexpr int kDuplicate = 3;
inline constexpr int kNotFound = 4;
inline constexpr int kInvalidState = 5;
inline constexpr int kTransport = 6;
}  // namespace cli_exit

/// Runs `bridge <args...>` (arguments without the program name) against the
/// admin API and returns the process exit code.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace bridge
