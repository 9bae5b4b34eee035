#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace gazedecouple {

inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitUsage = 2;

/// Entry point of the gazedecouple tool. args excludes the program name; env is a list of
/// NAME=VALUE strings consulted for GAZEDECOUPLE_* configuration.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err,
            const std::vector<std::string>& env);

} // namespace gazedecouple
