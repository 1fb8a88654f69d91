#pragma once

// Command-line front end. run_cli is the whole program minus process setup,
// so tests can drive it with captured streams.
//
// Exit codes: 0 success, 2 usage error, 3 numerical failure (the failing
// sub-operation is named on the error stream).

#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

namespace topocorr {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 2;
inline constexpr int kExitNumerical = 3;

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

/// Runs body and maps library exceptions to exit codes, reporting them on err.
int run_guarded(const std::function<int()>& body, std::ostream& err);

/// Shortest text that round-trips, at most 17 significant digits; '.' decimal
/// separator regardless of locale. Non-finite values print as "nan"/"inf".
std::string format_number(double value);

}  // namespace topocorr
