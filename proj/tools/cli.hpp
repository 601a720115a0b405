#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace critwalk::cli {

inline constexpr const char* kToolVersion = "1.0.0";
inline constexpr const char* kSeedEnv = "CRITWALK_SEED";
inline constexpr unsigned long long kDefaultSeed = 20261016;

enum ExitCode : int { kOk = 0, kComputeError = 1, kConfigError = 2 };

/// Runs one subcommand. args excludes the program name, e.g.
/// {"counterexample", "--eps", "0.01"}. Results go to `out` unless --out
/// names a file; diagnostics go to `err`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace critwalk::cli
