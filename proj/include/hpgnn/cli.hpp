#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace hpgnn::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 2;        // unknown flag / bad invocation
inline constexpr int kExitMissingInput = 3; // input file not found
inline constexpr int kExitBadParam = 4;     // parameter out of range
inline constexpr int kExitData = 5;         // parse / dimension / label errors
inline constexpr int kExitStage = 6;        // solver or training stage failure
inline constexpr int kExitInternal = 7;

/// Runs one subcommand (lift, stats, ppr, train, eval, sanity). Writes
/// human-readable output to `out` and, on failure, a machine-readable error
/// JSON line to `err`. Returns the process exit status.
int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

/// Full --help text, listing every flag with its default.
std::string help_text();

} // namespace hpgnn::cli
