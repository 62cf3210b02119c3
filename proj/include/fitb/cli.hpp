#pragma once

#include <iosfwd>
#include <span>
#include <string>

namespace fitb::cli {

/// Exit codes: 0 success, 1 usage error, 2 data or validation error.
enum ExitCode : int { kOk = 0, kUsage = 1, kDataError = 2 };

/// Runs one subcommand (ingest, gen-synthetic, split, train, eval, predict).
/// `args` excludes the program name. Results go to `out`; diagnostics and the
/// effective-config log go to `err`.
int run(std::span<const std::string> args, std::ostream& out, std::ostream& err);

int run(int argc, const char* const* argv);

}  // namespace fitb::cli
