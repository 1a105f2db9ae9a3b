#pragma once

#include <iosfwd>

namespace codkit {

enum ExitCode : int { kExitOk = 0, kExitFailure = 1, kExitPartial = 2 };

/// Entry point of the codkit command line. Writes results to `out` and
/// diagnostics to `err`.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace codkit
