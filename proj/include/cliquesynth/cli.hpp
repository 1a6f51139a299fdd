#pragma once

#include <iosfwd>

namespace cliquesynth {

/// Exit codes of the command-line tool.
enum ExitCode : int {
  kExitOk = 0,
  kExitMalformed = 1,
  kExitInfeasible = 2,
  kExitCertification = 3,
};

/// Subcommands gen, synth, verify, norm and bench. Reports go to `out`,
/// diagnostics to `err`.
int run_cli(int argc, const char* const* argv, std::ostream& out,
            std::ostream& err);

}  // namespace cliquesynth
