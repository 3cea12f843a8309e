#pragma once

#include <iosfwd>

#include "dagmath/error.hpp"

namespace dagmath {

enum ExitCode : int {
  kExitOk = 0,
  kExitValidation = 1,  // rule violations, bad input data, missing truths
  kExitIo = 2,
  kExitEndpoint = 3,
  kExitConfig = 4,
};

int exit_code_for(ErrorCode code);

// Subcommands: validate, eval, auc, cohorts, simulate, sample, build-bench.
// Reports and manifest.json go to --out (default "out").
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace dagmath
