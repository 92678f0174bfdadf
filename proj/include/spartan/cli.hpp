#pragma once

#include <ostream>
#include <string>
#include <vector>

#include "spartan/config.hpp"
#include "spartan/gradcheck.hpp"

namespace spartan {

/// Process exit codes.
enum ExitCode : int {
  kExitOk = 0,
  kExitFailure = 1,  // gradcheck failure or unexpected error
  kExitConfig = 2,
  kExitData = 3,
  kExitCheckpoint = 4,
  kExitEmptyInput = 5,
};

/// Runs one subcommand; `args` excludes the program name.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

struct GradcheckComponent {
  std::string name;
  GradcheckReport report;
};

/// Finite-difference verification of every layer type and a full block at
/// toy sizes in f64. Activation and norm switches come from `cfg`.
std::vector<GradcheckComponent> run_gradcheck_suite(const ModelConfig& cfg,
                                                    const GradcheckOptions& opts);

}  // namespace spartan
