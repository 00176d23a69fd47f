// runner.hpp — Task dispatch: build the model, run the requested workflow,
// write machine-readable artifacts plus a metadata block.

#pragma once

#include <string>

#include "qme/config.hpp"

namespace qme::cli {

// Executes the configured task and writes the result files into out_dir
// (falls back to config.out_dir when empty). Returns the process exit code:
// 0 success, 2 validation failure, 3 numerical non-convergence.
int run(const RunConfig& config, const std::string& out_dir = "");

}  // namespace qme::cli
