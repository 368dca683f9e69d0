#pragma once

#include <string>

#include "qphase/config.hpp"

namespace qphase {

// Experiment orchestration behind the command-line driver. Every entry point
// creates cfg.out_dir, drops a resolved copy of the config there, and returns
// a process exit code. A run that aborts midway leaves whatever rows were
// already flushed, a FAILED marker with the error text, and a diagnostic
// checkpoint of the last committed state.

int run_pretrain(const RunConfig& cfg);
int run_experiment(const RunConfig& cfg);
int run_reference(const RunConfig& cfg);

// Recompute the configured metrics for a saved flow checkpoint. The
// evaluation time comes from the checkpoint's .meta sidecar unless
// time >= 0 overrides it. Empty out_csv writes the row to stdout.
int run_eval(const RunConfig& cfg, const std::string& checkpoint, double time,
             const std::string& out_csv);

}  // namespace qphase
