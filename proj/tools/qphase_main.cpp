#include <exception>
#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "qphase/config.hpp"
#include "qphase/runner.hpp"

namespace {

struct Common {
  std::string config_path;
  std::string out_dir;
  std::uint64_t seed = 0;
  bool has_seed = false;
  int threads = 1;
};

void add_common(CLI::App* cmd, Common& c) {
  cmd->add_option("--config", c.config_path, "experiment config (json)")
      ->required();
  cmd->add_option("--out", c.out_dir, "output directory (overrides config)");
  cmd->add_option("--seed", c.seed, "global seed (overrides config)")
      ->each([&](const std::string&) { c.has_seed = true; });
  cmd->add_option("--threads", c.threads, "worker threads (currently 1)");
}

qphase::RunConfig load(const Common& c) {
  qphase::RunConfig cfg = qphase::parse_config(c.config_path);
  if (c.has_seed) cfg.seed = c.seed;
  if (!c.out_dir.empty()) cfg.out_dir = c.out_dir;
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"phase-space simulator for lossy bosonic lattices"};
  app.require_subcommand(1);

  Common cp, ce, cr, cv;
  std::string checkpoint, eval_csv;
  double eval_time = -1;

  CLI::App* pre = app.add_subcommand("pretrain", "fit the flow to the initial state");
  add_common(pre, cp);
  CLI::App* evo = app.add_subcommand("evolve", "run the configured time evolution");
  add_common(evo, ce);
  CLI::App* ref = app.add_subcommand("reference", "write the exact-oracle trajectory");
  add_common(ref, cr);
  CLI::App* ev = app.add_subcommand("eval", "recompute metrics for a checkpoint");
  add_common(ev, cv);
  ev->add_option("--checkpoint", checkpoint, "flow checkpoint to evaluate")
      ->required();
  ev->add_option("--time", eval_time, "evaluation time (default: .meta sidecar)");
  ev->add_option("--csv", eval_csv, "write the row here instead of stdout");

  CLI11_PARSE(app, argc, argv);

  try {
    if (pre->parsed()) return qphase::run_pretrain(load(cp));
    if (evo->parsed()) return qphase::run_experiment(load(ce));
    if (ref->parsed()) return qphase::run_reference(load(cr));
    return qphase::run_eval(load(cv), checkpoint, eval_time, eval_csv);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
