#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "qphase/evolve.hpp"
#include "qphase/flow.hpp"
#include "qphase/lindblad.hpp"

namespace qphase {

enum class Method { EulerKL, Tdvp, PseudoSpectral };

struct FlowSpec {
  int layers = 3;
  int hidden = 5;
  double s_cap = 5.0;
};

struct InitSpec {
  enum class Kind { Gaussian, Bec } kind = Kind::Gaussian;
  Vec mean, var;   // gaussian: one entry per coordinate
  int n_total = 8; // bec: total particle number
};

struct MetricSpec {
  long cadence = 1;
  int samples = 4096;
  bool l1 = true;
  bool centroid = true;
  bool liouvillian = true;
  bool n1 = false;
  long checkpoint_cadence = 0;  // 0 = final checkpoint only
};

struct PsSpec {
  int grid_n = 256;
  double extent = 10.0;
  double rtol = 1e-8;
  std::vector<double> times{3, 6, 9, 12, 15};
};

struct PretrainSpec {
  long mh_n = 100000;
  double mh_sigma = 0.5;
  long burn_in = 5000;
  int thin = 5;
  int nll_epochs = 2000;
  int kl_epochs = 2000;
  int batch = 1024;
  double lr = 1e-3;
};

struct RunConfig {
  ModelSpec model;
  std::uint64_t param_seed = 0;
  Method method = Method::EulerKL;
  FlowSpec flow;
  EulerKLConfig euler;
  TdvpConfig tdvp;
  PsSpec ps;
  InitSpec init;
  MetricSpec metrics;
  PretrainSpec pretrain;
  std::uint64_t seed = 1;
  std::string out_dir = "out";
  std::string init_checkpoint;

  void validate() const;
};

// Parses the JSON config; "draw" parameter values are materialized from
// param_seed (omega, gamma in [0.5, 1.5), nbar in [3, 7)).
RunConfig parse_config(const std::string& path);
RunConfig parse_config_text(const std::string& text);
// resolved copy with all drawn values materialized
std::string render_config(const RunConfig& cfg);

}  // namespace qphase
