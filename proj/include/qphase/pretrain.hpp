#pragma once

#include <functional>

#include "qphase/flow.hpp"

namespace qphase {

struct TargetDensity {
  int dim = 2;
  std::function<double(const Vec&)> log_density;
  bool normalized = false;
};

TargetDensity gaussian_target(const Vec& mean, const Vec& var);
// Antisymmetric two-well condensate of n_total bosons:
// Q = ((q1-q2)^2 + (p1-p2)^2)^N exp(-|x|^2) / (pi^2 2^N N!), normalized.
TargetDensity bec_target(int n_total);

struct MhOptions {
  double proposal_sigma = 0.5;
  long burn_in = 5000;
  int thin = 5;
};

struct MhResult {
  Mat points;
  double acceptance_rate = 0;
};

// Gaussian random-walk Metropolis-Hastings started at the origin. Warns (not
// fatal) when the post-burn-in acceptance rate leaves [0.1, 0.7].
MhResult mh_sample(const TargetDensity& target, int n, const MhOptions& opt,
                   RngStream& rng);

// Adam on -mean log q over random minibatches; returns the per-epoch NLL
// (evaluated before each update).
Vec nll_pretrain(FlowModel& model, const Mat& points, int epochs, int batch_n,
                 double lr, RngStream& rng);

// Adam on the forward KL(target || model) score estimator with importance
// weights w = Q_init/Q_theta over model samples; self-normalized by default.
// Returns the per-epoch KL estimates. Warns when ESS < 0.01 batch_n.
Vec kl_pretrain(FlowModel& model, const TargetDensity& target, int epochs,
                int batch_n, double lr, RngStream& rng,
                bool self_normalize = true);

// mean of log Q_init - log Q_theta over reference points drawn from Q_init
double forward_kl_estimate(const FlowModel& model, const TargetDensity& target,
                           const Mat& ref_points);

}  // namespace qphase
