#pragma once

#include <Eigen/Dense>
#include <vector>

#include "qphase/flow.hpp"
#include "qphase/lindblad.hpp"

namespace qphase {

// First and second moments of the harmonic-model Q function, which stays
// Gaussian for all time: mu' = A mu, Sigma' = A Sigma + Sigma A^T + 2D with
// per-well blocks A = [[-g/2, w], [-w, -g/2]], D = g(nbar+1)/4 I.
struct GaussianMomentState {
  Vec mu;     // (q_1..q_M, p_1..p_M)
  Mat sigma;  // 2M x 2M, symmetric positive definite
};

GaussianMomentState gaussian_moment_solution(const ModelSpec& spec,
                                             const GaussianMomentState& init,
                                             double t);

// Frozen Gaussian with a cached Cholesky factor: batch log density, sampling.
class GaussianDensity {
 public:
  explicit GaussianDensity(GaussianMomentState state);

  const GaussianMomentState& state() const { return state_; }
  int dim() const { return static_cast<int>(state_.mu.size()); }
  double log_density(const Vec& x) const;
  void log_density(const Mat& X, Vec& out) const;
  void sample(int n, RngStream& rng, Mat& out) const;

 private:
  GaussianMomentState state_;
  Mat lower_;
  double log_norm_ = 0;  // 0.5 log det(2 pi Sigma)
};

// Mode correlations C_ij = <a_i^dag a_j> of the lossy hopping chain evolve
// linearly: C' = i[h, C] - {Gamma, C}/2, so C(t) = e^{Mt} C0 e^{M^dag t}
// with M = ih - Gamma/2 and h the hopping matrix.
struct SecondMomentState {
  Eigen::MatrixXcd c;

  double occupation(int mode) const { return c(mode, mode).real(); }
};

SecondMomentState bosonic_moment_solution(double hopping,
                                          const std::vector<double>& gamma,
                                          const SecondMomentState& c0, double t);

}  // namespace qphase
