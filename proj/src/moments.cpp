#include "qphase/moments.hpp"

#include <unsupported/Eigen/MatrixFunctions>
#include <cmath>

#include "qphase/errors.hpp"

namespace qphase {

namespace {
constexpr double kPi = 3.14159265358979323846;
}

GaussianMomentState gaussian_moment_solution(const ModelSpec& spec,
                                             const GaussianMomentState& init,
                                             double t) {
  if (spec.kind != ModelSpec::Kind::Harmonic)
    throw UnsupportedTermError("moment oracle: harmonic models only");
  spec.validate();
  int M = spec.n_modes();
  int d = 2 * M;
  if (init.mu.size() != d || init.sigma.rows() != d || init.sigma.cols() != d)
    throw DomainError("moment oracle: state dimension mismatch");

  // e^{At} per well is a damped rotation; the stationary covariance is
  // (nbar+1)/2 per axis.
  Mat phi = Mat::Zero(d, d);
  Mat sig_inf = Mat::Zero(d, d);
  for (int j = 0; j < M; ++j) {
    double damp = std::exp(-0.5 * spec.gamma[j] * t);
    double c = std::cos(spec.omega[j] * t), s = std::sin(spec.omega[j] * t);
    phi(j, j) = damp * c;
    phi(j, M + j) = damp * s;
    phi(M + j, j) = -damp * s;
    phi(M + j, M + j) = damp * c;
    double v = 0.5 * (spec.nbar[j] + 1.0);
    sig_inf(j, j) = v;
    sig_inf(M + j, M + j) = v;
  }
  GaussianMomentState out;
  out.mu = phi * init.mu;
  out.sigma = phi * (init.sigma - sig_inf) * phi.transpose() + sig_inf;
  return out;
}

GaussianDensity::GaussianDensity(GaussianMomentState state)
    : state_(std::move(state)) {
  int d = dim();
  if (state_.sigma.rows() != d || state_.sigma.cols() != d)
    throw DomainError("gaussian density: shape mismatch");
  Eigen::LLT<Mat> llt(0.5 * (state_.sigma + state_.sigma.transpose()));
  if (llt.info() != Eigen::Success)
    throw DomainError("gaussian density: covariance not positive definite");
  lower_ = llt.matrixL();
  log_norm_ = 0.5 * d * std::log(2.0 * kPi);
  for (int i = 0; i < d; ++i) log_norm_ += std::log(lower_(i, i));
}

double GaussianDensity::log_density(const Vec& x) const {
  Vec w = lower_.triangularView<Eigen::Lower>().solve(x - state_.mu);
  return -0.5 * w.squaredNorm() - log_norm_;
}

void GaussianDensity::log_density(const Mat& X, Vec& out) const {
  Mat W = lower_.triangularView<Eigen::Lower>().solve(
      (X.rowwise() - state_.mu.transpose()).transpose());
  out = -0.5 * W.colwise().squaredNorm().transpose().array() - log_norm_;
}

void GaussianDensity::sample(int n, RngStream& rng, Mat& out) const {
  int d = dim();
  Mat z(n, d);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < d; ++j) z(i, j) = rng.normal();
  out = z * lower_.transpose();
  out.rowwise() += state_.mu.transpose();
}

SecondMomentState bosonic_moment_solution(double hopping,
                                          const std::vector<double>& gamma,
                                          const SecondMomentState& c0, double t) {
  int M = static_cast<int>(c0.c.rows());
  if (c0.c.cols() != M || static_cast<int>(gamma.size()) != M)
    throw DomainError("bosonic moments: shape mismatch");
  Eigen::MatrixXcd gen = Eigen::MatrixXcd::Zero(M, M);
  for (int j = 0; j + 1 < M; ++j) {
    gen(j, j + 1) += cplx(0, -hopping);
    gen(j + 1, j) += cplx(0, -hopping);
  }
  for (int j = 0; j < M; ++j) gen(j, j) -= 0.5 * gamma[j];
  Eigen::MatrixXcd e = (gen * t).exp();
  SecondMomentState out;
  out.c = e * c0.c * e.adjoint();
  return out;
}

}  // namespace qphase
