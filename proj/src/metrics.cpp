#include "qphase/metrics.hpp"

#include <cmath>

#include "qphase/errors.hpp"

namespace qphase {

namespace {

MetricValue mean_and_se(const Vec& vals) {
  long n = vals.size();
  MetricValue out;
  out.mean = vals.mean();
  if (n > 1) {
    double ss = (vals.array() - out.mean).square().sum() / double(n - 1);
    out.se = std::sqrt(ss / double(n));
  }
  return out;
}

}  // namespace

void GridEval::log_density(const Mat& X, Vec& out) const {
  out.resize(X.rows());
  Vec x(g_.dim);
  for (long i = 0; i < X.rows(); ++i) {
    x = X.row(i);
    out[i] = grid_log_density(g_, x);
  }
}

MetricValue l1_loss(const DensityEval& sim, const ExactDensity& exact, int n,
                    RngStream& rng) {
  if (sim.dim() != exact.dim()) throw DomainError("l1: dimension mismatch");
  if (n < 2) throw DomainError("l1: need at least 2 samples");
  Mat X;
  exact.sample(n, rng, X);
  Vec ls, le;
  sim.log_density(X, ls);
  exact.log_density(X, le);
  Vec vals(n);
  for (int i = 0; i < n; ++i) {
    if (!std::isfinite(le[i]) || le[i] < -690.0)
      throw DomainError("l1: reference density vanishes at a drawn sample");
    vals[i] = std::abs(std::exp(ls[i] - le[i]) - 1.0);
  }
  return mean_and_se(vals);
}

void centroid(const Mat& batch, Vec& mean, Vec& se) {
  long n = batch.rows();
  if (n < 1) throw DomainError("centroid: empty batch");
  mean = batch.colwise().mean();
  se = Vec::Zero(batch.cols());
  if (n > 1) {
    Vec var = (batch.rowwise() - mean.transpose())
                  .array()
                  .square()
                  .colwise()
                  .sum()
                  .transpose() /
              double(n - 1);
    se = (var / double(n)).cwiseSqrt();
  }
}

MetricValue centroid_norm(const Mat& batch) {
  Vec mean, se;
  centroid(batch, mean, se);
  MetricValue out;
  out.mean = mean.norm();
  if (out.mean > 0) {
    // first-order propagation through the norm
    Vec g = mean / out.mean;
    out.se = std::sqrt((g.array().square() * se.array().square()).sum());
  } else {
    out.se = se.norm();
  }
  return out;
}

MetricValue liouvillian_loss(const FlowModel& model, const QOperator& op, int n,
                             RngStream& rng) {
  if (op.empty()) return MetricValue{};
  bool diag = op.diag_second_order();
  DerivEval ev(model,
               diag ? DerivEval::HessMode::Diag : DerivEval::HessMode::Full);
  Mat X;
  Vec logq;
  model.sample(n, rng, X, logq);
  int d = model.dim();
  Vec x(d), g(d), h(diag ? d : d * d), vals(n);
  for (int i = 0; i < n; ++i) {
    x = X.row(i);
    ev.eval(x.data(), g.data(), h.data());
    double r = op.apply_ratio(x.data(), g.data(), h.data(), diag);
    vals[i] = r * r;
  }
  return mean_and_se(vals);
}

MetricValue n1_observable(const Mat& batch) {
  int d = static_cast<int>(batch.cols());
  if (d < 2) throw DomainError("n1: batch dimension below 2");
  int half = d / 2;
  Vec vals =
      batch.col(0).array().square() + batch.col(half).array().square() - 1.0;
  return mean_and_se(vals);
}

}  // namespace qphase
