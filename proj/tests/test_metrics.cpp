#include <cmath>

#include "doctest.h"
#include "qphase/errors.hpp"
#include "qphase/metrics.hpp"

using namespace qphase;

namespace {

GaussianMomentState state2(double mq, double mp, double var) {
  GaussianMomentState s;
  s.mu = Vec(2);
  s.mu << mq, mp;
  s.sigma = var * Mat::Identity(2, 2);
  return s;
}

// wraps a density with a constant log offset
class ScaledEval : public DensityEval {
 public:
  ScaledEval(const DensityEval& base, double log_shift)
      : base_(base), shift_(log_shift) {}
  int dim() const override { return base_.dim(); }
  void log_density(const Mat& X, Vec& out) const override {
    base_.log_density(X, out);
    out.array() += shift_;
  }

 private:
  const DensityEval& base_;
  double shift_;
};

class VanishingExact : public ExactDensity {
 public:
  int dim() const override { return 2; }
  void log_density(const Mat& X, Vec& out) const override {
    out = Vec::Constant(X.rows(), -695.0);
  }
  void sample(int n, RngStream&, Mat& out) const override {
    out = Mat::Zero(n, 2);
  }
};

FlowModel identity_flow(const Prior& prior) {
  FlowConfig cfg;
  cfg.dim = prior.dim();
  cfg.n_layers = 3;
  cfg.hidden = 4;
  cfg.prior = prior;
  FlowModel m(cfg);
  RngStream r(99);
  m.init_params(r);
  return m;
}

QOperator one_well_op(double w, double g, double nb) {
  ModelSpec s;
  s.kind = ModelSpec::Kind::Harmonic;
  s.wells = 1;
  s.omega = {w};
  s.gamma = {g};
  s.nbar = {nb};
  return compile(model_terms(s), 1);
}

}  // namespace

TEST_SUITE("metrics") {

TEST_CASE("a density matches itself exactly") {
  GaussianExact d(state2(-1.0, 0.5, 0.7));
  RngStream rng(3);
  MetricValue v = l1_loss(d, d, 512, rng);
  CHECK(v.mean == 0.0);
  CHECK(v.se == 0.0);
}

TEST_CASE("a doubled density sits at distance one") {
  GaussianExact exact(state2(0.0, 0.0, 1.0));
  ScaledEval sim(exact, std::log(2.0));
  RngStream rng(3);
  MetricValue v = l1_loss(sim, exact, 512, rng);
  CHECK(v.mean == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(v.se < 1e-12);
}

TEST_CASE("larger mean shifts score worse") {
  GaussianExact exact(state2(0.0, 0.0, 1.0));
  GaussianExact near(state2(0.5, 0.0, 1.0));
  GaussianExact far(state2(1.0, 0.0, 1.0));
  RngStream a(7), b(7);
  MetricValue vn = l1_loss(near, exact, 4000, a);
  MetricValue vf = l1_loss(far, exact, 4000, b);
  CHECK(vn.mean < vf.mean);
  CHECK(vn.se > 0.0);
  CHECK(vn.mean > 0.1);
}

TEST_CASE("bad l1 inputs are rejected") {
  GaussianExact d2(state2(0.0, 0.0, 1.0));
  GaussianMomentState s4;
  s4.mu = Vec::Zero(4);
  s4.sigma = Mat::Identity(4, 4);
  GaussianExact d4(s4);
  RngStream rng(1);
  CHECK_THROWS_AS(l1_loss(d4, d2, 16, rng), DomainError);
  CHECK_THROWS_AS(l1_loss(d2, d2, 1, rng), DomainError);
  VanishingExact vanish;
  GaussianExact sim(state2(0.0, 0.0, 1.0));
  CHECK_THROWS_AS(l1_loss(sim, vanish, 16, rng), DomainError);
}

TEST_CASE("centroid of a small batch") {
  Mat batch(3, 2);
  batch << 1, 2, 3, 4, 5, 6;
  Vec mean, se;
  centroid(batch, mean, se);
  CHECK(mean[0] == doctest::Approx(3.0));
  CHECK(mean[1] == doctest::Approx(4.0));
  CHECK(se[0] == doctest::Approx(std::sqrt(4.0 / 3)).epsilon(1e-12));
  CHECK(se[1] == doctest::Approx(std::sqrt(4.0 / 3)).epsilon(1e-12));

  MetricValue nrm = centroid_norm(batch);
  CHECK(nrm.mean == doctest::Approx(5.0));
  // gradient (3/5, 4/5) against equal per-axis errors collapses to one axis
  CHECK(nrm.se == doctest::Approx(std::sqrt(4.0 / 3)).epsilon(1e-12));
}

TEST_CASE("centroid norm of a centered batch falls back to the raw error") {
  Mat batch(2, 2);
  batch << 1, 0, -1, 0;
  MetricValue nrm = centroid_norm(batch);
  CHECK(nrm.mean == 0.0);
  CHECK(nrm.se == doctest::Approx(1.0));
}

TEST_CASE("first mode occupation ignores the other modes") {
  Mat batch(3, 4);
  batch << 1, 9, 2, 9, 0, 5, 1, 5, 2, 7, 0, 7;
  MetricValue v = n1_observable(batch);
  CHECK(v.mean == doctest::Approx(7.0 / 3).epsilon(1e-12));
  CHECK(v.se == doctest::Approx(std::sqrt((78.0 / 18) / 3)).epsilon(1e-12));
  Mat thin(3, 1);
  thin.setZero();
  CHECK_THROWS_AS(n1_observable(thin), DomainError);
}

TEST_CASE("liouvillian loss of the empty operator is zero") {
  FlowModel m = identity_flow(Prior::standard_normal(2));
  RngStream rng(4);
  MetricValue v = liouvillian_loss(m, QOperator(1, {}), 128, rng);
  CHECK(v.mean == 0.0);
  CHECK(v.se == 0.0);
}

TEST_CASE("the thermal state annihilates the generator") {
  // equilibrium variance (nbar+1)/2 per axis
  Vec mean = Vec::Zero(2), var = Vec::Constant(2, 2.0);
  FlowModel m = identity_flow(Prior::diagonal_gaussian(mean, var));
  QOperator op = one_well_op(1.2, 0.8, 3.0);
  RngStream rng(4);
  MetricValue v = liouvillian_loss(m, op, 2000, rng);
  CHECK(v.mean < 1e-24);
}

TEST_CASE("a displaced state feels the generator") {
  Vec mean = Vec::Constant(2, -1.0), var = Vec::Constant(2, 0.5);
  FlowModel m = identity_flow(Prior::diagonal_gaussian(mean, var));
  QOperator op = one_well_op(1.2, 0.8, 3.0);
  RngStream rng(4);
  MetricValue v = liouvillian_loss(m, op, 2000, rng);
  CHECK(v.mean > 1e-3);
  CHECK(v.se > 0.0);
}

TEST_CASE("grid evaluation matches the interpolant") {
  GridState g = make_grid(2, 64, 6.0);
  fill_grid(g, [](const Vec& x) {
    return std::exp(-x.squaredNorm() / 2) / (2 * M_PI);
  });
  GridEval ev(g);
  Mat X(3, 2);
  X << 0.33, -0.71, -6.0 + 10 * g.spacing(), -6.0 + 3 * g.spacing(), 7.5, 0.0;
  Vec out;
  ev.log_density(X, out);
  for (int i = 0; i < 3; ++i) {
    Vec x = X.row(i);
    CHECK(out[i] == doctest::Approx(grid_log_density(g, x)).epsilon(1e-14));
  }
}

}  // TEST_SUITE
