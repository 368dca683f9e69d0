#include "qphase/evolve.hpp"

#include <Eigen/Cholesky>
#include <Eigen/QR>
#include <cmath>
#include <cstdio>

#include "qphase/errors.hpp"

namespace qphase {

void AdamState::init(int n) {
  m = Vec::Zero(n);
  v = Vec::Zero(n);
  step = 0;
}

void AdamState::update(Vec& theta, const Vec& grad, double lr) {
  if (m.size() != theta.size() || grad.size() != theta.size())
    throw DomainError("adam: dimension mismatch");
  ++step;
  m = beta1 * m + (1.0 - beta1) * grad;
  v = beta2 * v + (1.0 - beta2) * grad.cwiseProduct(grad);
  double c1 = 1.0 - std::pow(beta1, double(step));
  double c2 = 1.0 - std::pow(beta2, double(step));
  theta.array() -=
      lr * (m.array() / c1) / ((v.array() / c2).sqrt() + eps);
}

void EulerKLConfig::validate() const {
  if (dt <= 0 || t_end < dt) throw ConfigError("euler-kl: need 0 < dt <= t_end");
  if (epochs_per_step < 1 || batch_n < 2)
    throw ConfigError("euler-kl: epochs >= 1 and batch >= 2 required");
  if (lr <= 0 || clamp_floor <= 0)
    throw ConfigError("euler-kl: lr and clamp floor must be positive");
}

long EulerKLConfig::n_steps() const {
  return std::lround(t_end / dt);
}

void TdvpConfig::validate() const {
  if (dt <= 0 || t_end < dt) throw ConfigError("tdvp: need 0 < dt <= t_end");
  if (batch_n < 2) throw ConfigError("tdvp: batch >= 2 required");
  if (shift < 0) throw ConfigError("tdvp: diagonal shift must be >= 0");
}

long TdvpConfig::n_steps() const {
  return std::lround(t_end / dt);
}

namespace {

DerivEval::HessMode mode_for(const QOperator& op) {
  if (op.max_deriv_order() > 2)
    throw UnsupportedTermError("evolve: operator order above 2");
  return op.diag_second_order() ? DerivEval::HessMode::Diag
                                : DerivEval::HessMode::Full;
}

// fills ratio_i = (L Q / Q)(x_i) and logq_i for the evaluated model
void eval_ratios(DerivEval& ev, const QOperator& op, bool diag, const Mat& X,
                 Vec& logq, Vec& ratio) {
  int d = static_cast<int>(X.cols());
  long n = X.rows();
  logq.resize(n);
  ratio.resize(n);
  Vec x(d), g(d);
  Vec h(diag ? d : d * d);
  for (long i = 0; i < n; ++i) {
    x = X.row(i);
    logq[i] = ev.eval(x.data(), g.data(), h.data());
    ratio[i] = op.apply_ratio(x.data(), g.data(), h.data(), diag);
  }
}

double euler_kl_grad_impl(const FlowModel& next, DerivEval& cur_eval,
                          const QOperator& op, bool diag, double dt,
                          double clamp_floor, const Mat& X, Vec& grad,
                          long& clamps, bool baseline,
                          FlowModel::InverseCache& cache, Vec& logq_cur,
                          Vec& ratio, Vec& w) {
  long n = X.rows();
  next.inverse_with_cache(X, cache);
  eval_ratios(cur_eval, op, diag, X, logq_cur, ratio);

  clamps = 0;
  w.resize(n);
  for (long i = 0; i < n; ++i) {
    double arg = 1.0 + dt * ratio[i];
    if (arg < clamp_floor) {
      arg = clamp_floor;
      ++clamps;
    }
    double log_target = logq_cur[i] + std::log(arg);
    w[i] = cache.log_q[i] - log_target;  // per-sample log ratio
  }
  if (clamps == n)
    throw StepTooLargeError("euler-kl: every sample clamped; reduce dt");
  double loss = w.mean();
  if (!std::isfinite(loss)) throw NumericsError("euler-kl: non-finite loss");
  if (baseline) w.array() -= loss;
  w /= double(n);
  next.weighted_param_grad(cache, w, grad);
  return loss;
}

}  // namespace

double euler_kl_grad(const FlowModel& model_next, const FlowModel& model_cur,
                     const QOperator& op, double dt, const Mat& batch, Vec& grad,
                     long* clamp_count, bool baseline, double clamp_floor) {
  bool diag = op.diag_second_order();
  DerivEval ev(model_cur, mode_for(op));
  FlowModel::InverseCache cache;
  Vec logq_cur, ratio, w;
  long clamps = 0;
  double loss = euler_kl_grad_impl(model_next, ev, op, diag, dt, clamp_floor,
                                   batch, grad, clamps, baseline, cache, logq_cur,
                                   ratio, w);
  if (clamp_count) *clamp_count = clamps;
  return loss;
}

EulerStepStats euler_kl_step(FlowModel& model, const QOperator& op,
                             const EulerKLConfig& cfg, RngStream& rng) {
  cfg.validate();
  bool diag = op.diag_second_order();
  FlowModel cur = model;  // frozen reference density for this step
  DerivEval cur_eval(cur, mode_for(op));
  AdamState adam;
  adam.beta1 = cfg.beta1;
  adam.beta2 = cfg.beta2;
  adam.eps = cfg.eps;
  adam.init(model.n_params());

  EulerStepStats stats;
  FlowModel::InverseCache cache;
  Mat X;
  Vec logq_sample, logq_cur, ratio, w, grad;
  for (int e = 0; e < cfg.epochs_per_step; ++e) {
    model.sample(cfg.batch_n, rng, X, logq_sample);
    long clamps = 0;
    double loss =
        euler_kl_grad_impl(model, cur_eval, op, diag, cfg.dt, cfg.clamp_floor, X,
                           grad, clamps, true, cache, logq_cur, ratio, w);
    stats.clamp_count += clamps;
    stats.residual = loss;
    adam.update(model.params(), grad, cfg.lr);
  }
  return stats;
}

void euler_kl_run(FlowModel& model, const QOperator& op, const EulerKLConfig& cfg,
                  const EulerHook& hook) {
  cfg.validate();
  RngStream rng(cfg.seed);
  long steps = cfg.n_steps();
  for (long s = 1; s <= steps; ++s) {
    EulerStepStats stats = euler_kl_step(model, op, cfg, rng);
    if (hook) hook(s, s * cfg.dt, stats, model);
  }
}

void tdvp_step(FlowModel& model, const QOperator& op, const TdvpConfig& cfg,
               RngStream& rng) {
  cfg.validate();
  bool diag = op.diag_second_order();
  DerivEval ev(model, mode_for(op));

  Mat X;
  Vec logq_sample;
  model.sample(cfg.batch_n, rng, X, logq_sample);
  FlowModel::InverseCache cache;
  model.inverse_with_cache(X, cache);
  Mat scores;
  model.scores(cache, scores);
  Vec logq, ratio;
  eval_ratios(ev, op, diag, X, logq, ratio);

  double n = double(cfg.batch_n);
  if (cfg.centered) {
    scores.rowwise() -= scores.colwise().mean().eval();
    ratio.array() -= ratio.mean();
  }
  Mat s_mat = scores.transpose() * scores / n;
  Vec f = scores.transpose() * ratio / n;
  s_mat.diagonal().array() += cfg.shift;

  Eigen::LDLT<Mat> ldlt(s_mat);
  Vec dtheta;
  bool ok = ldlt.info() == Eigen::Success;
  if (ok) {
    dtheta = ldlt.solve(f);
    double fn = f.norm();
    ok = (s_mat * dtheta - f).norm() <= 1e-6 * (fn > 0 ? fn : 1.0);
  }
  if (!ok) {
    dtheta = s_mat.colPivHouseholderQr().solve(f);
    double fn = f.norm();
    if ((s_mat * dtheta - f).norm() > 1e-3 * (fn > 0 ? fn : 1.0))
      throw NumericsError("tdvp: singular metric");
  }
  if (!dtheta.allFinite()) throw NumericsError("tdvp: non-finite update");
  model.params() += cfg.dt * dtheta;
}

void tdvp_run(FlowModel& model, const QOperator& op, const TdvpConfig& cfg,
              const TdvpHook& hook) {
  cfg.validate();
  if (cfg.batch_n < model.n_params())
    std::fprintf(stderr,
                 "tdvp: batch size %d below parameter count %d; the metric "
                 "estimate will be rank deficient\n",
                 cfg.batch_n, model.n_params());
  RngStream rng(cfg.seed);
  long steps = cfg.n_steps();
  for (long s = 1; s <= steps; ++s) {
    tdvp_step(model, op, cfg, rng);
    if (hook) hook(s, s * cfg.dt, model);
  }
}

}  // namespace qphase
