#include "qphase/pretrain.hpp"

#include <cmath>
#include <cstdio>

#include "qphase/errors.hpp"
#include "qphase/evolve.hpp"

namespace qphase {

namespace {
constexpr double kPi = 3.14159265358979323846;
}

TargetDensity gaussian_target(const Vec& mean, const Vec& var) {
  int d = static_cast<int>(mean.size());
  if (var.size() != d || (var.array() <= 0).any())
    throw ConfigError("target: bad gaussian parameters");
  double log_norm = 0.5 * d * std::log(2.0 * kPi);
  for (int i = 0; i < d; ++i) log_norm += 0.5 * std::log(var[i]);
  TargetDensity t;
  t.dim = d;
  t.normalized = true;
  t.log_density = [mean, var, log_norm](const Vec& x) {
    return -0.5 * ((x - mean).array().square() / var.array()).sum() - log_norm;
  };
  return t;
}

TargetDensity bec_target(int n_total) {
  if (n_total < 0) throw ConfigError("target: negative particle number");
  double log_norm = 2.0 * std::log(kPi) + n_total * std::log(2.0) +
                    std::lgamma(n_total + 1.0);
  TargetDensity t;
  t.dim = 4;
  t.normalized = true;
  t.log_density = [n_total, log_norm](const Vec& x) {
    double dq = x[0] - x[1], dp = x[2] - x[3];
    double r2 = std::max(dq * dq + dp * dp, 1e-300);
    return n_total * std::log(r2) - x.squaredNorm() - log_norm;
  };
  return t;
}

MhResult mh_sample(const TargetDensity& target, int n, const MhOptions& opt,
                   RngStream& rng) {
  if (n < 1) throw ConfigError("mh: need at least one sample");
  if (opt.proposal_sigma <= 0) throw ConfigError("mh: proposal sigma must be > 0");
  int d = target.dim;
  Vec x = Vec::Zero(d), prop(d);
  double logp = target.log_density(x);
  MhResult out;
  out.points.resize(n, d);
  long kept = 0, accepted = 0, proposals = 0, since_keep = 0;
  long total = opt.burn_in + static_cast<long>(n) * opt.thin;
  for (long it = 0; it < total; ++it) {
    for (int j = 0; j < d; ++j) prop[j] = x[j] + opt.proposal_sigma * rng.normal();
    double logp_new = target.log_density(prop);
    bool accept = logp_new >= logp || std::log(rng.uniform()) < logp_new - logp;
    if (it >= opt.burn_in) {
      ++proposals;
      if (accept) ++accepted;
    }
    if (accept) {
      x = prop;
      logp = logp_new;
    }
    if (it >= opt.burn_in && ++since_keep == opt.thin) {
      since_keep = 0;
      out.points.row(kept++) = x;
      if (kept == n) break;
    }
  }
  out.acceptance_rate = proposals ? double(accepted) / double(proposals) : 0.0;
  if (out.acceptance_rate < 0.1 || out.acceptance_rate > 0.7)
    std::fprintf(stderr,
                 "mh: acceptance rate %.2f outside [0.1, 0.7]; consider "
                 "retuning proposal sigma\n",
                 out.acceptance_rate);
  return out;
}

Vec nll_pretrain(FlowModel& model, const Mat& points, int epochs, int batch_n,
                 double lr, RngStream& rng) {
  long n = points.rows();
  if (n < 1) throw ConfigError("nll pretrain: empty point set");
  if (points.cols() != model.dim())
    throw DomainError("nll pretrain: dimension mismatch");
  if (epochs < 1 || batch_n < 1 || lr <= 0)
    throw ConfigError("nll pretrain: bad hyperparameters");
  batch_n = static_cast<int>(std::min<long>(batch_n, n));

  AdamState adam;
  adam.init(model.n_params());
  FlowModel::InverseCache cache;
  Mat batch(batch_n, model.dim());
  Vec grad, losses(epochs);
  Vec w = Vec::Constant(batch_n, -1.0 / batch_n);
  for (int e = 0; e < epochs; ++e) {
    for (int i = 0; i < batch_n; ++i)
      batch.row(i) = points.row(static_cast<long>(rng.below(n)));
    model.inverse_with_cache(batch, cache);
    losses[e] = -cache.log_q.mean();
    if (!std::isfinite(losses[e]))
      throw NumericsError("nll pretrain: non-finite loss");
    model.weighted_param_grad(cache, w, grad);
    adam.update(model.params(), grad, lr);
  }
  return losses;
}

Vec kl_pretrain(FlowModel& model, const TargetDensity& target, int epochs,
                int batch_n, double lr, RngStream& rng, bool self_normalize) {
  if (!target.normalized)
    throw ConfigError("kl pretrain: target must carry absolute normalization");
  if (target.dim != model.dim())
    throw DomainError("kl pretrain: dimension mismatch");
  if (epochs < 1 || batch_n < 2 || lr <= 0)
    throw ConfigError("kl pretrain: bad hyperparameters");

  AdamState adam;
  adam.init(model.n_params());
  FlowModel::InverseCache cache;
  Mat X;
  Vec logq, grad, w(batch_n), kl(epochs), x(model.dim());
  bool ess_warned = false;
  for (int e = 0; e < epochs; ++e) {
    model.sample(batch_n, rng, X, logq);
    model.inverse_with_cache(X, cache);
    double kl_acc = 0;
    for (int i = 0; i < batch_n; ++i) {
      x = X.row(i);
      double lt = target.log_density(x);
      w[i] = std::exp(lt - cache.log_q[i]);
      kl_acc += w[i] * (lt - cache.log_q[i]);
    }
    double wsum = w.sum();
    double ess = wsum * wsum / std::max(w.squaredNorm(), 1e-300);
    if (ess < 0.01 * batch_n && !ess_warned) {
      ess_warned = true;
      std::fprintf(stderr,
                   "kl pretrain: effective sample size %.1f of %d; estimates "
                   "may diverge\n",
                   ess, batch_n);
    }
    // self-normalized KL(target || model): weighted mean of the log ratio
    kl[e] = wsum > 0 ? kl_acc / wsum : 0.0;
    if (!std::isfinite(kl[e])) throw NumericsError("kl pretrain: non-finite loss");
    if (self_normalize && wsum > 0) w *= batch_n / wsum;
    w /= -double(batch_n);
    model.weighted_param_grad(cache, w, grad);
    adam.update(model.params(), grad, lr);
  }
  return kl;
}

double forward_kl_estimate(const FlowModel& model, const TargetDensity& target,
                           const Mat& ref_points) {
  if (!target.normalized)
    throw ConfigError("kl estimate: target must carry absolute normalization");
  Vec lq;
  model.log_density(ref_points, lq);
  double acc = 0;
  Vec x(model.dim());
  for (long i = 0; i < ref_points.rows(); ++i) {
    x = ref_points.row(i);
    acc += target.log_density(x) - lq[i];
  }
  return acc / double(ref_points.rows());
}

}  // namespace qphase
