#pragma once

#include <cstdint>
#include <functional>

#include "qphase/flow.hpp"
#include "qphase/lindblad.hpp"

namespace qphase {

struct AdamState {
  Vec m, v;
  long step = 0;
  double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;

  void init(int n);
  // theta -= lr * mhat / (sqrt(vhat) + eps), bias-corrected
  void update(Vec& theta, const Vec& grad, double lr);
};

struct EulerKLConfig {
  double dt = 0.01;
  double t_end = 15.0;
  int epochs_per_step = 150;
  int batch_n = 1000;
  double lr = 1e-3;
  double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
  double clamp_floor = 1e-12;
  std::uint64_t seed = 1;

  void validate() const;
  long n_steps() const;
};

struct TdvpConfig {
  double dt = 0.01;
  double t_end = 15.0;
  int batch_n = 1000;
  double shift = 0.01;
  bool centered = false;
  std::uint64_t seed = 1;

  void validate() const;
  long n_steps() const;
};

struct EulerStepStats {
  double residual = 0;  // final epoch's KL estimate
  long clamp_count = 0;
};

// Score-function gradient of KL(Q_next || Q_L) where
// log Q_L = log q_cur + log(1 + dt * (L Q / Q)), with baseline b subtracted:
// grad = (1/N) sum_i [log q_next(x_i) - log Q_L(x_i) - b] d log q_next / dtheta.
// Returns the mean log ratio (the KL estimate); batch must come from
// model_next. Clamps log(1 + dt*ratio) arguments at clamp_floor.
double euler_kl_grad(const FlowModel& model_next, const FlowModel& model_cur,
                     const QOperator& op, double dt, const Mat& batch, Vec& grad,
                     long* clamp_count = nullptr, bool baseline = true,
                     double clamp_floor = 1e-12);

// One time step: freeze a copy, run epochs_per_step Adam updates on fresh
// batches, commit.
EulerStepStats euler_kl_step(FlowModel& model, const QOperator& op,
                             const EulerKLConfig& cfg, RngStream& rng);

using EulerHook =
    std::function<void(long step, double t, const EulerStepStats&, FlowModel&)>;
void euler_kl_run(FlowModel& model, const QOperator& op, const EulerKLConfig& cfg,
                  const EulerHook& hook = nullptr);

// Natural-gradient step (S + shift I) dtheta = F with S the score Gram matrix
// and F_k = E[score_k * (L Q / Q)]; theta += dt * dtheta.
void tdvp_step(FlowModel& model, const QOperator& op, const TdvpConfig& cfg,
               RngStream& rng);

using TdvpHook = std::function<void(long step, double t, FlowModel&)>;
void tdvp_run(FlowModel& model, const QOperator& op, const TdvpConfig& cfg,
              const TdvpHook& hook = nullptr);

}  // namespace qphase
