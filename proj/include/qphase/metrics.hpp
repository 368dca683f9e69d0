#pragma once

#include <memory>

#include "qphase/flow.hpp"
#include "qphase/grid.hpp"
#include "qphase/lindblad.hpp"
#include "qphase/moments.hpp"

namespace qphase {

struct MetricValue {
  double mean = 0;
  double se = 0;  // CLT standard error
};

// read-only batch log-density
class DensityEval {
 public:
  virtual ~DensityEval() = default;
  virtual int dim() const = 0;
  virtual void log_density(const Mat& X, Vec& out) const = 0;
};

// adds sampling and absolute normalization, as the L1 reference requires
class ExactDensity : public DensityEval {
 public:
  virtual void sample(int n, RngStream& rng, Mat& out) const = 0;
};

class FlowEval : public DensityEval {
 public:
  explicit FlowEval(const FlowModel& m) : m_(m) {}
  int dim() const override { return m_.dim(); }
  void log_density(const Mat& X, Vec& out) const override {
    m_.log_density(X, out);
  }

 private:
  const FlowModel& m_;
};

class GaussianExact : public ExactDensity {
 public:
  explicit GaussianExact(GaussianMomentState s) : g_(std::move(s)) {}
  int dim() const override { return g_.dim(); }
  void log_density(const Mat& X, Vec& out) const override {
    g_.log_density(X, out);
  }
  void sample(int n, RngStream& rng, Mat& out) const override {
    g_.sample(n, rng, out);
  }

 private:
  GaussianDensity g_;
};

class GridEval : public DensityEval {
 public:
  explicit GridEval(const GridState& g) : g_(g) {}
  int dim() const override { return g_.dim; }
  void log_density(const Mat& X, Vec& out) const override;

 private:
  const GridState& g_;
};

// (1/N) sum |Q_sim(x)/Q_exact(x) - 1| over x ~ Q_exact
MetricValue l1_loss(const DensityEval& sim, const ExactDensity& exact, int n,
                    RngStream& rng);

void centroid(const Mat& batch, Vec& mean, Vec& se);
MetricValue centroid_norm(const Mat& batch);

// E[(L Q / Q)^2] over x ~ Q_theta
MetricValue liouvillian_loss(const FlowModel& model, const QOperator& op, int n,
                             RngStream& rng);

// mean of q_1^2 + p_1^2 - 1
MetricValue n1_observable(const Mat& batch);

}  // namespace qphase
