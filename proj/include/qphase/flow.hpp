#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

#include "qphase/rng.hpp"

namespace qphase {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;  // rows are samples

enum class PriorKind { StandardNormal, DiagonalGaussian };

// Diagonal Gaussian base density. mean/var always hold one entry per
// coordinate; kind only records how the prior was specified.
struct Prior {
  PriorKind kind = PriorKind::StandardNormal;
  Vec mean;
  Vec var;

  static Prior standard_normal(int dim);
  static Prior diagonal_gaussian(const Vec& mean, const Vec& var);

  int dim() const { return static_cast<int>(mean.size()); }
  void log_density(const Mat& Z, Vec& out) const;
  void sample(int n, RngStream& rng, Mat& out) const;
};

struct FlowConfig {
  int dim = 2;
  int n_layers = 3;
  int hidden = 5;
  double s_cap = 5.0;
  Prior prior;
};

// Affine coupling flow. Each layer conditions on one half of the coordinates
// (alternating per layer) and maps the other half through x*exp(s) + t, with
// (s, t) produced by a two-hidden-layer tanh MLP. s is passed through a
// smooth saturation keeping |s| <= s_cap so both directions stay stable.
class FlowModel {
 public:
  explicit FlowModel(const FlowConfig& cfg);

  // Uniform [-0.05, 0.05) for the hidden layers, zeros for the final
  // conditioner layer: the map starts as the exact identity.
  void init_params(RngStream& rng);

  int dim() const { return cfg_.dim; }
  int n_layers() const { return cfg_.n_layers; }
  int hidden() const { return cfg_.hidden; }
  int half() const { return cfg_.dim / 2; }
  int n_params() const { return static_cast<int>(theta_.size()); }
  int layer_params() const { return layer_np_; }
  const FlowConfig& config() const { return cfg_; }
  const Prior& prior() const { return cfg_.prior; }
  Vec& params() { return theta_; }
  const Vec& params() const { return theta_; }
  std::uint64_t init_seed() const { return init_seed_; }

  void sample(int n, RngStream& rng, Mat& points, Vec& log_q) const;
  void forward(const Mat& Z, Mat& X, Vec& logdet) const;

  void log_density(const Mat& X, Vec& out) const;
  double log_density_one(const Vec& x) const;

  struct InverseCache {
    Mat Z;
    Vec log_q;
    // per layer: masked input, hidden activations, clamp tanh, exp(-s),
    // transformed output block
    std::vector<Mat> U, H1, H2, ThS, E, Zw;
  };
  void inverse(const Mat& X, Mat& Z, Vec& logdet) const;
  void inverse_with_cache(const Mat& X, InverseCache& cache) const;

  // d(sum_i w_i log q(x_i))/dtheta from a cached inverse pass
  void weighted_param_grad(const InverseCache& cache, const Vec& w, Vec& grad) const;
  // per-sample score rows d(log q(x_i))/dtheta, N x P
  void scores(const InverseCache& cache, Mat& out) const;
  void param_grad_log_density(const Mat& X, Mat& scores_out) const;

  // Input-side derivatives of log q at a single point.
  void input_derivatives(const Vec& x, double& log_q, Vec& grad, Mat& hess) const;

  void save(const std::string& path) const;
  static FlowModel load(const std::string& path);

  // offsets into theta for one layer's blocks
  struct LayerView {
    Eigen::Map<const Mat> W1, W2, W3;
    Eigen::Map<const Vec> b1, b2, b3;
  };
  LayerView layer(int l) const;
  // masked block starts at column m0, transformed block at column w0
  void mask_of(int l, int& m0, int& w0) const;

 private:
  FlowConfig cfg_;
  int layer_np_;
  Vec theta_;
  std::uint64_t init_seed_ = 0;

  void check_points(const Mat& X) const;
};

// Reusable evaluator for input-side derivatives of log q. Propagates
// second-order jets (value, gradient, Hessian) through the inverse pass with
// preallocated buffers; Diag mode carries only the Hessian diagonal, which is
// closed under composition and enough for generators without mixed second
// derivatives.
class DerivEval {
 public:
  enum class HessMode { None, Diag, Full };

  DerivEval(const FlowModel& m, HessMode mode);

  // grad: dim entries. hess: dim (Diag) or dim*dim row-major (Full); may be
  // null in None mode. Returns log q(x).
  double eval(const double* x, double* grad, double* hess);

 private:
  const FlowModel& m_;
  HessMode mode_;
  int d_, hd_, width_;
  // point jets and two scratch stages
  std::vector<double> pv_, pg_, ph_;
  std::vector<double> av_, ag_, ah_;
  std::vector<double> bv_, bg_, bh_;
  // accumulator jet for log q
  double accv_ = 0;
  std::vector<double> accg_, acch_;
  // small per-coordinate scratch jets
  std::vector<double> eg_, eh_, rg_, rh_;

  void linear_stage(const Eigen::Map<const Mat>& W, const Eigen::Map<const Vec>& b,
                    const double* sv, const double* sg, const double* sh, int nin,
                    double* dv, double* dg, double* dh, int nout);
  void tanh_stage(double* v, double* g, double* h, int n);
};

}  // namespace qphase
