#pragma once

#include <Eigen/Dense>
#include <functional>
#include <string>

#include "qphase/flow.hpp"
#include "qphase/lindblad.hpp"

namespace qphase {

// Uniform periodic grid over [-extent, extent)^dim, values flattened
// row-major with the last axis fastest.
struct GridState {
  int dim = 2;
  int n = 256;
  double extent = 10.0;
  Vec values;

  double spacing() const { return 2.0 * extent / n; }
  long size() const { return values.size(); }
};

GridState make_grid(int dim, int n, double extent = 10.0);
void grid_point(const GridState& g, long idx, Vec& x);
void fill_grid(GridState& g, const std::function<double(const Vec&)>& f);
// plain sum * h^dim (trapezoid on a periodic grid)
double grid_quadrature(const GridState& g);

struct PsOptions {
  double rtol = 1e-8;
  // Held near roundoff of a normalized density: the constant background is
  // a growing mode of damped models on the torus (rhs of a flat field is
  // gamma * field, unopposed once the wrap breaks the advection balance),
  // so far-field junk seeded at atol level surfaces as e^{gamma t} drift
  // on long horizons.
  double atol = 1e-16;
  double dt_init = 1e-3;
  bool project = true;  // clip negatives and renormalize after accepted steps
};

// Adaptive Dormand-Prince 5(4) in time, spectral derivatives in space.
// Refuses dim > 4.
GridState pseudospectral_solve(const QOperator& op, const GridState& q0,
                               double t_end, const PsOptions& opts = PsOptions());

// One application of the operator to the grid density (not a ratio).
void apply_operator_grid(const QOperator& op, const GridState& g, Vec& out);

// quadrature of (L Q)(x); near zero for trace-preserving term lists
double conservation_defect(const QOperator& op, const GridState& g);

// multilinear interpolation of log(values), floored at 1e-300
double grid_log_density(const GridState& g, const Vec& x);

// inverse-CDF draw of a cell followed by a uniform jitter inside it
void grid_sample(const GridState& g, int n_samples, RngStream& rng, Mat& out);

void save_grid(const GridState& g, const std::string& path);
GridState load_grid(const std::string& path);

}  // namespace qphase
