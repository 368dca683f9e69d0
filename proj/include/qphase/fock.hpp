#pragma once

#include <Eigen/Dense>
#include <complex>
#include <vector>

#include "qphase/lindblad.hpp"

namespace qphase {

struct GridState;

// Density matrix in a truncated number basis, one cutoff shared by all modes.
// Basis index flattens mode occupations row-major: i = n_1 * K^(M-1) + ...
struct FockDensityMatrix {
  int n_modes = 1;
  int cutoff = 0;
  Eigen::MatrixXcd rho;

  int dim() const { return static_cast<int>(rho.rows()); }
  static FockDensityMatrix zero(int n_modes, int cutoff);
  // hermiticity, unit trace, positive spectrum up to tolerances
  void check(double herm_tol = 1e-12, double trace_tol = 1e-10,
             double eig_tol = 1e-10, bool check_spectrum = true) const;
};

FockDensityMatrix coherent_fock_state(const std::vector<cplx>& beta, int cutoff);
// N bosons in the antisymmetric superposition (a1^dag - a2^dag)/sqrt(2)
FockDensityMatrix bec_fock_state(int n_total, int cutoff);

// Husimi function (1/pi^M) <alpha|rho|alpha> at x = (q_1..q_M, p_1..p_M).
// Guards against evaluations whose coherent tail would read truncated-away
// levels that the state visibly occupies.
double q_from_rho(const FockDensityMatrix& rho, const Eigen::VectorXd& x);

// Taylor coefficients of Q around alpha = 0: c(a, b) multiplies
// alpha^a * conj(alpha)^b. Single mode.
struct QTaylorTable {
  Eigen::MatrixXcd c;
  int order() const { return static_cast<int>(c.rows()) - 1; }
};

// <m|rho|n> = pi sqrt(m! n!) sum_k c(n-k, m-k) / k!
FockDensityMatrix rho_from_q_taylor(const QTaylorTable& table, int cutoff);

// antinormally ordered moment <a^m adag^n> = E[alpha^m conj(alpha)^n]
cplx observable_moment(const Eigen::MatrixXd& samples, int n_modes, int mode, int m,
                       int n);
cplx observable_moment(const GridState& grid, int mode, int m, int n);

// fixed-step RK4 integration of rho' = sum_terms c A rho B
FockDensityMatrix lindblad_fock_evolve(const FockDensityMatrix& rho0,
                                       const std::vector<LindbladTerm>& terms,
                                       double dt, long steps);

// Evolve the same initial state through the Fock master equation and the
// compiled phase-space operator on a grid; max abs difference of the Husimi
// functions at time t.
double q_dynamics_crosscheck(const FockDensityMatrix& rho0,
                             const std::vector<LindbladTerm>& terms, double t,
                             double dt, int grid_n, double extent);

}  // namespace qphase
