#pragma once

#include <array>
#include <complex>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace qphase {

using cplx = std::complex<double>;

// One master-equation term  c * prod_m (adag_m^j a_m^k) rho (adag_m^l a_m^s).
struct LindbladTerm {
  cplx coeff;
  std::vector<std::array<int, 4>> powers;  // per mode {j, k, l, s}

  static LindbladTerm one_mode(cplx c, int n_modes, int mode, std::array<int, 4> p);
};

struct ModelSpec {
  enum class Kind { Harmonic, BosonicChain };
  Kind kind = Kind::Harmonic;
  int wells = 1;
  std::vector<double> omega;  // harmonic
  std::vector<double> gamma;  // both models
  std::vector<double> nbar;   // harmonic
  double hopping = 0.0;       // chain coupling J

  int n_modes() const { return wells; }
  void validate() const;
};

std::vector<LindbladTerm> model_terms(const ModelSpec& spec);

// Real phase-space differential operator: sum of coeff * poly(x) * D^deriv,
// acting on densities over x = (q_1..q_M, p_1..p_M).
struct QMonomial {
  double coeff = 0;
  std::vector<int> poly;   // exponent per coordinate
  std::vector<int> deriv;  // derivative order per coordinate
};

class QOperator {
 public:
  QOperator() = default;
  QOperator(int n_modes, std::vector<QMonomial> monomials);

  int n_modes() const { return n_modes_; }
  int dim() const { return 2 * n_modes_; }
  const std::vector<QMonomial>& monomials() const { return mono_; }
  int max_deriv_order() const { return max_order_; }
  // true when no mixed second derivatives appear (diagonal Hessian suffices)
  bool diag_second_order() const { return diag2_; }
  bool empty() const { return mono_.empty(); }

  // (L Q)/Q at x given gradient and Hessian of log Q. hess is row-major
  // dim*dim when diag == false, else just the dim diagonal entries.
  double apply_ratio(const double* x, const double* grad, const double* hess,
                     bool diag) const;
  double apply_ratio(const Eigen::VectorXd& x, const Eigen::VectorXd& grad,
                     const Eigen::MatrixXd& hess) const;

 private:
  int n_modes_ = 0;
  std::vector<QMonomial> mono_;
  int max_order_ = 0;
  bool diag2_ = true;

  struct EvalTerm {
    double coeff;
    std::vector<std::pair<int, int>> poly;  // (coordinate, exponent)
    int order, i, j;
  };
  std::vector<EvalTerm> terms_;
};

// Symbolic expansion of the term list into the phase-space operator.
// Exact complex intermediate arithmetic; throws if the result is not real.
QOperator compile(const std::vector<LindbladTerm>& terms, int n_modes);

// Canonical text form: one monomial per line, sorted by derivative
// multi-index then polynomial exponents.
std::string to_string(const QOperator& op);

}  // namespace qphase
