#include "qphase/lindblad.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>

#include "qphase/errors.hpp"

namespace qphase {

LindbladTerm LindbladTerm::one_mode(cplx c, int n_modes, int mode, std::array<int, 4> p) {
  LindbladTerm t;
  t.coeff = c;
  t.powers.assign(n_modes, {0, 0, 0, 0});
  t.powers[mode] = p;
  return t;
}

void ModelSpec::validate() const {
  if (wells < 1) throw ConfigError("model needs at least one well");
  if (kind == Kind::Harmonic) {
    if (static_cast<int>(omega.size()) != wells ||
        static_cast<int>(gamma.size()) != wells ||
        static_cast<int>(nbar.size()) != wells)
      throw ConfigError("harmonic model needs omega, gamma, nbar per well");
    for (double n : nbar)
      if (n < 0 || !std::isfinite(n)) throw ConfigError("nbar must be >= 0");
  } else {
    if (wells < 2) throw ConfigError("bosonic chain needs at least two wells");
    if (static_cast<int>(gamma.size()) != wells)
      throw ConfigError("bosonic chain needs gamma per well");
    if (!std::isfinite(hopping)) throw ConfigError("hopping must be finite");
  }
  for (double g : gamma)
    if (g < 0 || !std::isfinite(g)) throw ConfigError("gamma must be >= 0");
  for (double w : omega)
    if (!std::isfinite(w)) throw ConfigError("omega must be finite");
}

std::vector<LindbladTerm> model_terms(const ModelSpec& spec) {
  spec.validate();
  const int M = spec.wells;
  std::vector<LindbladTerm> terms;
  const cplx I(0.0, 1.0);
  if (spec.kind == ModelSpec::Kind::Harmonic) {
    for (int m = 0; m < M; ++m) {
      const double w = spec.omega[m], g = spec.gamma[m], nb = spec.nbar[m];
      // -i w [adag a, rho]
      terms.push_back(LindbladTerm::one_mode(-I * w, M, m, {1, 1, 0, 0}));
      terms.push_back(LindbladTerm::one_mode(I * w, M, m, {0, 0, 1, 1}));
      // g ( a rho adag - 1/2 {adag a, rho} )
      terms.push_back(LindbladTerm::one_mode(g, M, m, {0, 1, 1, 0}));
      terms.push_back(LindbladTerm::one_mode(-g / 2, M, m, {1, 1, 0, 0}));
      terms.push_back(LindbladTerm::one_mode(-g / 2, M, m, {0, 0, 1, 1}));
      if (nb != 0) {
        // g nbar ( a rho adag + adag rho a - adag a rho - rho a adag ),
        // with rho a adag normal-ordered as rho adag a + rho
        terms.push_back(LindbladTerm::one_mode(g * nb, M, m, {0, 1, 1, 0}));
        terms.push_back(LindbladTerm::one_mode(g * nb, M, m, {1, 0, 0, 1}));
        terms.push_back(LindbladTerm::one_mode(-g * nb, M, m, {1, 1, 0, 0}));
        terms.push_back(LindbladTerm::one_mode(-g * nb, M, m, {0, 0, 1, 1}));
        terms.push_back(LindbladTerm::one_mode(-g * nb, M, m, {0, 0, 0, 0}));
      }
    }
  } else {
    for (int m = 0; m < M; ++m) {
      const double g = spec.gamma[m];
      if (g == 0) continue;
      terms.push_back(LindbladTerm::one_mode(g, M, m, {0, 1, 1, 0}));
      terms.push_back(LindbladTerm::one_mode(-g / 2, M, m, {1, 1, 0, 0}));
      terms.push_back(LindbladTerm::one_mode(-g / 2, M, m, {0, 0, 1, 1}));
    }
    const double J = spec.hopping;
    for (int m = 0; m + 1 < M && J != 0; ++m) {
      // -i [ -J (adag_{m+1} a_m + adag_m a_{m+1}), rho ]
      LindbladTerm t;
      t.powers.assign(M, {0, 0, 0, 0});
      t.coeff = I * J;
      t.powers[m + 1] = {1, 0, 0, 0};
      t.powers[m] = {0, 1, 0, 0};
      terms.push_back(t);
      t.powers[m] = {1, 0, 0, 0};
      t.powers[m + 1] = {0, 1, 0, 0};
      terms.push_back(t);
      t.coeff = -I * J;
      t.powers[m + 1] = {0, 0, 1, 0};
      t.powers[m] = {0, 0, 0, 1};
      terms.push_back(t);
      t.powers[m] = {0, 0, 1, 0};
      t.powers[m + 1] = {0, 0, 0, 1};
      terms.push_back(t);
    }
  }
  return terms;
}

// ---------------------------------------------------------------------------
// symbolic expansion

namespace {

// single-mode operator monomial alpha^a albar^b d_alpha^r d_albar^t,
// multiplication part kept left of the derivative part
using CKey = std::array<int, 4>;
using CModeOp = std::map<CKey, cplx>;

double falling(int n, int k) {
  double f = 1;
  for (int i = 0; i < k; ++i) f *= n - i;
  return f;
}

double binom(int n, int k) {
  double b = 1;
  for (int i = 0; i < k; ++i) b = b * (n - i) / (i + 1);
  return std::round(b);
}

// X after Y as operators on functions: derivatives of X pass Y's
// multiplication part via Leibniz
CModeOp compose(const CModeOp& X, const CModeOp& Y) {
  CModeOp out;
  for (const auto& [kx, cx] : X)
    for (const auto& [ky, cy] : Y) {
      const auto [a1, b1, r1, t1] = kx;
      const auto [a2, b2, r2, t2] = ky;
      for (int i = 0; i <= std::min(r1, a2); ++i)
        for (int j = 0; j <= std::min(t1, b2); ++j) {
          const double f = binom(r1, i) * falling(a2, i) * binom(t1, j) * falling(b2, j);
          CKey k{a1 + a2 - i, b1 + b2 - j, r1 - i + r2, t1 - j + t2};
          out[k] += cx * cy * f;
        }
    }
  return out;
}

CModeOp cpow(const CModeOp& X, int n) {
  CModeOp r{{{0, 0, 0, 0}, 1.0}};
  for (int i = 0; i < n; ++i) r = compose(r, X);
  return r;
}

// conversion factor for one mode of one term:
// (albar)^j (alpha + d_albar)^k alpha^s (albar + d_alpha)^l
CModeOp mode_factor(int j, int k, int l, int s) {
  const CModeOp mul_a{{{1, 0, 0, 0}, 1.0}};
  const CModeOp mul_ab{{{0, 1, 0, 0}, 1.0}};
  const CModeOp a_plus_dab{{{1, 0, 0, 0}, 1.0}, {{0, 0, 0, 1}, 1.0}};
  const CModeOp ab_plus_da{{{0, 1, 0, 0}, 1.0}, {{0, 0, 1, 0}, 1.0}};
  CModeOp op = cpow(ab_plus_da, l);
  op = compose(cpow(mul_a, s), op);
  op = compose(cpow(a_plus_dab, k), op);
  op = compose(cpow(mul_ab, j), op);
  return op;
}

// real-coordinate monomial for one mode: q^qe p^pe dq^qd dp^pd
struct RKey {
  int qe, pe, qd, pd;
  bool operator<(const RKey& o) const {
    return std::tie(qe, pe, qd, pd) < std::tie(o.qe, o.pe, o.qd, o.pd);
  }
};
using RModeOp = std::map<RKey, cplx>;

cplx ipow(int n) {
  switch (((n % 4) + 4) % 4) {
    case 0: return {1, 0};
    case 1: return {0, 1};
    case 2: return {-1, 0};
    default: return {0, -1};
  }
}

// alpha = q + ip, albar = q - ip, d_alpha = (dq - i dp)/2, d_albar = (dq + i dp)/2
RModeOp wirtinger(const CModeOp& op) {
  RModeOp out;
  for (const auto& [k, c] : op) {
    const auto [a, b, r, t] = k;
    for (int u = 0; u <= a; ++u)
      for (int v = 0; v <= b; ++v) {
        const cplx pc = binom(a, u) * binom(b, v) * ipow(a - u) * ipow(-(b - v));
        for (int u2 = 0; u2 <= r; ++u2)
          for (int v2 = 0; v2 <= t; ++v2) {
            const cplx dc = binom(r, u2) * binom(t, v2) * ipow(-(r - u2)) *
                            ipow(t - v2) * std::pow(0.5, r + t);
            RKey rk{u + v, (a - u) + (b - v), u2 + v2, (r - u2) + (t - v2)};
            out[rk] += c * pc * dc;
          }
      }
  }
  return out;
}

using MKey = std::pair<std::vector<int>, std::vector<int>>;  // (deriv, poly)

}  // namespace

QOperator compile(const std::vector<LindbladTerm>& terms, int n_modes) {
  if (n_modes < 1) throw ConfigError("compile needs at least one mode");
  const int d = 2 * n_modes;
  std::map<MKey, cplx> acc;
  for (const auto& term : terms) {
    if (static_cast<int>(term.powers.size()) != n_modes)
      throw UnsupportedTermError("term does not cover all modes");
    if (!std::isfinite(term.coeff.real()) || !std::isfinite(term.coeff.imag()))
      throw UnsupportedTermError("term coefficient is not finite");
    // per-mode real expansions, combined as a product across modes
    std::vector<std::pair<MKey, cplx>> partial{{MKey{std::vector<int>(d, 0), std::vector<int>(d, 0)}, term.coeff}};
    for (int m = 0; m < n_modes; ++m) {
      const auto [j, k, l, s] = term.powers[m];
      for (int p : {j, k, l, s})
        if (p < 0 || p > 4)
          throw UnsupportedTermError("ladder powers must lie in [0, 4]");
      if (j + k + l + s == 0) continue;
      RModeOp rm = wirtinger(mode_factor(j, k, l, s));
      std::vector<std::pair<MKey, cplx>> next;
      next.reserve(partial.size() * rm.size());
      for (const auto& [mk, mc] : partial)
        for (const auto& [rk, rc] : rm) {
          MKey nk = mk;
          nk.second[m] += rk.qe;
          nk.second[n_modes + m] += rk.pe;
          nk.first[m] += rk.qd;
          nk.first[n_modes + m] += rk.pd;
          next.emplace_back(std::move(nk), mc * rc);
        }
      partial = std::move(next);
    }
    for (auto& [mk, mc] : partial) acc[mk] += mc;
  }

  double scale = 0;
  for (const auto& [k, c] : acc) scale = std::max(scale, std::abs(c.real()));
  std::vector<QMonomial> mono;
  for (const auto& [k, c] : acc) {
    if (std::abs(c.imag()) > 1e-12 * std::max(1.0, scale))
      throw DomainError("compiled operator has an imaginary residue; term list is not a valid generator");
    if (c.real() == 0.0) continue;
    QMonomial qm;
    qm.coeff = c.real();
    qm.deriv = k.first;
    qm.poly = k.second;
    mono.push_back(std::move(qm));
  }
  return QOperator(n_modes, std::move(mono));
}

QOperator::QOperator(int n_modes, std::vector<QMonomial> monomials)
    : n_modes_(n_modes), mono_(std::move(monomials)) {
  const int d = dim();
  std::sort(mono_.begin(), mono_.end(), [](const QMonomial& a, const QMonomial& b) {
    if (a.deriv != b.deriv) return a.deriv < b.deriv;
    return a.poly < b.poly;
  });
  for (const auto& m : mono_) {
    if (static_cast<int>(m.poly.size()) != d || static_cast<int>(m.deriv.size()) != d)
      throw ConfigError("operator monomial has wrong dimension");
    EvalTerm t;
    t.coeff = m.coeff;
    for (int c = 0; c < d; ++c)
      if (m.poly[c] > 0) t.poly.emplace_back(c, m.poly[c]);
    t.order = 0;
    t.i = t.j = -1;
    for (int c = 0; c < d; ++c)
      for (int rep = 0; rep < m.deriv[c]; ++rep) {
        ++t.order;
        if (t.i < 0)
          t.i = c;
        else if (t.j < 0)
          t.j = c;
      }
    max_order_ = std::max(max_order_, t.order);
    if (t.order == 2 && t.i != t.j) diag2_ = false;
    terms_.push_back(std::move(t));
  }
}

double QOperator::apply_ratio(const double* x, const double* grad, const double* hess,
                              bool diag) const {
  if (max_order_ > 2)
    throw UnsupportedTermError("ratio evaluation supports derivative order <= 2");
  const int d = dim();
  double r = 0;
  for (const auto& t : terms_) {
    double v = t.coeff;
    for (const auto& [c, e] : t.poly) {
      double xp = x[c];
      for (int i = 1; i < e; ++i) xp *= x[c];
      v *= xp;
    }
    if (t.order == 1) {
      v *= grad[t.i];
    } else if (t.order == 2) {
      if (t.i == t.j) {
        const double h = diag ? hess[t.i] : hess[t.i * d + t.i];
        v *= h + grad[t.i] * grad[t.i];
      } else {
        if (diag)
          throw DomainError("mixed second derivative needs a full Hessian");
        v *= hess[t.i * d + t.j] + grad[t.i] * grad[t.j];
      }
    }
    r += v;
  }
  return r;
}

double QOperator::apply_ratio(const Eigen::VectorXd& x, const Eigen::VectorXd& grad,
                              const Eigen::MatrixXd& hess) const {
  if (x.size() != dim() || grad.size() != dim() || hess.rows() != dim() ||
      hess.cols() != dim())
    throw DomainError("apply_ratio input dimension mismatch");
  if (!x.allFinite() || !grad.allFinite() || !hess.allFinite())
    throw DomainError("apply_ratio inputs must be finite");
  // Hessians are symmetric, so the storage order does not matter
  return apply_ratio(x.data(), grad.data(), hess.data(), false);
}

std::string to_string(const QOperator& op) {
  if (op.empty()) return "0";
  std::string out;
  char buf[64];
  const int M = op.n_modes();
  for (const auto& m : op.monomials()) {
    std::snprintf(buf, sizeof buf, "%+.12g", m.coeff);
    out += buf;
    for (int c = 0; c < 2 * M; ++c)
      if (m.poly[c] > 0) {
        std::snprintf(buf, sizeof buf, " %c%d", c < M ? 'q' : 'p', c % M + 1);
        out += buf;
        if (m.poly[c] > 1) {
          std::snprintf(buf, sizeof buf, "^%d", m.poly[c]);
          out += buf;
        }
      }
    for (int c = 0; c < 2 * M; ++c)
      if (m.deriv[c] > 0) {
        std::snprintf(buf, sizeof buf, " d%c%d", c < M ? 'q' : 'p', c % M + 1);
        out += buf;
        if (m.deriv[c] > 1) {
          std::snprintf(buf, sizeof buf, "^%d", m.deriv[c]);
          out += buf;
        }
      }
    out += '\n';
  }
  return out;
}

}  // namespace qphase
