#include "qphase/fock.hpp"

#include <Eigen/Eigenvalues>
#include <cmath>
#include <cstdio>
#include <string>

#include "qphase/errors.hpp"
#include "qphase/grid.hpp"

namespace qphase {

namespace {

constexpr double kPi = 3.14159265358979323846;

// digits of a flattened basis index, row-major, last mode fastest
void decode(int idx, int n_modes, int cutoff, int* digits) {
  for (int m = n_modes - 1; m >= 0; --m) {
    digits[m] = idx % cutoff;
    idx /= cutoff;
  }
}

// c_n(alpha) = e^{-|a|^2/2} alpha^n / sqrt(n!), built iteratively
void coherent_coeffs(cplx alpha, int cutoff, cplx* c) {
  c[0] = std::exp(-0.5 * std::norm(alpha));
  for (int n = 1; n < cutoff; ++n) c[n] = c[n - 1] * alpha / std::sqrt(double(n));
}

}  // namespace

FockDensityMatrix FockDensityMatrix::zero(int n_modes, int cutoff) {
  if (n_modes < 1 || cutoff < 1) throw ConfigError("fock: bad shape");
  long dim = 1;
  for (int m = 0; m < n_modes; ++m) {
    dim *= cutoff;
    if (dim > 4096) throw ConfigError("fock: basis dimension over 4096");
  }
  FockDensityMatrix r;
  r.n_modes = n_modes;
  r.cutoff = cutoff;
  r.rho = Eigen::MatrixXcd::Zero(dim, dim);
  return r;
}

void FockDensityMatrix::check(double herm_tol, double trace_tol, double eig_tol,
                              bool check_spectrum) const {
  if (rho.rows() != rho.cols()) throw DomainError("fock: matrix not square");
  double herm = (rho - rho.adjoint()).cwiseAbs().maxCoeff();
  if (herm > herm_tol) {
    char buf[128];
    std::snprintf(buf, sizeof buf, "fock: hermiticity defect %.3g", herm);
    throw DomainError(buf);
  }
  double tr = rho.trace().real();
  if (std::abs(tr - 1.0) > trace_tol) {
    char buf[128];
    std::snprintf(buf, sizeof buf, "fock: trace %.12g", tr);
    throw DomainError(buf);
  }
  if (check_spectrum) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(
        0.5 * (rho + rho.adjoint()), Eigen::EigenvaluesOnly);
    double lo = es.eigenvalues().minCoeff();
    if (lo < -eig_tol) {
      char buf[128];
      std::snprintf(buf, sizeof buf, "fock: negative eigenvalue %.3g", lo);
      throw DomainError(buf);
    }
  }
}

FockDensityMatrix coherent_fock_state(const std::vector<cplx>& beta, int cutoff) {
  int M = static_cast<int>(beta.size());
  FockDensityMatrix r = FockDensityMatrix::zero(M, cutoff);
  int dim = r.dim();
  std::vector<cplx> c(static_cast<size_t>(M) * cutoff);
  for (int m = 0; m < M; ++m) coherent_coeffs(beta[m], cutoff, &c[m * cutoff]);
  Eigen::VectorXcd psi(dim);
  std::vector<int> dg(M);
  for (int i = 0; i < dim; ++i) {
    decode(i, M, cutoff, dg.data());
    cplx v = 1.0;
    for (int m = 0; m < M; ++m) v *= c[m * cutoff + dg[m]];
    psi[i] = v;
  }
  psi /= psi.norm();  // fold truncated tail back in
  r.rho = psi * psi.adjoint();
  return r;
}

FockDensityMatrix bec_fock_state(int n_total, int cutoff) {
  if (cutoff < n_total + 1) throw ConfigError("fock: cutoff below particle number");
  FockDensityMatrix r = FockDensityMatrix::zero(2, cutoff);
  Eigen::VectorXcd psi = Eigen::VectorXcd::Zero(r.dim());
  // (a1^dag - a2^dag)^N |0,0> / sqrt(2^N N!) has amplitude
  // (-1)^(N-k) sqrt(C(N,k)/2^N) on |k, N-k>
  for (int k = 0; k <= n_total; ++k) {
    double lc = std::lgamma(n_total + 1.0) - std::lgamma(k + 1.0) -
                std::lgamma(n_total - k + 1.0);
    double amp = std::sqrt(std::exp(lc - n_total * std::log(2.0)));
    if ((n_total - k) % 2 != 0) amp = -amp;
    psi[k * cutoff + (n_total - k)] = amp;
  }
  r.rho = psi * psi.adjoint();
  return r;
}

double q_from_rho(const FockDensityMatrix& rho, const Eigen::VectorXd& x) {
  int M = rho.n_modes, K = rho.cutoff;
  if (x.size() != 2 * M) throw DomainError("fock: point dimension mismatch");
  std::vector<cplx> c(static_cast<size_t>(M) * K);
  double missing = 0.0;
  for (int m = 0; m < M; ++m) {
    cplx alpha(x[m], x[M + m]);
    coherent_coeffs(alpha, K, &c[m * K]);
    double kept = 0.0;
    for (int n = 0; n < K; ++n) kept += std::norm(c[m * K + n]);
    missing += std::max(0.0, 1.0 - kept);
  }
  // A coherent tail past the cutoff only matters if the state occupies the
  // truncation boundary; bound the cross term by Cauchy-Schwarz.
  if (missing > 1e-10) {
    double edge = 0.0;
    std::vector<int> dg(M);
    for (int i = 0; i < rho.dim(); ++i) {
      decode(i, M, K, dg.data());
      for (int m = 0; m < M; ++m)
        if (dg[m] == K - 1) {
          edge += std::max(0.0, rho.rho(i, i).real());
          break;
        }
    }
    double est = 2.0 * std::sqrt(missing * edge) + missing * edge;
    if (est > 1e-9) {
      char buf[160];
      std::snprintf(buf, sizeof buf,
                    "fock: cutoff %d too small at |x|=%.3g (tail %.2e, edge mass %.2e)",
                    K, x.norm(), missing, edge);
      throw CutoffError(buf);
    }
  }
  Eigen::VectorXcd v(rho.dim());
  std::vector<int> dg(M);
  for (int i = 0; i < rho.dim(); ++i) {
    decode(i, M, K, dg.data());
    cplx a = 1.0;
    for (int m = 0; m < M; ++m) a *= c[m * K + dg[m]];
    v[i] = a;
  }
  double val = (v.adjoint() * rho.rho * v).value().real();
  return val / std::pow(kPi, M);
}

FockDensityMatrix rho_from_q_taylor(const QTaylorTable& table, int cutoff) {
  int A = table.order();
  if (cutoff - 1 > A) throw ConfigError("fock: taylor table order below cutoff");
  FockDensityMatrix r = FockDensityMatrix::zero(1, cutoff);
  for (int m = 0; m < cutoff; ++m)
    for (int n = 0; n < cutoff; ++n) {
      double lmn = 0.5 * (std::lgamma(m + 1.0) + std::lgamma(n + 1.0));
      cplx acc = 0.0;
      for (int k = 0; k <= std::min(m, n); ++k)
        acc += std::exp(lmn - std::lgamma(k + 1.0)) * table.c(n - k, m - k);
      r.rho(m, n) = kPi * acc;
    }
  try {
    r.check(1e-6, 1e-6, 1e-6);
  } catch (const DomainError& e) {
    throw DomainError(std::string("fock: inconsistent taylor table: ") + e.what());
  }
  return r;
}

cplx observable_moment(const Eigen::MatrixXd& samples, int n_modes, int mode, int m,
                       int n) {
  if (samples.cols() != 2 * n_modes) throw DomainError("moment: sample width");
  if (mode < 0 || mode >= n_modes) throw DomainError("moment: mode out of range");
  Eigen::ArrayXcd alpha =
      samples.col(mode).array() + cplx(0, 1) * samples.col(n_modes + mode).array();
  Eigen::ArrayXcd term = Eigen::ArrayXcd::Ones(samples.rows());
  for (int i = 0; i < m; ++i) term *= alpha;
  for (int i = 0; i < n; ++i) term *= alpha.conjugate();
  return term.mean();
}

cplx observable_moment(const GridState& grid, int mode, int m, int n) {
  int M = grid.dim / 2;
  if (mode < 0 || mode >= M) throw DomainError("moment: mode out of range");
  cplx acc = 0.0;
  Eigen::VectorXd x(grid.dim);
  for (long i = 0; i < grid.values.size(); ++i) {
    grid_point(grid, i, x);
    cplx alpha(x[mode], x[M + mode]);
    cplx term = grid.values[i];
    for (int k = 0; k < m; ++k) term *= alpha;
    for (int k = 0; k < n; ++k) term *= std::conj(alpha);
    acc += term;
  }
  return acc * std::pow(grid.spacing(), grid.dim);
}

namespace {

// (A rho B)(m, n) = rcoef[m] * rho(rsrc[m], csrc[n]) * ccoef[n] for the
// single-band operators A = prod adag^j a^k, B = prod adag^l a^s
struct TermMap {
  cplx coeff;
  std::vector<int> rsrc, csrc;
  std::vector<double> rcoef, ccoef;
};

// amplitude of adag^up a^down acting on level `src`, target src - down + up
double ladder_amp(int src, int down, int up) {
  double f = 1.0;
  for (int t = 0; t < down; ++t) f *= src - t;
  for (int t = 1; t <= up; ++t) f *= src - down + t;
  return std::sqrt(f);
}

TermMap build_term_map(const LindbladTerm& term, int n_modes, int cutoff, int dim) {
  TermMap tm;
  tm.coeff = term.coeff;
  tm.rsrc.assign(dim, -1);
  tm.csrc.assign(dim, -1);
  tm.rcoef.assign(dim, 0.0);
  tm.ccoef.assign(dim, 0.0);
  std::vector<int> dg(n_modes), sg(n_modes);
  for (int i = 0; i < dim; ++i) {
    decode(i, n_modes, cutoff, dg.data());
    // rows: A maps src -> src - k + j, so src digit = digit + k - j
    bool ok = true;
    double f = 1.0;
    for (int m = 0; m < n_modes && ok; ++m) {
      const auto [j, k, l, s] = term.powers[m];
      (void)l;
      (void)s;
      int src = dg[m] + k - j;
      if (src < 0 || src >= cutoff || src - k < 0) {
        ok = false;
        break;
      }
      sg[m] = src;
      f *= ladder_amp(src, k, j);
    }
    if (ok) {
      int idx = 0;
      for (int m = 0; m < n_modes; ++m) idx = idx * cutoff + sg[m];
      tm.rsrc[i] = idx;
      tm.rcoef[i] = f;
    }
    // cols: B(n', n) = <n'|B|n> acts on the target ket, so the rho column
    // feeding digit n sits at n' = n - s + l with weight ladder_amp(n, s, l)
    ok = true;
    f = 1.0;
    for (int m = 0; m < n_modes && ok; ++m) {
      const auto [j, k, l, s] = term.powers[m];
      (void)j;
      (void)k;
      int src = dg[m] - s + l;
      if (src >= cutoff || dg[m] - s < 0) {
        ok = false;
        break;
      }
      sg[m] = src;
      f *= ladder_amp(dg[m], s, l);
    }
    if (ok) {
      int idx = 0;
      for (int m = 0; m < n_modes; ++m) idx = idx * cutoff + sg[m];
      tm.csrc[i] = idx;
      tm.ccoef[i] = f;
    }
  }
  return tm;
}

void accumulate_rhs(const std::vector<TermMap>& maps, const Eigen::MatrixXcd& rho,
                    Eigen::MatrixXcd& out) {
  out.setZero();
  int dim = static_cast<int>(rho.rows());
  for (const TermMap& tm : maps)
    for (int n = 0; n < dim; ++n) {
      if (tm.csrc[n] < 0) continue;
      cplx cc = tm.coeff * tm.ccoef[n];
      const cplx* src = rho.col(tm.csrc[n]).data();
      cplx* dst = out.col(n).data();
      for (int m = 0; m < dim; ++m)
        if (tm.rsrc[m] >= 0) dst[m] += cc * tm.rcoef[m] * src[tm.rsrc[m]];
    }
}

}  // namespace

FockDensityMatrix lindblad_fock_evolve(const FockDensityMatrix& rho0,
                                       const std::vector<LindbladTerm>& terms,
                                       double dt, long steps) {
  if (steps < 0 || dt <= 0) throw ConfigError("fock evolve: bad time step");
  int dim = rho0.dim();
  std::vector<TermMap> maps;
  maps.reserve(terms.size());
  for (const LindbladTerm& term : terms) {
    if (static_cast<int>(term.powers.size()) != rho0.n_modes)
      throw DomainError("fock evolve: term mode count mismatch");
    maps.push_back(build_term_map(term, rho0.n_modes, rho0.cutoff, dim));
  }
  FockDensityMatrix out = rho0;
  Eigen::MatrixXcd k1(dim, dim), k2(dim, dim), k3(dim, dim), k4(dim, dim),
      tmp(dim, dim);
  double tr0 = rho0.rho.trace().real();
  for (long s = 0; s < steps; ++s) {
    accumulate_rhs(maps, out.rho, k1);
    tmp = out.rho + (0.5 * dt) * k1;
    accumulate_rhs(maps, tmp, k2);
    tmp = out.rho + (0.5 * dt) * k2;
    accumulate_rhs(maps, tmp, k3);
    tmp = out.rho + dt * k3;
    accumulate_rhs(maps, tmp, k4);
    out.rho += (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
  }
  double drift = std::abs(out.rho.trace().real() - tr0);
  if (drift > 1e-6) {
    char buf[128];
    std::snprintf(buf, sizeof buf, "fock evolve: trace leakage %.3g", drift);
    throw CutoffError(buf);
  }
  double herm = (out.rho - out.rho.adjoint()).cwiseAbs().maxCoeff();
  if (herm > 1e-9) throw NumericsError("fock evolve: hermiticity lost");
  return out;
}

double q_dynamics_crosscheck(const FockDensityMatrix& rho0,
                             const std::vector<LindbladTerm>& terms, double t,
                             double dt, int grid_n, double extent) {
  QOperator op = compile(terms, rho0.n_modes);
  GridState g = make_grid(2 * rho0.n_modes, grid_n, extent);
  Eigen::VectorXd x(g.dim);
  for (long i = 0; i < g.values.size(); ++i) {
    grid_point(g, i, x);
    g.values[i] = q_from_rho(rho0, x);
  }
  PsOptions opts;
  GridState gt = pseudospectral_solve(op, g, t, opts);
  long steps = std::max(1L, std::lround(std::ceil(t / dt - 1e-12)));
  FockDensityMatrix rt = lindblad_fock_evolve(rho0, terms, t / steps, steps);
  double worst = 0.0;
  for (long i = 0; i < gt.values.size(); ++i) {
    grid_point(gt, i, x);
    worst = std::max(worst, std::abs(gt.values[i] - q_from_rho(rt, x)));
  }
  return worst;
}

}  // namespace qphase
