#include "qphase/grid.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdio>
#include <cstring>

#include "qphase/errors.hpp"

namespace qphase {

namespace {

long checked_size(int dim, int n) {
  if (dim < 1 || dim > 4) throw DomainError("grid: dimension must be 1..4");
  if (n < 8 || n % 2 != 0) throw ConfigError("grid: need an even axis size >= 8");
  long s = 1;
  for (int a = 0; a < dim; ++a) s *= n;
  return s;
}

}  // namespace

GridState make_grid(int dim, int n, double extent) {
  if (extent <= 0) throw ConfigError("grid: extent must be positive");
  GridState g;
  g.dim = dim;
  g.n = n;
  g.extent = extent;
  g.values = Vec::Zero(checked_size(dim, n));
  return g;
}

void grid_point(const GridState& g, long idx, Vec& x) {
  x.resize(g.dim);
  double h = g.spacing();
  for (int a = g.dim - 1; a >= 0; --a) {
    x[a] = -g.extent + h * (idx % g.n);
    idx /= g.n;
  }
}

void fill_grid(GridState& g, const std::function<double(const Vec&)>& f) {
  Vec x(g.dim);
  for (long i = 0; i < g.size(); ++i) {
    grid_point(g, i, x);
    g.values[i] = f(x);
  }
}

double grid_quadrature(const GridState& g) {
  return g.values.sum() * std::pow(g.spacing(), g.dim);
}

namespace {

// Spectral evaluation of sum_m coeff_m poly_m(x) D^kappa_m q on the periodic
// grid. Monomials sharing a derivative multi-index share one transform.
class SpectralOp {
 public:
  SpectralOp(const QOperator& op, const GridState& proto)
      : dim_(proto.dim), n_(proto.n), extent_(proto.extent) {
    nreal_ = checked_size(dim_, n_);
    ncplx_ = nreal_ / n_ * (n_ / 2 + 1);
    group_monomials(op);
    real_ = fftw_alloc_real(nreal_);
    spec_ = fftw_alloc_complex(ncplx_);
    scratch_ = fftw_alloc_complex(ncplx_);
    if (!real_ || !spec_ || !scratch_) throw NumericsError("grid: fftw alloc failed");
    int sizes[4] = {n_, n_, n_, n_};
    fwd_ = fftw_plan_dft_r2c(dim_, sizes, real_, spec_, FFTW_ESTIMATE);
    bwd_ = fftw_plan_dft_c2r(dim_, sizes, scratch_, real_, FFTW_ESTIMATE);
    if (!fwd_ || !bwd_) throw NumericsError("grid: fftw plan failed");
    freq_.resize(n_);
    double dk = 3.14159265358979323846 / extent_;  // 2 pi / L
    for (int k = 0; k < n_; ++k) freq_[k] = dk * (k <= n_ / 2 ? k : k - n_);
  }

  ~SpectralOp() {
    fftw_destroy_plan(fwd_);
    fftw_destroy_plan(bwd_);
    fftw_free(real_);
    fftw_free(spec_);
    fftw_free(scratch_);
  }

  SpectralOp(const SpectralOp&) = delete;
  SpectralOp& operator=(const SpectralOp&) = delete;

  void rhs(const Vec& q, Vec& out) {
    out.setZero();
    bool transformed = false;
    for (const Group& grp : groups_) {
      if (grp.order == 0) {
        accumulate(grp, q.data(), 1.0, out);
        continue;
      }
      if (!transformed) {
        std::memcpy(real_, q.data(), sizeof(double) * nreal_);
        fftw_execute(fwd_);
        transformed = true;
      }
      apply_multiplier(grp);
      fftw_execute(bwd_);
      accumulate(grp, real_, 1.0 / nreal_, out);
    }
  }

 private:
  struct Mono {
    double coeff;
    std::vector<std::pair<int, int>> poly;  // (coordinate, exponent)
  };
  struct Group {
    std::vector<int> kappa;
    int order = 0;
    std::vector<Mono> monos;
  };

  void group_monomials(const QOperator& op) {
    for (const QMonomial& m : op.monomials()) {
      if ((int)m.deriv.size() != dim_ || (int)m.poly.size() != dim_)
        throw DomainError("grid: operator dimension mismatch");
      std::vector<int> kappa(dim_, 0);
      int order = 0;
      for (int c = 0; c < dim_; ++c) {
        kappa[c] = m.deriv[c];
        order += m.deriv[c];
      }
      if (groups_.empty() || groups_.back().kappa != kappa) {
        Group g;
        g.kappa = kappa;
        g.order = order;
        groups_.push_back(std::move(g));
      }
      Mono mono;
      mono.coeff = m.coeff;
      for (int c = 0; c < dim_; ++c)
        if (m.poly[c] > 0) mono.poly.emplace_back(c, m.poly[c]);
      groups_.back().monos.push_back(std::move(mono));
    }
  }

  // scratch = spec * prod_a (i w_a)^kappa_a, zeroing odd-derivative Nyquist
  void apply_multiplier(const Group& grp) {
    int last = n_ / 2 + 1;
    std::vector<int> digit(dim_, 0);
    for (long i = 0; i < ncplx_; ++i) {
      std::complex<double> mult = 1.0;
      for (int a = 0; a < dim_; ++a) {
        int e = grp.kappa[a];
        if (e == 0) continue;
        if (digit[a] == n_ / 2 && e % 2 == 1) {
          mult = 0.0;
          break;
        }
        std::complex<double> iw(0.0, freq_[digit[a]]);
        for (int r = 0; r < e; ++r) mult *= iw;
      }
      std::complex<double> v(spec_[i][0], spec_[i][1]);
      v *= mult;
      scratch_[i][0] = v.real();
      scratch_[i][1] = v.imag();
      for (int a = dim_ - 1; a >= 0; --a) {
        int lim = (a == dim_ - 1) ? last : n_;
        if (++digit[a] < lim) break;
        digit[a] = 0;
      }
    }
  }

  // out += scale * poly(x) * field, iterating coordinates in odometer order
  void accumulate(const Group& grp, const double* field, double scale, Vec& out) {
    double h = 2.0 * extent_ / n_;
    std::vector<int> digit(dim_, 0);
    std::vector<double> coord(dim_, -extent_);
    for (long i = 0; i < nreal_; ++i) {
      double p = 0.0;
      for (const Mono& mono : grp.monos) {
        double term = mono.coeff;
        for (auto [c, e] : mono.poly) {
          double base = coord[c];
          for (int r = 0; r < e; ++r) term *= base;
        }
        p += term;
      }
      out[i] += scale * p * field[i];
      for (int a = dim_ - 1; a >= 0; --a) {
        if (++digit[a] < n_) {
          coord[a] = -extent_ + h * digit[a];
          break;
        }
        digit[a] = 0;
        coord[a] = -extent_;
      }
    }
  }

  int dim_, n_;
  double extent_;
  long nreal_ = 0, ncplx_ = 0;
  std::vector<Group> groups_;
  double* real_ = nullptr;
  fftw_complex* spec_ = nullptr;
  fftw_complex* scratch_ = nullptr;
  fftw_plan fwd_ = nullptr, bwd_ = nullptr;
  std::vector<double> freq_;
};

// clip negatives, renormalize when needed; exact no-op on clean input
void project(GridState& g) {
  bool clipped = false;
  for (long i = 0; i < g.size(); ++i)
    if (g.values[i] < 0) {
      g.values[i] = 0;
      clipped = true;
    }
  double quad = grid_quadrature(g);
  if (quad <= 0) throw NumericsError("grid: density mass vanished");
  if (clipped || std::abs(quad - 1.0) > 1e-13) g.values /= quad;
}

}  // namespace

void apply_operator_grid(const QOperator& op, const GridState& g, Vec& out) {
  SpectralOp sp(op, g);
  out.resize(g.size());
  sp.rhs(g.values, out);
}

double conservation_defect(const QOperator& op, const GridState& g) {
  Vec lq;
  apply_operator_grid(op, g, lq);
  return lq.sum() * std::pow(g.spacing(), g.dim);
}

GridState pseudospectral_solve(const QOperator& op, const GridState& q0,
                               double t_end, const PsOptions& opts) {
  if (q0.dim > 4)
    throw DomainError(
        "pseudospectral: more than 4 grid dimensions; use the flow methods");
  if (t_end < 0) throw ConfigError("pseudospectral: negative end time");
  checked_size(q0.dim, q0.n);
  SpectralOp sp(op, q0);
  GridState y = q0;
  if (opts.project) project(y);
  if (t_end == 0) return y;

  // Dormand-Prince 5(4) tableau
  static const double a21 = 1.0 / 5;
  static const double a31 = 3.0 / 40, a32 = 9.0 / 40;
  static const double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
  static const double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187,
                      a53 = 64448.0 / 6561, a54 = -212.0 / 729;
  static const double a61 = 9017.0 / 3168, a62 = -355.0 / 33,
                      a63 = 46732.0 / 5247, a64 = 49.0 / 176,
                      a65 = -5103.0 / 18656;
  static const double b1 = 35.0 / 384, b3 = 500.0 / 1113, b4 = 125.0 / 192,
                      b5 = -2187.0 / 6784, b6 = 11.0 / 84;
  static const double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920,
                      e5 = -17253.0 / 339200, e6 = 22.0 / 525, e7 = -1.0 / 40;

  long N = y.size();
  Vec k1(N), k2(N), k3(N), k4(N), k5(N), k6(N), k7(N), ytmp(N), y5(N);
  double t = 0.0, dt = std::min(opts.dt_init, t_end);
  while (t < t_end) {
    dt = std::min(dt, t_end - t);
    sp.rhs(y.values, k1);
    ytmp = y.values + dt * (a21 * k1);
    sp.rhs(ytmp, k2);
    ytmp = y.values + dt * (a31 * k1 + a32 * k2);
    sp.rhs(ytmp, k3);
    ytmp = y.values + dt * (a41 * k1 + a42 * k2 + a43 * k3);
    sp.rhs(ytmp, k4);
    ytmp = y.values + dt * (a51 * k1 + a52 * k2 + a53 * k3 + a54 * k4);
    sp.rhs(ytmp, k5);
    ytmp = y.values + dt * (a61 * k1 + a62 * k2 + a63 * k3 + a64 * k4 + a65 * k5);
    sp.rhs(ytmp, k6);
    y5 = y.values + dt * (b1 * k1 + b3 * k3 + b4 * k4 + b5 * k5 + b6 * k6);
    sp.rhs(y5, k7);

    double err = 0.0;
    for (long i = 0; i < N; ++i) {
      double e = dt * (e1 * k1[i] + e3 * k3[i] + e4 * k4[i] + e5 * k5[i] +
                       e6 * k6[i] + e7 * k7[i]);
      double sc =
          opts.atol + opts.rtol * std::max(std::abs(y.values[i]), std::abs(y5[i]));
      err += (e / sc) * (e / sc);
    }
    err = std::sqrt(err / N);

    if (err <= 1.0) {
      y.values.swap(y5);
      if (opts.project) project(y);
      t += dt;
      double fac = (err < 1e-30) ? 5.0 : 0.9 * std::pow(err, -0.2);
      dt *= std::clamp(fac, 0.2, 5.0);
    } else {
      dt *= std::clamp(0.9 * std::pow(err, -0.2), 0.2, 1.0);
    }
    if (dt < 1e-12) throw NumericsError("pseudospectral: step size underflow");
  }
  return y;
}

double grid_log_density(const GridState& g, const Vec& x) {
  if (x.size() != g.dim) throw DomainError("grid: point dimension mismatch");
  constexpr double kFloor = -690.77552789821368;  // log(1e-300)
  double h = g.spacing();
  int base[4];
  double frac[4];
  for (int a = 0; a < g.dim; ++a) {
    double u = (x[a] + g.extent) / h;
    if (u < 0 || u >= g.n - 1) return kFloor;
    base[a] = static_cast<int>(u);
    frac[a] = u - base[a];
  }
  double acc = 0.0;
  int corners = 1 << g.dim;
  for (int c = 0; c < corners; ++c) {
    long idx = 0;
    double w = 1.0;
    for (int a = 0; a < g.dim; ++a) {
      int bit = (c >> a) & 1;
      idx = idx * g.n + base[a] + bit;
      w *= bit ? frac[a] : 1.0 - frac[a];
    }
    acc += w * std::log(std::max(g.values[idx], 1e-300));
  }
  return acc;
}

void grid_sample(const GridState& g, int n_samples, RngStream& rng, Mat& out) {
  long N = g.size();
  Vec cum(N);
  double run = 0.0;
  for (long i = 0; i < N; ++i) {
    run += std::max(g.values[i], 0.0);
    cum[i] = run;
  }
  if (run <= 0) throw DomainError("grid: cannot sample an empty density");
  out.resize(n_samples, g.dim);
  double h = g.spacing();
  for (int s = 0; s < n_samples; ++s) {
    double u = rng.uniform() * run;
    long lo = 0, hi = N - 1;
    while (lo < hi) {
      long mid = (lo + hi) / 2;
      if (cum[mid] < u)
        lo = mid + 1;
      else
        hi = mid;
    }
    long idx = lo;
    for (int a = g.dim - 1; a >= 0; --a) {
      // cell centered on the grid point
      double corner = -g.extent + h * (idx % g.n) - 0.5 * h;
      out(s, a) = corner + h * rng.uniform();
      idx /= g.n;
    }
  }
}

void save_grid(const GridState& g, const std::string& path) {
  std::FILE* f = std::fopen(path.c_str(), "wb");
  if (!f) throw IoError("grid: cannot open " + path);
  std::fprintf(f, "gridstate 1\ndim %d\nn %d\nextent %.17g\n", g.dim, g.n,
               g.extent);
  size_t n = static_cast<size_t>(g.size());
  if (std::fwrite(g.values.data(), sizeof(double), n, f) != n) {
    std::fclose(f);
    throw IoError("grid: short write to " + path);
  }
  std::fclose(f);
}

GridState load_grid(const std::string& path) {
  std::FILE* f = std::fopen(path.c_str(), "rb");
  if (!f) throw IoError("grid: cannot open " + path);
  int dim = 0, n = 0;
  double extent = 0;
  if (std::fscanf(f, "gridstate 1\ndim %d\nn %d\nextent %lg", &dim, &n,
                  &extent) != 3 ||
      std::fgetc(f) != '\n') {
    std::fclose(f);
    throw IoError("grid: bad header in " + path);
  }
  GridState g;
  try {
    g = make_grid(dim, n, extent);
  } catch (...) {
    std::fclose(f);
    throw;
  }
  size_t count = static_cast<size_t>(g.size());
  if (std::fread(g.values.data(), sizeof(double), count, f) != count) {
    std::fclose(f);
    throw IoError("grid: short read from " + path);
  }
  std::fclose(f);
  return g;
}

}  // namespace qphase
