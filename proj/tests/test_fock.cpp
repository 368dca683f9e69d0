#include <cmath>
#include <complex>
#include <vector>

#include "doctest.h"
#include "qphase/errors.hpp"
#include "qphase/fock.hpp"
#include "qphase/grid.hpp"
#include "qphase/moments.hpp"

using namespace qphase;

namespace {

Eigen::MatrixXcd lowering(int k) {
  Eigen::MatrixXcd a = Eigen::MatrixXcd::Zero(k, k);
  for (int n = 1; n < k; ++n) a(n - 1, n) = std::sqrt(double(n));
  return a;
}

// lowering operator for one mode of a flattened two-mode basis
Eigen::MatrixXcd lowering2(int k, int mode) {
  Eigen::MatrixXcd a = lowering(k), id = Eigen::MatrixXcd::Identity(k, k);
  Eigen::MatrixXcd out(k * k, k * k);
  const Eigen::MatrixXcd& L = mode == 0 ? a : id;
  const Eigen::MatrixXcd& R = mode == 0 ? id : a;
  for (int i = 0; i < k; ++i)
    for (int j = 0; j < k; ++j)
      out.block(i * k, j * k, k, k) = L(i, j) * R;
  return out;
}

cplx tr(const Eigen::MatrixXcd& A, const Eigen::MatrixXcd& rho) {
  return (A * rho).trace();
}

}  // namespace

TEST_SUITE("fock") {

TEST_CASE("coherent state amplitudes and husimi values") {
  const cplx beta(0.5, 0.0);
  FockDensityMatrix st = coherent_fock_state({beta}, 20);
  st.check();

  // rho_nm = e^{-|b|^2} b^n conj(b)^m / sqrt(n! m!)
  for (int n = 0; n < 20; ++n)
    for (int m = 0; m < 20; ++m) {
      double expect = std::exp(-0.25) * std::pow(0.5, n + m) /
                      std::sqrt(std::tgamma(n + 1.0) * std::tgamma(m + 1.0));
      CHECK(std::abs(st.rho(n, m) - expect) < 1e-12);
    }

  // Q(alpha) = exp(-|alpha - beta|^2) / pi
  Vec x(2);
  for (auto [q, p] : {std::pair{0.0, 0.0}, {1.0, -0.5}, {-1.5, 2.0}}) {
    x << q, p;
    cplx alpha(q, p);
    double expect = std::exp(-std::norm(alpha - beta)) / M_PI;
    CHECK(q_from_rho(st, x) == doctest::Approx(expect).epsilon(1e-8));
  }
}

TEST_CASE("two-mode coherent product") {
  const cplx b1(0.3, -0.4), b2(-0.2, 0.1);
  FockDensityMatrix st = coherent_fock_state({b1, b2}, 12);
  st.check();
  Vec x(4);
  x << 0.1, -0.3, 0.2, 0.4;
  cplx a1(x[0], x[2]), a2(x[1], x[3]);
  double expect = std::exp(-std::norm(a1 - b1) - std::norm(a2 - b2)) / (M_PI * M_PI);
  CHECK(q_from_rho(st, x) == doctest::Approx(expect).epsilon(1e-8));
}

TEST_CASE("husimi quadrature of a mixed low-lying state is one") {
  // random positive unit-trace state on levels < 12, embedded at cutoff 30;
  // the top levels stay empty so the tail guard is quiet
  RngStream r(3);
  Eigen::MatrixXcd A = Eigen::MatrixXcd::Zero(30, 30);
  for (int i = 0; i < 12; ++i)
    for (int j = 0; j < 12; ++j) A(i, j) = cplx(r.normal(), r.normal());
  FockDensityMatrix st;
  st.n_modes = 1;
  st.cutoff = 30;
  st.rho = A * A.adjoint();
  st.rho /= st.rho.trace().real();
  st.check();

  const int n = 200;
  const double extent = 8.0, h = 2 * extent / n;
  double total = 0;
  Vec x(2);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      x << -extent + (i + 0.5) * h, -extent + (j + 0.5) * h;
      total += q_from_rho(st, x);
    }
  CHECK(total * h * h == doctest::Approx(1.0).epsilon(1e-6));
}

TEST_CASE("tail guard fires when the cutoff visibly truncates") {
  FockDensityMatrix st = coherent_fock_state({cplx(3.0, 0.0)}, 6);
  Vec x(2);
  x << 3.0, 0.0;
  CHECK_THROWS_AS(q_from_rho(st, x), CutoffError);
}

TEST_CASE("vacuum taylor table inverts to the vacuum projector") {
  QTaylorTable t;
  t.c = Eigen::MatrixXcd::Zero(16, 16);
  for (int a = 0; a < 16; ++a)
    t.c(a, a) = std::pow(-1.0, a) / (M_PI * std::tgamma(a + 1.0));
  FockDensityMatrix st = rho_from_q_taylor(t, 8);
  CHECK(std::abs(st.rho(0, 0) - 1.0) < 1e-10);
  CHECK(st.rho.cwiseAbs().sum() == doctest::Approx(1.0).epsilon(1e-10));
}

TEST_CASE("coherent taylor table inverts to the coherent projector") {
  const cplx beta(0.4, 0.2);
  const int ord = 24;
  QTaylorTable t;
  t.c = Eigen::MatrixXcd::Zero(ord + 1, ord + 1);
  // pi Q = exp(-|b|^2) exp(conj(a) b) exp(a conj(b)) exp(-|a|^2)
  double w = std::exp(-std::norm(beta));
  for (int a = 0; a <= ord; ++a)
    for (int b = 0; b <= ord; ++b) {
      cplx sum = 0;
      for (int m = 0; m <= std::min(a, b); ++m)
        sum += std::pow(-1.0, m) * std::pow(std::conj(beta), a - m) *
               std::pow(beta, b - m) /
               (std::tgamma(a - m + 1.0) * std::tgamma(b - m + 1.0) *
                std::tgamma(m + 1.0));
      t.c(a, b) = w * sum / M_PI;
    }
  FockDensityMatrix st = rho_from_q_taylor(t, 8);
  FockDensityMatrix want = coherent_fock_state({beta}, 8);
  CHECK((st.rho - want.rho).cwiseAbs().maxCoeff() < 1e-8);
}

TEST_CASE("impossible taylor tables are rejected") {
  QTaylorTable zero;
  zero.c = Eigen::MatrixXcd::Zero(6, 6);
  CHECK_THROWS_AS(rho_from_q_taylor(zero, 4), DomainError);

  QTaylorTable bad;
  bad.c = Eigen::MatrixXcd::Zero(6, 6);
  bad.c(0, 0) = 1.0 / M_PI;
  bad.c(1, 1) = 1.0 / M_PI;  // inflates rho_11 past unit trace
  CHECK_THROWS_AS(rho_from_q_taylor(bad, 4), DomainError);
}

TEST_CASE("bec state occupations and parity") {
  FockDensityMatrix st = bec_fock_state(8, 11);
  st.check();
  Eigen::MatrixXcd a1 = lowering2(11, 0), a2 = lowering2(11, 1);
  Eigen::MatrixXcd n1 = a1.adjoint() * a1, n2 = a2.adjoint() * a2;
  CHECK(tr(n1, st.rho).real() == doctest::Approx(4.0).epsilon(1e-10));
  CHECK(tr(n2, st.rho).real() == doctest::Approx(4.0).epsilon(1e-10));
  // all particles in (a1^dag - a2^dag)/sqrt(2): <a1^dag a2> = -N/2
  CHECK(tr(a1.adjoint() * a2, st.rho).real() == doctest::Approx(-4.0).epsilon(1e-10));
  CHECK(std::abs(tr(a1, st.rho)) < 1e-12);
}

TEST_CASE("master equation reproduces damped oscillator moments") {
  const double w = 1.0, g = 1.0;
  ModelSpec spec;
  spec.kind = ModelSpec::Kind::Harmonic;
  spec.wells = 1;
  spec.omega = {w};
  spec.gamma = {g};
  spec.nbar = {0.0};
  const cplx beta(-1.0, -1.0);
  FockDensityMatrix st = coherent_fock_state({beta}, 16);
  const double t = 1.0;
  FockDensityMatrix out = lindblad_fock_evolve(st, model_terms(spec), 1e-3, 1000);
  out.check(1e-9, 1e-8, 1e-8);

  Eigen::MatrixXcd a = lowering(16);
  cplx expect = beta * std::exp(cplx(-g * t / 2, -w * t));
  CHECK(std::abs(tr(a, out.rho) - expect) < 1e-6);
  cplx n_expect = std::norm(beta) * std::exp(-g * t);
  CHECK(std::abs(tr(a.adjoint() * a, out.rho) - n_expect) < 1e-6);
}

TEST_CASE("thermal channel relaxes the occupation") {
  ModelSpec spec;
  spec.kind = ModelSpec::Kind::Harmonic;
  spec.wells = 1;
  spec.omega = {0.0};
  spec.gamma = {1.0};
  spec.nbar = {0.5};
  FockDensityMatrix st = coherent_fock_state({cplx(0.0, 0.0)}, 18);
  FockDensityMatrix out = lindblad_fock_evolve(st, model_terms(spec), 1e-3, 2000);
  Eigen::MatrixXcd a = lowering(18);
  // <n>(t) = nbar (1 - e^{-g t}) from vacuum
  double expect = 0.5 * (1 - std::exp(-2.0));
  CHECK(tr(a.adjoint() * a, out.rho).real() == doctest::Approx(expect).epsilon(1e-5));
}

TEST_CASE("cutoff leakage raises an error") {
  ModelSpec spec;
  spec.kind = ModelSpec::Kind::Harmonic;
  spec.wells = 1;
  spec.omega = {0.0};
  spec.gamma = {1.0};
  spec.nbar = {3.0};
  FockDensityMatrix st = coherent_fock_state({cplx(0.0, 0.0)}, 4);
  CHECK_THROWS_AS(lindblad_fock_evolve(st, model_terms(spec), 1e-2, 300),
                  CutoffError);
}

TEST_CASE("grid dynamics agree with the master equation") {
  ModelSpec spec;
  spec.kind = ModelSpec::Kind::Harmonic;
  spec.wells = 1;
  spec.omega = {1.0};
  spec.gamma = {1.0};
  spec.nbar = {0.0};
  // cutoff 26 keeps the edge occupation ~1e-23 so the far grid corners pass
  // the coherent-tail guard inside q_from_rho
  FockDensityMatrix st = coherent_fock_state({cplx(-1.0, -0.5)}, 26);
  double diff = q_dynamics_crosscheck(st, model_terms(spec), 1.0, 1e-3, 128, 8.0);
  CHECK(diff < 1e-4);

  // no dynamics: both sides keep the initial function
  double diff0 = q_dynamics_crosscheck(st, {}, 1.0, 1e-3, 128, 8.0);
  CHECK(diff0 < 1e-8);
}

TEST_CASE("sample moments estimate antinormal expectations") {
  // coherent-state Q is a unit-variance/2 gaussian: E[alpha] = beta,
  // E[|alpha|^2] = |beta|^2 + 1
  RngStream r(7);
  const cplx beta(0.6, -0.3);
  const int n = 400000;
  Mat samples(n, 2);
  const double s = std::sqrt(0.5);
  for (int i = 0; i < n; ++i) {
    samples(i, 0) = beta.real() + s * r.normal();
    samples(i, 1) = beta.imag() + s * r.normal();
  }
  cplx m1 = observable_moment(samples, 1, 0, 1, 0);
  CHECK(std::abs(m1 - beta) < 5e-3);
  cplx m11 = observable_moment(samples, 1, 0, 1, 1);
  CHECK(std::abs(m11 - (std::norm(beta) + 1.0)) < 5e-3);
}

}  // TEST_SUITE
