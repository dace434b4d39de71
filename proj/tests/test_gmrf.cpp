#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <Eigen/Eigenvalues>

#include <cmath>
#include <numbers>
#include <random>

#include "coalinla/gmrf.hpp"
#include "oracles.hpp"

using namespace coalinla;

namespace {

std::vector<double> random_midpoints(std::mt19937_64& rng, std::size_t n) {
  std::uniform_real_distribution<double> step(0.01, 2.0);
  std::vector<double> m(n);
  double t = 0.0;
  for (auto& x : m) x = (t += step(rng));
  return m;
}

// Random diagonally dominant symmetric tridiagonal matrix.
std::pair<std::vector<double>, std::vector<double>> random_spd(std::mt19937_64& rng, std::size_t n) {
  std::uniform_real_distribution<double> off(-1.0, 1.0);
  std::uniform_real_distribution<double> extra(0.01, 3.0);
  std::vector<double> o(n - 1);
  for (auto& x : o) x = off(rng);
  std::vector<double> d(n);
  for (std::size_t i = 0; i < n; ++i) {
    d[i] = extra(rng) + (i > 0 ? std::abs(o[i - 1]) : 0.0) + (i + 1 < n ? std::abs(o[i]) : 0.0);
  }
  return {d, o};
}

}  // namespace

TEST_CASE("rw1 on a regular grid") {
  const std::vector<double> m{0.0, 1.0, 2.0};
  const auto s = build_rw1(m);
  CHECK(s.dim == 3);
  CHECK(s.diag == std::vector<double>{1.0, 2.0, 1.0});
  CHECK(s.offdiag == std::vector<double>{-1.0, -1.0});
  CHECK(s.rank == 2);
  std::vector<double> ones(3, 1.0), out(3);
  s.multiply(ones, out);
  for (const double v : out) CHECK(v == 0.0);
  // Nonzero eigenvalues of this Laplacian are 1 and 3.
  CHECK(s.log_gdet == doctest::Approx(std::log(3.0)).epsilon(1e-14));
}

TEST_CASE("rw1 on an irregular grid") {
  const std::vector<double> m{0.0, 0.5, 2.5};
  const auto s = build_rw1(m);
  CHECK(s.diag[0] == doctest::Approx(2.0));
  CHECK(s.diag[1] == doctest::Approx(2.5));
  CHECK(s.diag[2] == doctest::Approx(0.5));
  CHECK(s.offdiag[0] == doctest::Approx(-2.0));
  CHECK(s.offdiag[1] == doctest::Approx(-0.5));
}

TEST_CASE("rw1 input errors") {
  CHECK_THROWS_AS(build_rw1(std::vector<double>{1.0}), std::invalid_argument);
  CHECK_THROWS_AS(build_rw1(std::vector<double>{0.0, 1.0, 1.0}), std::invalid_argument);
  CHECK_THROWS_AS(build_rw1(std::vector<double>{0.0, 2.0, 1.0}), std::invalid_argument);
}

TEST_CASE("rw1 spectrum and generalized determinant against a dense eigensolver") {
  std::mt19937_64 rng(11);
  for (const std::size_t n : {2u, 3u, 5u, 17u, 60u}) {
    const auto m = random_midpoints(rng, n);
    const auto s = build_rw1(m);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(oracle::dense(s));
    const auto& ev = eig.eigenvalues();
    CHECK(std::abs(ev(0)) < 1e-10);
    CHECK(ev(1) > 1e-10);
    double log_gdet = 0.0;
    for (Eigen::Index i = 1; i < ev.size(); ++i) log_gdet += std::log(ev(i));
    CHECK(s.log_gdet == doctest::Approx(log_gdet).epsilon(1e-9));
    // Closed form for a weighted path: n * prod of edge weights.
    double closed = std::log(static_cast<double>(n));
    for (std::size_t i = 0; i + 1 < n; ++i) closed += std::log(1.0 / (m[i + 1] - m[i]));
    CHECK(s.log_gdet == doctest::Approx(closed).epsilon(1e-12));
  }
}

TEST_CASE("rw1 is symmetric, annihilates constants and is PSD") {
  std::mt19937_64 rng(12);
  std::normal_distribution<double> noise(0.0, 1.0);
  for (int trial = 0; trial < 10; ++trial) {
    const auto s = build_rw1(random_midpoints(rng, 40));
    const auto dense = oracle::dense(s);
    CHECK((dense - dense.transpose()).norm() == 0.0);
    CHECK((dense * Eigen::VectorXd::Ones(40)).cwiseAbs().maxCoeff() < 1e-10);
    for (int v = 0; v < 1000; ++v) {
      std::vector<double> x(40);
      for (auto& e : x) e = noise(rng);
      const auto xe = oracle::to_eigen(x);
      const double rq = xe.dot(dense * xe);
      CHECK(rq > -1e-10);
      CHECK(s.quadratic_form(x) == doctest::Approx(rq).epsilon(1e-10));
    }
  }
}

TEST_CASE("gmrf log density examples") {
  const auto s = build_rw1(std::vector<double>{0.0, 1.0});
  const std::vector<double> zero{0.0, 0.0};
  for (const double tau : {0.1, 1.0, 7.0}) {
    CHECK(gmrf_logdensity(s, tau, zero) ==
          doctest::Approx(0.5 * std::log(tau) + 0.5 * s.log_gdet - 0.5 * std::log(2.0 * std::numbers::pi)));
  }
  const std::vector<double> step{0.0, 1.0};
  CHECK(s.quadratic_form(step) == 1.0);
  CHECK(gmrf_logdensity(s, 2.0, step) - gmrf_logdensity(s, 2.0, zero) == doctest::Approx(-1.0));
  CHECK_THROWS_AS(gmrf_logdensity(s, 0.0, zero), std::invalid_argument);
  CHECK_THROWS_AS(gmrf_logdensity(s, 1.0, std::vector<double>{0.0}), std::invalid_argument);
}

TEST_CASE("gmrf log density is shift invariant") {
  std::mt19937_64 rng(13);
  std::normal_distribution<double> noise(0.0, 1.0);
  const auto s = build_rw1(random_midpoints(rng, 30));
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<double> g(30);
    for (auto& e : g) e = noise(rng);
    auto shifted = g;
    for (auto& e : shifted) e += 5.0;
    CHECK(std::abs(gmrf_logdensity(s, 3.0, g) - gmrf_logdensity(s, 3.0, shifted)) < 1e-12);
  }
}

TEST_CASE("gmrf density integrates to one on the sum-to-zero subspace") {
  // Parametrize the subspace by an orthonormal basis U of 1-perp; the density is a
  // Gaussian in the coordinates with precision tau U' S U.
  std::mt19937_64 rng(14);
  for (const std::size_t n : {2u, 3u}) {
    const auto s = build_rw1(random_midpoints(rng, n));
    const double tau = 1.7;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(oracle::dense(s));
    const Eigen::MatrixXd u = eig.eigenvectors().rightCols(static_cast<Eigen::Index>(n - 1));
    const Eigen::MatrixXd q = tau * u.transpose() * oracle::dense(s) * u;
    // log of the normalizing constant of exp(-x'Qx/2) in n-1 dimensions.
    const double log_z = 0.5 * (n - 1) * std::log(2.0 * std::numbers::pi) - 0.5 * std::log(q.determinant());
    std::vector<double> zero(n, 0.0);
    CHECK(gmrf_logdensity(s, tau, zero) + log_z == doctest::Approx(0.0).epsilon(1e-12).scale(1.0));
  }
  // Also by brute force for n = 2: integrate along the direction (1, -1) / sqrt 2.
  const auto s = build_rw1(std::vector<double>{0.0, 0.4});
  const double tau = 0.8;
  const double mass = oracle::integrate(
      [&](double x) {
        const std::vector<double> g{x / std::numbers::sqrt2, -x / std::numbers::sqrt2};
        return std::exp(gmrf_logdensity(s, tau, g));
      },
      -40.0, 40.0);
  CHECK(mass == doctest::Approx(1.0).epsilon(1e-10));
}

TEST_CASE("tridiagonal factorization examples") {
  const std::vector<double> id_diag{1.0, 1.0}, id_off{0.0};
  const auto f = tri_cholesky(id_diag, id_off);
  CHECK(f.log_det == 0.0);
  CHECK(tri_solve(f, std::vector<double>{3.0, -1.0}) == std::vector<double>{3.0, -1.0});

  const std::vector<double> d{2.0, 2.0}, o{-1.0};
  const auto g = tri_cholesky(d, o);
  const auto x = tri_solve(g, std::vector<double>{1.0, 0.0});
  CHECK(x[0] == doctest::Approx(2.0 / 3.0).epsilon(1e-15));
  CHECK(x[1] == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
  CHECK(g.log_det == doctest::Approx(std::log(3.0)).epsilon(1e-15));
  CHECK(tri_log_det(d, o) == doctest::Approx(std::log(3.0)).epsilon(1e-15));
  const auto inv = tri_inverse_diag(g);
  CHECK(inv[0] == doctest::Approx(2.0 / 3.0).epsilon(1e-15));
  CHECK(inv[1] == doctest::Approx(2.0 / 3.0).epsilon(1e-15));
}

TEST_CASE("tridiagonal factorization reports the failing pivot") {
  const std::vector<double> d{1.0, 1.0, -1.0}, o{0.5, 0.5};
  try {
    tri_cholesky(d, o);
    FAIL("expected NotPositiveDefinite");
  } catch (const NotPositiveDefinite& e) {
    CHECK(e.index() == 2);
  }
  CHECK_THROWS_AS(tri_log_det(d, o), NotPositiveDefinite);
  CHECK_THROWS_AS(tri_cholesky(std::vector<double>{1.0, 1.0}, std::vector<double>{}), std::invalid_argument);
}

TEST_CASE("tridiagonal routines against dense oracles") {
  std::mt19937_64 rng(15);
  std::normal_distribution<double> noise(0.0, 1.0);
  for (const std::size_t n : {1u, 2u, 5u, 50u, 100u}) {
    for (int trial = 0; trial < 20; ++trial) {
      const auto [d, o] = random_spd(rng, n);
      const auto dense = oracle::dense_tridiagonal(d, o);
      const auto f = tri_cholesky(d, o);
      std::vector<double> rhs(n);
      for (auto& e : rhs) e = noise(rng);
      const auto x = tri_solve(f, rhs);
      const Eigen::VectorXd ref = dense.ldlt().solve(oracle::to_eigen(rhs));
      CHECK((oracle::to_eigen(x) - ref).cwiseAbs().maxCoeff() < 1e-10);
      const Eigen::VectorXd residual = dense * oracle::to_eigen(x) - oracle::to_eigen(rhs);
      CHECK(residual.norm() <= 1e-10 * oracle::to_eigen(rhs).norm());

      const Eigen::MatrixXd inv = dense.inverse();
      const auto diag = tri_inverse_diag(f);
      for (std::size_t i = 0; i < n; ++i) CHECK(std::abs(diag[i] - inv(i, i)) < 1e-10);

      const double log_det = std::log(dense.determinant());
      CHECK(f.log_det == doctest::Approx(log_det).epsilon(1e-12));
      CHECK(tri_log_det(d, o) == doctest::Approx(f.log_det).epsilon(1e-14));

      // L L' reconstructs the input.
      Eigen::MatrixXd l = Eigen::MatrixXd::Zero(n, n);
      for (std::size_t i = 0; i < n; ++i) l(i, i) = f.diag[i];
      for (std::size_t i = 0; i + 1 < n; ++i) l(i + 1, i) = f.sub[i];
      CHECK((l * l.transpose() - dense).norm() <= 1e-12 * dense.norm());

      // Upper solve gives L^{-T} z.
      std::vector<double> z = rhs;
      tri_solve_upper(f, z);
      const Eigen::VectorXd upper = l.transpose().triangularView<Eigen::Upper>().solve(oracle::to_eigen(rhs));
      CHECK((oracle::to_eigen(z) - upper).cwiseAbs().maxCoeff() < 1e-10);
    }
  }
}

TEST_CASE("zero structure") {
  const auto s = StructureMatrix::zero();
  CHECK(s.dim == 1);
  CHECK(s.rank == 0);
  CHECK(s.quadratic_form(std::vector<double>{4.0}) == 0.0);
  CHECK(gmrf_logdensity(s, 2.0, std::vector<double>{1.0}) == 0.0);
}
