#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <numbers>
#include <numeric>
#include <random>

#include "coalinla/coalescent.hpp"
#include "coalinla/genealogy.hpp"
#include "coalinla/likelihood.hpp"
#include "coalinla/simulate.hpp"
#include "oracles.hpp"

using namespace coalinla;

namespace {

CoalescentData three_tip() { return make_coalescent_data({0.5, 1.5}, {0.0, 0.0, 0.0}); }

// Integral of C_k(t) over [0, root] by brute force lineage counting on a fine mesh
// of breakpoints.
double total_exposure_oracle(const CoalescentData& d) {
  std::vector<double> points = d.sample_ages;
  points.insert(points.end(), d.coal_ages.begin(), d.coal_ages.end());
  std::sort(points.begin(), points.end());
  double total = 0.0;
  for (std::size_t i = 0; i + 1 < points.size(); ++i) {
    const double a = points[i];
    const double b = points[i + 1];
    if (b <= a) continue;
    const int k = d.lineages_at(0.5 * (a + b));
    total += 0.5 * k * (k - 1) * (b - a);
  }
  return total;
}

}  // namespace

TEST_CASE("cggp cells on isochronous three-tip data") {
  const auto c = build_cells_cggp(three_tip());
  REQUIRE(c.size() == 2);
  CHECK(c.boundaries == std::vector<double>{0.0, 0.5, 1.5});
  CHECK(c.midpoints == std::vector<double>{0.25, 1.0});
  CHECK(c.events == std::vector<int>{1, 1});
  CHECK(c.exposure[0] == doctest::Approx(1.5).epsilon(1e-14));
  CHECK(c.exposure[1] == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(c.log_const == doctest::Approx(std::log(3.0)).epsilon(1e-14));
}

TEST_CASE("cggp single cell for two tips") {
  const auto c = build_cells_cggp(make_coalescent_data({2.0}, {0.0, 0.0}));
  REQUIRE(c.size() == 1);
  CHECK(c.exposure[0] == 2.0);
  CHECK(c.events[0] == 1);
  CHECK(c.log_const == 0.0);
}

TEST_CASE("cggp exposure splits at sampling ages") {
  const auto c = build_cells_cggp(make_coalescent_data({2.0, 3.0}, {0.0, 0.0, 1.0}));
  REQUIRE(c.size() == 2);
  CHECK(c.exposure[0] == doctest::Approx(4.0).epsilon(1e-14));
  CHECK(c.exposure[1] == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(c.events == std::vector<int>{1, 1});
  CHECK(c.log_const == doctest::Approx(std::log(3.0)).epsilon(1e-14));
}

TEST_CASE("rggp cells") {
  SUBCASE("two tips") {
    const auto c = build_cells_rggp(make_coalescent_data({2.0}, {0.0, 0.0}), 2);
    CHECK(c.boundaries == std::vector<double>{0.0, 1.0, 2.0});
    CHECK(c.exposure[0] == doctest::Approx(1.0));
    CHECK(c.exposure[1] == doctest::Approx(1.0));
    CHECK(c.events == std::vector<int>{0, 1});
  }
  SUBCASE("three tips") {
    const auto c = build_cells_rggp(three_tip(), 3);
    CHECK(c.exposure[0] == doctest::Approx(1.5).epsilon(1e-14));
    CHECK(c.exposure[1] == doctest::Approx(0.5).epsilon(1e-14));
    CHECK(c.exposure[2] == doctest::Approx(0.5).epsilon(1e-14));
    CHECK(c.events == std::vector<int>{1, 0, 1});
    CHECK(c.midpoints[1] == doctest::Approx(0.75));
  }
  SUBCASE("too few cells") {
    CHECK_THROWS_AS(build_cells_rggp(three_tip(), 1), std::invalid_argument);
  }
}

TEST_CASE("explicit boundaries are validated") {
  CHECK_THROWS_AS(build_cells(three_tip(), {0.0}), std::invalid_argument);
  CHECK_THROWS_AS(build_cells(three_tip(), {0.1, 1.5}), std::invalid_argument);
  CHECK_THROWS_AS(build_cells(three_tip(), {0.0, 1.0}), std::invalid_argument);
  CHECK_THROWS_AS(build_cells(three_tip(), {0.0, 1.0, 1.0, 1.5}), std::invalid_argument);
}

TEST_CASE("exposure conservation over refinements") {
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    const auto g = simulate(Trajectory::constant(1.0), {{0.0, 15}, {0.2, 5}, {0.7, 5}}, seed);
    const auto d = extract_coalescent_data(g);
    const double expected = total_exposure_oracle(d);
    CHECK(build_cells_cggp(d).total_exposure() == doctest::Approx(expected).epsilon(1e-12));
    for (const int b : {2, 7, 100, 1000}) {
      const auto c = build_cells_rggp(d, b);
      CHECK(c.total_exposure() == doctest::Approx(expected).epsilon(1e-12));
      CHECK(c.total_events() == static_cast<int>(d.n) - 1);
      for (std::size_t j = 0; j < c.size(); ++j) {
        if (c.exposure[j] == 0.0) CHECK(c.events[j] == 0);
      }
    }
  }
}

TEST_CASE("log likelihood hand values") {
  const auto c = build_cells_cggp(three_tip());
  const std::vector<double> zero{0.0, 0.0};
  CHECK(log_likelihood(c, zero).value == doctest::Approx(-1.401388).epsilon(1e-6));
  const std::vector<double> two{std::log(2.0), std::log(2.0)};
  const double expected = std::log(3.0) - 2.0 * std::log(2.0) - 1.25;
  CHECK(expected == doctest::Approx(-1.537682).epsilon(1e-6));
  CHECK(log_likelihood(c, two).value == doctest::Approx(expected).epsilon(1e-14));
  CHECK(log_likelihood_value(c, two) == doctest::Approx(log_likelihood(c, two).value).epsilon(1e-14));
}

TEST_CASE("log likelihood input errors") {
  const auto c = build_cells_cggp(three_tip());
  const std::vector<double> short_gamma{0.0};
  CHECK_THROWS_AS(log_likelihood(c, short_gamma), std::invalid_argument);
  const std::vector<double> nan_gamma{0.0, std::nan("")};
  CHECK_THROWS_AS(log_likelihood(c, nan_gamma), std::invalid_argument);
}

TEST_CASE("gradient and curvature match finite differences") {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> noise(0.0, 1.0);
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const auto d = extract_coalescent_data(simulate_isochronous(Trajectory::constant(1.0), 30, seed));
    for (const auto& c : {build_cells_cggp(d), build_cells_rggp(d, 40)}) {
      std::vector<double> gamma(c.size());
      for (auto& g : gamma) g = noise(rng);
      const auto lv = log_likelihood(c, gamma);
      for (std::size_t j = 0; j < c.size(); ++j) {
        auto f = [&](double x) {
          auto g = gamma;
          g[j] = x;
          return log_likelihood_value(c, g);
        };
        auto grad = [&](double x) {
          auto g = gamma;
          g[j] = x;
          return log_likelihood(c, g).gradient[j];
        };
        const double fd = oracle::derivative(f, gamma[j], 1e-6);
        const double fd2 = -oracle::derivative(grad, gamma[j], 1e-6);
        CHECK(std::abs(lv.gradient[j] - fd) <= 1e-6 * std::max(1.0, std::abs(fd)));
        CHECK(std::abs(lv.curvature[j] - fd2) <= 1e-6 * std::max(1.0, std::abs(fd2)));
        CHECK(lv.curvature[j] >= 0.0);
      }
    }
  }
}

TEST_CASE("rggp and cggp likelihoods agree on aligned grids") {
  const auto d = extract_coalescent_data(simulate_isochronous(Trajectory::constant(1.0), 12, 5));
  const auto cggp = build_cells_cggp(d);
  // Refine each coalescent interval into three pieces.
  std::vector<double> boundaries{0.0};
  std::vector<std::size_t> parent;
  for (std::size_t j = 0; j < cggp.size(); ++j) {
    const double a = cggp.boundaries[j];
    const double b = cggp.boundaries[j + 1];
    for (int k = 1; k <= 3; ++k) {
      boundaries.push_back(k == 3 ? b : a + (b - a) * k / 3.0);
      parent.push_back(j);
    }
  }
  const auto fine = build_cells(d, boundaries);
  std::mt19937_64 rng(9);
  std::normal_distribution<double> noise(0.0, 1.0);
  std::vector<double> coarse_gamma(cggp.size());
  for (auto& g : coarse_gamma) g = noise(rng);
  std::vector<double> fine_gamma(fine.size());
  for (std::size_t i = 0; i < fine.size(); ++i) fine_gamma[i] = coarse_gamma[parent[i]];
  CHECK(std::abs(log_likelihood_value(cggp, coarse_gamma) - log_likelihood_value(fine, fine_gamma)) < 1e-12);
}

TEST_CASE("maximum likelihood constant size converges to the truth") {
  double acc = 0.0;
  const int replicates = 200;
  for (int r = 0; r < replicates; ++r) {
    const auto c = build_cells_cggp(
        extract_coalescent_data(simulate_isochronous(Trajectory::constant(1.0), 100, 1000 + r)));
    acc += c.total_exposure() / (c.total_events());
  }
  CHECK(std::abs(acc / replicates - 1.0) < 0.05);
}

TEST_CASE("coalescent likelihood adaptor") {
  const auto c = build_cells_cggp(three_tip());
  const CoalescentLikelihood lik(c);
  CHECK(lik.size() == 2);
  const auto init = lik.initial_point();
  CHECK(init[0] == doctest::Approx(std::log(2.5 / 2.0)));
  CHECK(init[1] == init[0]);
  std::vector<double> grad(2), curv(2);
  const std::vector<double> gamma{0.3, -0.2};
  const double v = lik.evaluate(gamma, grad, curv);
  const auto ref = log_likelihood(c, gamma);
  CHECK(v == doctest::Approx(ref.value));
  CHECK(grad[0] == doctest::Approx(ref.gradient[0]));
  CHECK(curv[1] == doctest::Approx(ref.curvature[1]));
  CHECK(lik.informative(0));
}

TEST_CASE("gaussian likelihood adaptor") {
  const GaussianLikelihood lik({1.0, 2.0}, {0.5, 2.0});
  const std::vector<double> gamma{0.0, 1.0};
  std::vector<double> grad(2), curv(2);
  const double v = lik.evaluate(gamma, grad, curv);
  const double normalizer = -0.5 * (std::log(2.0 * std::numbers::pi * 0.5) + std::log(2.0 * std::numbers::pi * 2.0));
  CHECK(v == doctest::Approx(-0.5 * (1.0 / 0.5 + 1.0 / 2.0) + normalizer));
  CHECK(grad[0] == doctest::Approx(2.0));
  CHECK(grad[1] == doctest::Approx(0.5));
  CHECK(curv[0] == doctest::Approx(2.0));
  CHECK(curv[1] == doctest::Approx(0.5));
  CHECK_THROWS_AS(GaussianLikelihood({1.0}, {0.0}), std::invalid_argument);
  CHECK_THROWS_AS(GaussianLikelihood({1.0, 2.0}, {1.0}), std::invalid_argument);
}
