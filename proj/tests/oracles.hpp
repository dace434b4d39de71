#pragma once

// Independent reference computations used only by the tests: dense linear algebra
// through Eigen and numerical quadrature through Boost.

#include <Eigen/Dense>
#include <boost/math/distributions/normal.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/special_functions/gamma.hpp>
#include <boost/math/tools/roots.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <span>
#include <vector>

#include "coalinla/coalescent.hpp"
#include "coalinla/gmrf.hpp"

namespace oracle {

inline Eigen::MatrixXd dense_tridiagonal(std::span<const double> diag, std::span<const double> off) {
  const auto n = static_cast<Eigen::Index>(diag.size());
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(n, n);
  for (Eigen::Index i = 0; i < n; ++i) m(i, i) = diag[i];
  for (Eigen::Index i = 0; i + 1 < n; ++i) m(i, i + 1) = m(i + 1, i) = off[i];
  return m;
}

inline Eigen::MatrixXd dense(const coalinla::StructureMatrix& s) { return dense_tridiagonal(s.diag, s.offdiag); }

inline Eigen::VectorXd to_eigen(std::span<const double> v) {
  return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

inline double log_gamma_density(double x, double shape, double rate) {
  return shape * std::log(rate) - std::lgamma(shape) + (shape - 1.0) * std::log(x) - rate * x;
}

// Exact posterior for y_i ~ N(gamma_i, v_i), gamma ~ intrinsic N(0, (tau S)^-),
// tau ~ Gamma(alpha, beta), all through dense Eigen algebra.
struct GaussianModel {
  Eigen::VectorXd y;
  Eigen::VectorXd v;
  Eigen::MatrixXd s;
  double rank = 0.0;
  double alpha = 0.001;
  double beta = 0.001;

  Eigen::MatrixXd precision(double tau) const {
    Eigen::MatrixXd q = tau * s;
    q.diagonal() += v.cwiseInverse();
    return q;
  }

  // Unnormalized log density of tau.
  double log_tau_density(double tau) const {
    const Eigen::VectorXd b = y.cwiseQuotient(v);
    const Eigen::LDLT<Eigen::MatrixXd> q(precision(tau));
    const double logdet = q.vectorD().array().log().sum();
    const double quad = y.dot(b) - b.dot(q.solve(b));
    return log_gamma_density(tau, alpha, beta) + 0.5 * rank * std::log(tau) - 0.5 * logdet - 0.5 * quad;
  }

  Eigen::VectorXd conditional_mean(double tau) const {
    return precision(tau).ldlt().solve(y.cwiseQuotient(v));
  }

  Eigen::VectorXd conditional_variance(double tau) const {
    const auto n = y.size();
    return precision(tau).ldlt().solve(Eigen::MatrixXd::Identity(n, n)).diagonal();
  }
};

// Quantile of a finite Gaussian mixture by bracketing root search on its CDF.
inline double mixture_quantile(const std::vector<double>& weights, const std::vector<double>& means,
                               const std::vector<double>& sds, double p) {
  auto cdf = [&](double x) {
    double acc = 0.0;
    for (std::size_t g = 0; g < weights.size(); ++g) {
      acc += weights[g] * boost::math::cdf(boost::math::normal(means[g], sds[g]), x);
    }
    return acc - p;
  };
  double lo = std::numeric_limits<double>::infinity();
  double hi = -lo;
  for (std::size_t g = 0; g < weights.size(); ++g) {
    lo = std::min(lo, means[g] - 15.0 * sds[g]);
    hi = std::max(hi, means[g] + 15.0 * sds[g]);
  }
  const auto root = boost::math::tools::bisect(cdf, lo, hi, boost::math::tools::eps_tolerance<double>(50));
  return 0.5 * (root.first + root.second);
}

template <class F>
double integrate(F f, double a, double b, double tolerance = 1e-13, unsigned max_depth = 15) {
  return boost::math::quadrature::gauss_kronrod<double, 61>::integrate(f, a, b, max_depth, tolerance);
}

// Central finite difference.
template <class F>
double derivative(F f, double x, double h) {
  return (f(x + h) - f(x - h)) / (2.0 * h);
}

// Posterior probabilities of gamma_cell over consecutive bins for a two-cell
// coalescent model, with tau integrated out analytically:
// p(gamma) is proportional to L(gamma) (beta + gamma' S gamma / 2)^-(alpha + rank / 2).
// The last entry is the mass outside [edges.front(), edges.back()].
inline std::vector<double> two_cell_marginal(const coalinla::CellStats& cells, const coalinla::StructureMatrix& s,
                                             double alpha, double beta, std::size_t cell,
                                             const std::vector<double>& edges) {
  using boost::math::quadrature::gauss_kronrod;
  const double shape = alpha + 0.5 * static_cast<double>(s.rank);
  auto log_post = [&](double g0, double g1) {
    const std::vector<double> g{g0, g1};
    double v = 0.0;
    for (std::size_t j = 0; j < 2; ++j) v += -cells.events[j] * g[j] - cells.exposure[j] * std::exp(-g[j]);
    return v - shape * std::log(beta + 0.5 * s.quadratic_form(g));
  };
  double centre[2];
  for (std::size_t j = 0; j < 2; ++j) centre[j] = std::log(cells.exposure[j] / cells.events[j]);
  const double ref = log_post(centre[0], centre[1]);
  auto joint = [&](double x, double other) {
    const double v = cell == 0 ? log_post(x, other) : log_post(other, x);
    return std::exp(v - ref);
  };
  // The structure term peaks sharply on the diagonal, so the inner integral is split
  // there. Beyond 10 log units below or 40 above, the integrand is negligible.
  auto marginal = [&](double x) {
    auto f = [&](double o) { return joint(x, o); };
    const double a = std::min(x, centre[1 - cell]);
    const double b = std::max(x, centre[1 - cell]);
    double acc = gauss_kronrod<double, 61>::integrate(f, a - 10.0, a, 10, 1e-10);
    if (b > a) acc += gauss_kronrod<double, 61>::integrate(f, a, b, 10, 1e-10);
    acc += gauss_kronrod<double, 61>::integrate(f, b, b + 40.0, 10, 1e-10);
    return acc;
  };
  // Composite Simpson on each bin; the marginal is smooth once the other cell is integrated out.
  constexpr int kPanels = 8;
  std::vector<double> out;
  double inside = 0.0;
  double left = marginal(edges.front());
  for (std::size_t k = 0; k + 1 < edges.size(); ++k) {
    const double h = (edges[k + 1] - edges[k]) / kPanels;
    double acc = left;
    for (int m = 1; m < kPanels; ++m) acc += (m % 2 == 1 ? 4.0 : 2.0) * marginal(edges[k] + m * h);
    const double right = marginal(edges[k + 1]);
    acc += right;
    out.push_back(acc * h / 3.0);
    inside += out.back();
    left = right;
  }
  const double outside = gauss_kronrod<double, 31>::integrate(marginal, edges.front() - 10.0, edges.front(), 5, 1e-8) +
                         gauss_kronrod<double, 31>::integrate(marginal, edges.back(), edges.back() + 40.0, 5, 1e-8);
  const double total = inside + outside;
  for (auto& p : out) p /= total;
  out.push_back(outside / total);
  return out;
}

// Total variation between binned sample frequencies and reference bin probabilities
// (both with a trailing outside-mass entry).
inline double total_variation(const std::vector<double>& samples, const std::vector<double>& edges,
                              const std::vector<double>& reference) {
  std::vector<double> freq(edges.size(), 0.0);
  for (const double x : samples) {
    const auto it = std::upper_bound(edges.begin(), edges.end(), x);
    if (it == edges.begin() || it == edges.end()) {
      freq.back() += 1.0;
    } else {
      freq[static_cast<std::size_t>(it - edges.begin()) - 1] += 1.0;
    }
  }
  double tv = 0.0;
  for (std::size_t k = 0; k < freq.size(); ++k) tv += std::abs(freq[k] / samples.size() - reference[k]);
  return 0.5 * tv;
}

}  // namespace oracle
