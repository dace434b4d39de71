#include "coalinla/mixture.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <stdexcept>

#include "coalinla/gmrf.hpp"

namespace coalinla {

namespace {

// 10-point Gauss-Legendre rule on [-1, 1].
constexpr std::array<double, 5> kGaussNodes = {0.1488743389816312, 0.4333953941292472, 0.6794095682990244,
                                               0.8650633666889845, 0.9739065285171717};
constexpr std::array<double, 5> kGaussWeights = {0.2955242247147529, 0.2692667193099963, 0.2190863625159820,
                                                 0.1494513491505806, 0.0666713443086881};

double phi(double z) { return std::exp(-0.5 * z * z) / std::sqrt(2.0 * std::numbers::pi); }

// log(Phi(x) / phi(x)), stable far into the lower tail.
double log_mills(double x) {
  if (x > -37.0) return std::log(0.5 * std::erfc(-x / std::numbers::sqrt2)) + 0.5 * x * x + 0.5 * std::log(2.0 * std::numbers::pi);
  const double u = 1.0 / (x * x);
  return -std::log(-x) + std::log1p(u * (-1.0 + u * (3.0 + u * (-15.0 + u * 105.0))));
}

// Integrals of phi(z) exp(r(z)) with r linear of slope s and r(a) = ra, over
// (-inf, a] and [a, inf).
double lower_tail(double ra, double s, double a) { return std::exp(ra + log_mills(a - s)) * phi(a); }
double upper_tail(double ra, double s, double a) { return std::exp(ra + log_mills(s - a)) * phi(a); }

// Integrals of z phi(z) exp(r(z)) over the same ranges.
double lower_tail_moment(double ra, double s, double a) { return s * lower_tail(ra, s, a) - std::exp(ra) * phi(a); }
double upper_tail_moment(double ra, double s, double a) { return s * upper_tail(ra, s, a) + std::exp(ra) * phi(a); }

}  // namespace

double standard_normal_cdf(double z) { return 0.5 * std::erfc(-z / std::numbers::sqrt2); }

MarginalComponent MarginalComponent::gaussian(double mean, double sd) {
  if (!(sd > 0.0) || !std::isfinite(sd) || !std::isfinite(mean)) {
    throw std::invalid_argument("marginal component needs finite mean and positive sd");
  }
  MarginalComponent c;
  c.mean_ = mean;
  c.sd_ = sd;
  return c;
}

MarginalComponent MarginalComponent::corrected(double mean, double sd, std::vector<double> knots,
                                               std::vector<double> correction) {
  MarginalComponent c = gaussian(mean, sd);
  const std::size_t k = knots.size();
  if (k < 3 || correction.size() != k) throw std::invalid_argument("corrected marginal needs >= 3 knots");
  for (const double r : correction) {
    if (!std::isfinite(r)) throw std::invalid_argument("non-finite marginal evaluation");
  }
  c.knots_ = std::move(knots);
  c.r_ = std::move(correction);
  const double shift = *std::max_element(c.r_.begin(), c.r_.end());
  for (auto& r : c.r_) r -= shift;

  // Natural spline: interior second derivatives solve a (4, 1) tridiagonal system.
  const double h = c.knots_[1] - c.knots_[0];
  c.second_.assign(k, 0.0);
  if (k > 2) {
    std::vector<double> diag(k - 2, 4.0);
    std::vector<double> off(k - 3, 1.0);
    std::vector<double> rhs(k - 2);
    for (std::size_t i = 1; i + 1 < k; ++i) {
      rhs[i - 1] = 6.0 * (c.r_[i + 1] - 2.0 * c.r_[i] + c.r_[i - 1]) / (h * h);
    }
    const auto m = tri_solve(tri_cholesky(diag, off), rhs);
    std::copy(m.begin(), m.end(), c.second_.begin() + 1);
  }
  c.left_slope_ = (c.r_[1] - c.r_[0]) / h - h * c.second_[1] / 6.0;
  c.right_slope_ = (c.r_[k - 1] - c.r_[k - 2]) / h + h * c.second_[k - 2] / 6.0;

  const double z0 = c.knots_.front();
  const double zk = c.knots_.back();
  c.cumulative_.resize(k);
  c.cumulative_[0] = lower_tail(c.r_.front(), c.left_slope_, z0);
  double first_moment = lower_tail_moment(c.r_.front(), c.left_slope_, z0);
  for (std::size_t i = 0; i + 1 < k; ++i) {
    c.cumulative_[i + 1] = c.cumulative_[i] + c.segment_integral(c.knots_[i], c.knots_[i + 1], [](double) { return 1.0; });
    first_moment += c.segment_integral(c.knots_[i], c.knots_[i + 1], [](double z) { return z; });
  }
  first_moment += upper_tail_moment(c.r_.back(), c.right_slope_, zk);
  c.total_ = c.cumulative_.back() + upper_tail(c.r_.back(), c.right_slope_, zk);
  if (!std::isfinite(c.total_) || !(c.total_ > 0.0)) throw std::invalid_argument("marginal correction is not normalizable");
  c.mean_z_ = first_moment / c.total_;
  return c;
}

double MarginalComponent::correction_at(double z) const {
  if (z <= knots_.front()) return r_.front() + left_slope_ * (z - knots_.front());
  if (z >= knots_.back()) return r_.back() + right_slope_ * (z - knots_.back());
  const double h = knots_[1] - knots_[0];
  const auto i = std::min(static_cast<std::size_t>((z - knots_.front()) / h), knots_.size() - 2);
  const double t = (z - knots_[i]) / h;
  const double u = 1.0 - t;
  return u * r_[i] + t * r_[i + 1] + h * h / 6.0 * ((u * u * u - u) * second_[i] + (t * t * t - t) * second_[i + 1]);
}

template <class Weight>
double MarginalComponent::segment_integral(double a, double b, Weight weight) const {
  const double mid = 0.5 * (a + b);
  const double half = 0.5 * (b - a);
  double sum = 0.0;
  for (std::size_t q = 0; q < kGaussNodes.size(); ++q) {
    for (const double sign : {-1.0, 1.0}) {
      const double z = mid + sign * half * kGaussNodes[q];
      const double f = phi(z) * std::exp(correction_at(z));
      sum += kGaussWeights[q] * f * weight(z);
    }
  }
  return sum * half;
}

double MarginalComponent::mean_exp() const {
  const double half_var = 0.5 * sd_ * sd_;
  if (knots_.empty()) return std::exp(mean_ + half_var);
  const double z0 = knots_.front();
  const double zk = knots_.back();
  double acc = lower_tail(r_.front() + sd_ * z0, left_slope_ + sd_, z0) +
               upper_tail(r_.back() + sd_ * zk, right_slope_ + sd_, zk);
  for (std::size_t i = 0; i + 1 < knots_.size(); ++i) {
    acc += segment_integral(knots_[i], knots_[i + 1], [this](double z) { return std::exp(sd_ * z); });
  }
  return std::exp(mean_) * acc / total_;
}

double MarginalComponent::mean() const { return knots_.empty() ? mean_ : mean_ + sd_ * mean_z_; }

double MarginalComponent::density(double x) const {
  const double z = (x - mean_) / sd_;
  if (knots_.empty()) return phi(z) / sd_;
  return phi(z) * std::exp(correction_at(z)) / (total_ * sd_);
}

double MarginalComponent::cdf(double x) const {
  const double z = (x - mean_) / sd_;
  if (knots_.empty()) return standard_normal_cdf(z);
  if (z <= knots_.front()) return lower_tail(correction_at(z), left_slope_, z) / total_;
  if (z >= knots_.back()) return 1.0 - upper_tail(correction_at(z), right_slope_, z) / total_;
  const double h = knots_[1] - knots_[0];
  const auto i = std::min(static_cast<std::size_t>((z - knots_.front()) / h), knots_.size() - 2);
  return (cumulative_[i] + segment_integral(knots_[i], z, [](double) { return 1.0; })) / total_;
}

void MarginalMixture::add(double weight, MarginalComponent component) {
  if (!(weight >= 0.0) || !std::isfinite(weight)) throw std::invalid_argument("mixture weight must be >= 0");
  weights_.push_back(weight);
  components_.push_back(std::move(component));
}

double MarginalMixture::cdf(double x) const {
  double out = 0.0;
  for (std::size_t g = 0; g < components_.size(); ++g) out += weights_[g] * components_[g].cdf(x);
  return out;
}

double MarginalMixture::density(double x) const {
  double out = 0.0;
  for (std::size_t g = 0; g < components_.size(); ++g) out += weights_[g] * components_[g].density(x);
  return out;
}

double MarginalMixture::mean() const {
  double out = 0.0;
  for (std::size_t g = 0; g < components_.size(); ++g) out += weights_[g] * components_[g].mean();
  return out;
}

double MarginalMixture::mean_exp() const {
  double out = 0.0;
  for (std::size_t g = 0; g < components_.size(); ++g) out += weights_[g] * components_[g].mean_exp();
  return out;
}

double MarginalMixture::quantile(double p, double tolerance) const {
  if (components_.empty()) throw std::logic_error("quantile of an empty mixture");
  if (!(p > 0.0 && p < 1.0)) throw std::invalid_argument("quantile level must lie in (0, 1)");
  double lo = components_.front().location();
  double hi = lo;
  for (const auto& c : components_) {
    lo = std::min(lo, c.location() - 12.0 * c.scale());
    hi = std::max(hi, c.location() + 12.0 * c.scale());
  }
  for (int expand = 0; expand < 60 && cdf(lo) > p; ++expand) lo -= hi - lo;
  for (int expand = 0; expand < 60 && cdf(hi) < p; ++expand) hi += hi - lo;
  while (hi - lo > tolerance) {
    const double mid = 0.5 * (lo + hi);
    if (mid == lo || mid == hi) break;
    (cdf(mid) < p ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

}  // namespace coalinla
