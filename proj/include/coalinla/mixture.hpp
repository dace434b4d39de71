#pragma once

#include <span>
#include <vector>

namespace coalinla {

double standard_normal_cdf(double z);

// Univariate density N(mean, sd^2) * exp(r(z)), z = (x - mean) / sd, where r is a
// natural cubic spline through values on equally spaced knots, continued linearly
// outside the knot range. r == 0 gives the plain Gaussian.
class MarginalComponent {
 public:
  static MarginalComponent gaussian(double mean, double sd);
  // `knots` must be equally spaced and increasing; `correction` holds r at the knots.
  static MarginalComponent corrected(double mean, double sd, std::vector<double> knots,
                                     std::vector<double> correction);

  double mean() const;
  // E[exp(X)]
  double mean_exp() const;
  double cdf(double x) const;
  double density(double x) const;
  double location() const { return mean_; }
  double scale() const { return sd_; }

 private:
  double correction_at(double z) const;
  // Integral of phi(z) exp(r(z)) * weight(z) over [a, b] inside one knot interval.
  template <class Weight>
  double segment_integral(double a, double b, Weight weight) const;

  double mean_ = 0.0;
  double sd_ = 1.0;
  std::vector<double> knots_;
  std::vector<double> r_;
  std::vector<double> second_;     // spline second derivatives
  double left_slope_ = 0.0;
  double right_slope_ = 0.0;
  std::vector<double> cumulative_; // unnormalized mass up to each knot, left tail included
  double total_ = 1.0;
  double mean_z_ = 0.0;
};

// Finite mixture of marginal components with nonnegative weights summing to 1.
class MarginalMixture {
 public:
  void add(double weight, MarginalComponent component);

  double cdf(double x) const;
  double density(double x) const;
  double mean() const;
  double mean_exp() const;
  // Bisection on the CDF; the bracket is shrunk to `tolerance` in x.
  double quantile(double p, double tolerance = 1e-10) const;

  std::size_t size() const { return components_.size(); }

 private:
  std::vector<double> weights_;
  std::vector<MarginalComponent> components_;
};

}  // namespace coalinla
