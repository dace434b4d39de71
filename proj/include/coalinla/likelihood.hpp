#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "coalinla/coalescent.hpp"

namespace coalinla {

// Conditionally independent likelihood over the latent field gamma, one term per cell.
// The INLA engine and the MCMC sampler only see this interface, which lets the
// Gaussian pseudo-likelihood stand in for the coalescent when checking exactness.
class LatentLikelihood {
 public:
  virtual ~LatentLikelihood() = default;

  virtual std::size_t size() const = 0;
  virtual double value(std::span<const double> gamma) const = 0;
  // Returns the value; fills the gradient and curvature (minus the diagonal Hessian).
  virtual double evaluate(std::span<const double> gamma, std::span<double> gradient,
                          std::span<double> curvature) const = 0;
  // Curvature only, at gamma.
  virtual void curvature(std::span<const double> gamma, std::span<double> out) const = 0;
  // Newton starting point.
  virtual std::vector<double> initial_point() const = 0;
  // False when cell j carries no information about gamma_j.
  virtual bool informative(std::size_t j) const = 0;
};

class CoalescentLikelihood final : public LatentLikelihood {
 public:
  explicit CoalescentLikelihood(CellStats cells);

  const CellStats& cells() const { return cells_; }

  std::size_t size() const override { return cells_.size(); }
  double value(std::span<const double> gamma) const override;
  double evaluate(std::span<const double> gamma, std::span<double> gradient,
                  std::span<double> curvature) const override;
  void curvature(std::span<const double> gamma, std::span<double> out) const override;
  // Constant log(sum A / sum y), the maximum-likelihood constant trajectory.
  std::vector<double> initial_point() const override;
  bool informative(std::size_t j) const override { return cells_.exposure[j] > 0.0; }

 private:
  CellStats cells_;
};

// y_j ~ N(gamma_j, variance_j). Its Gaussian approximation is exact, which makes it
// the reference problem for the approximation machinery.
class GaussianLikelihood final : public LatentLikelihood {
 public:
  GaussianLikelihood(std::vector<double> observations, std::vector<double> variances);

  const std::vector<double>& observations() const { return observations_; }
  const std::vector<double>& variances() const { return variances_; }

  std::size_t size() const override { return observations_.size(); }
  double value(std::span<const double> gamma) const override;
  double evaluate(std::span<const double> gamma, std::span<double> gradient,
                  std::span<double> curvature) const override;
  void curvature(std::span<const double> gamma, std::span<double> out) const override;
  std::vector<double> initial_point() const override;
  bool informative(std::size_t) const override { return true; }

 private:
  std::vector<double> observations_;
  std::vector<double> variances_;
};

}  // namespace coalinla
