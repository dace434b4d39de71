#include "coalinla/likelihood.hpp"

#include <cmath>
#include <numbers>
#include <numeric>
#include <stdexcept>

namespace coalinla {

CoalescentLikelihood::CoalescentLikelihood(CellStats cells) : cells_(std::move(cells)) {}

double CoalescentLikelihood::value(std::span<const double> gamma) const {
  return log_likelihood_value(cells_, gamma);
}

double CoalescentLikelihood::evaluate(std::span<const double> gamma, std::span<double> gradient,
                                      std::span<double> curvature) const {
  double value = cells_.log_const;
  for (std::size_t j = 0; j < gamma.size(); ++j) {
    const double scaled = cells_.exposure[j] > 0.0 ? cells_.exposure[j] * std::exp(-gamma[j]) : 0.0;
    value -= cells_.events[j] * gamma[j] + scaled;
    gradient[j] = scaled - cells_.events[j];
    curvature[j] = scaled;
  }
  return value;
}

void CoalescentLikelihood::curvature(std::span<const double> gamma, std::span<double> out) const {
  for (std::size_t j = 0; j < gamma.size(); ++j) {
    out[j] = cells_.exposure[j] > 0.0 ? cells_.exposure[j] * std::exp(-gamma[j]) : 0.0;
  }
}

std::vector<double> CoalescentLikelihood::initial_point() const {
  const double level = std::log(cells_.total_exposure() / cells_.total_events());
  return std::vector<double>(cells_.size(), level);
}

GaussianLikelihood::GaussianLikelihood(std::vector<double> observations, std::vector<double> variances)
    : observations_(std::move(observations)), variances_(std::move(variances)) {
  if (observations_.empty() || observations_.size() != variances_.size()) {
    throw std::invalid_argument("observations and variances must be non-empty and equally long");
  }
  for (const double v : variances_) {
    if (!(v > 0.0) || !std::isfinite(v)) throw std::invalid_argument("variances must be positive");
  }
}

double GaussianLikelihood::value(std::span<const double> gamma) const {
  double value = 0.0;
  for (std::size_t j = 0; j < gamma.size(); ++j) {
    const double r = observations_[j] - gamma[j];
    value -= 0.5 * (r * r / variances_[j] + std::log(2.0 * std::numbers::pi * variances_[j]));
  }
  return value;
}

double GaussianLikelihood::evaluate(std::span<const double> gamma, std::span<double> gradient,
                                    std::span<double> curvature) const {
  for (std::size_t j = 0; j < gamma.size(); ++j) {
    gradient[j] = (observations_[j] - gamma[j]) / variances_[j];
    curvature[j] = 1.0 / variances_[j];
  }
  return value(gamma);
}

void GaussianLikelihood::curvature(std::span<const double>, std::span<double> out) const {
  for (std::size_t j = 0; j < out.size(); ++j) out[j] = 1.0 / variances_[j];
}

std::vector<double> GaussianLikelihood::initial_point() const {
  const double mean = std::accumulate(observations_.begin(), observations_.end(), 0.0) /
                      static_cast<double>(observations_.size());
  return std::vector<double>(observations_.size(), mean);
}

}  // namespace coalinla
