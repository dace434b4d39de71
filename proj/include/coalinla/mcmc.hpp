#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <vector>

#include "coalinla/coalescent.hpp"
#include "coalinla/gmrf.hpp"
#include "coalinla/inla.hpp"
#include "coalinla/likelihood.hpp"

namespace coalinla {

struct McmcConfig {
  long iterations = 1'000'000;
  long burn_in = 100'000;
  long thin = 100;
  std::uint64_t seed = 1;
  TauPrior tau_prior;

  // Throws std::invalid_argument unless 0 <= burn_in < iterations and thin >= 1.
  void validate() const;
  long kept_draws() const { return (iterations - burn_in) / thin; }
};

struct McmcOutput {
  std::size_t dim = 0;
  std::vector<double> gamma_samples;  // kept draws, row-major (draw, cell)
  std::vector<double> tau_samples;
  double acceptance_rate = 0.0;
  double ess_tau = 0.0;
  long mode_failures = 0;
  std::vector<double> median;
  std::vector<double> lower95;
  std::vector<double> upper95;
  std::vector<double> mean;

  std::size_t draws() const { return tau_samples.size(); }
  double gamma(std::size_t draw, std::size_t cell) const { return gamma_samples[draw * dim + cell]; }
  std::vector<double> cell_trace(std::size_t cell) const;
};

using Rng = std::mt19937_64;

// Conjugate draw tau | gamma ~ Gamma(alpha + rank/2, beta + gamma' S gamma / 2).
double gibbs_tau(std::span<const double> gamma, const StructureMatrix& s, const TauPrior& prior, Rng& rng);

struct BlockUpdate {
  std::vector<double> gamma;
  bool accepted = false;
  double log_ratio = 0.0;          // log acceptance ratio of the proposal
  std::vector<double> mode;        // gamma*(tau), reusable as the next warm start
};

// Metropolis independence update of the whole latent field, proposing from the
// Gaussian approximation N(gamma*(tau), (tau S + diag c)^-1).
BlockUpdate update_gamma_block(const LatentLikelihood& likelihood, const StructureMatrix& s, double tau,
                               std::span<const double> current, Rng& rng,
                               std::optional<std::span<const double>> warm_start = std::nullopt);

// Alternates gibbs_tau and update_gamma_block. Throws InferenceError("mcmc", ...) if
// more than 1% of block updates fail to find the mode.
McmcOutput run_mcmc(const LatentLikelihood& likelihood, const StructureMatrix& s, const McmcConfig& config);
McmcOutput run_mcmc(const CellStats& cells, const McmcConfig& config);

// Initial positive sequence estimator.
double effective_sample_size(std::span<const double> trace);

// Linear-interpolation sample quantile of unsorted data.
double sample_quantile(std::vector<double> values, double p);

}  // namespace coalinla
