#pragma once

#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "coalinla/coalescent.hpp"
#include "coalinla/gmrf.hpp"
#include "coalinla/likelihood.hpp"
#include "coalinla/mixture.hpp"

namespace coalinla {

// Gamma(alpha, beta) prior on the GMRF precision, shape-rate convention.
struct TauPrior {
  double alpha = 0.001;
  double beta = 0.001;

  double log_density(double tau) const;
};

// Failure inside the inference pipeline; `stage()` names the step that failed.
class InferenceError : public std::runtime_error {
 public:
  InferenceError(std::string stage, const std::string& what);
  const std::string& stage() const { return stage_; }

 private:
  std::string stage_;
};

// Gaussian approximation of p(gamma | tau, data) around its mode.
struct ModeResult {
  std::vector<double> gamma_star;
  std::vector<double> curvature;  // likelihood curvature c at the mode
  TriFactor precision_factor;     // Cholesky factor of tau S + diag(c)
  double log_likelihood = 0.0;
  double quadratic_form = 0.0;    // gamma*' S gamma*
  double log_joint = 0.0;         // log_likelihood - tau / 2 * quadratic_form
  int iterations = 0;
  bool converged = false;
};

inline constexpr int kMaxNewtonIterations = 50;
inline constexpr int kMaxStepHalvings = 30;
inline constexpr double kGradientTolerance = 1e-8;
inline constexpr double kLocalDecrement = 1e-10;

// Newton-Raphson with step halving on psi(gamma) = log L(gamma) - tau/2 gamma' S gamma.
// Converged when max |gradient| < kGradientTolerance, or when full Newton steps in
// the local region stop reducing the gradient (round-off floor).
// Throws InferenceError("mode finding", ...) on a singular precision or when the
// iteration does not converge.
ModeResult find_mode(const LatentLikelihood& likelihood, const StructureMatrix& s, double tau,
                     std::optional<std::span<const double>> init = std::nullopt);

struct TauPosterior {
  double log_density = 0.0;  // unnormalized log density of tau (not of log tau)
  ModeResult mode;
};

// Laplace approximation of p(tau | data): joint at the mode divided by the Gaussian
// approximation evaluated at its own mode.
TauPosterior log_tau_posterior(const LatentLikelihood& likelihood, const StructureMatrix& s,
                               const TauPrior& prior, double tau,
                               std::optional<std::span<const double>> init = std::nullopt);

// Quadrature grid over theta = log tau.
struct TauGrid {
  std::vector<double> log_tau_values;  // increasing
  std::vector<double> log_densities;   // unnormalized log density of theta
  std::vector<double> weights;         // trapezoid weights, sum to 1
  double mode_log_tau = 0.0;
  double sd_log_tau = 0.0;             // from the curvature at the mode
  bool monotone = true;                // densities fall away from the mode on both sides
};

inline constexpr double kGridStepInSd = 0.5;
inline constexpr double kGridDrop = 5.0;
inline constexpr int kGridMaxPointsPerSide = 35;

TauGrid explore_tau(const LatentLikelihood& likelihood, const StructureMatrix& s, const TauPrior& prior);

enum class Strategy { gaussian, laplace };

const char* to_string(Strategy s);

struct PosteriorSummary {
  std::vector<double> times;  // cell midpoints
  std::vector<double> median;
  std::vector<double> lower95;
  std::vector<double> upper95;
  std::vector<double> mean;
  std::vector<double> mean_natural;  // E[N_e] = E[exp(gamma)]
  std::vector<bool> prior_only;  // cells whose marginal is driven by the smoothing prior alone
  TauGrid tau_grid;
  Strategy strategy = Strategy::gaussian;
};

// Laplace strategy knots, in standard deviations of the Gaussian approximation:
// spaced kLaplaceStep apart and extended on each side until the log marginal has
// dropped by kLaplaceDrop or kLaplaceMaxHalfWidth is reached.
inline constexpr double kLaplaceStep = 1.0 / 3.0;
inline constexpr double kLaplaceDrop = 12.5;
inline constexpr double kLaplaceMaxHalfWidth = 10.0;

// Marginal of every gamma_i as a tau-grid mixture of per-tau conditionals.
std::vector<MarginalMixture> latent_mixtures(const LatentLikelihood& likelihood, const StructureMatrix& s,
                                             const TauGrid& grid, Strategy strategy);

PosteriorSummary latent_marginals(const LatentLikelihood& likelihood, const StructureMatrix& s,
                                  std::span<const double> times, const TauGrid& grid, Strategy strategy);

struct ModelOptions {
  Strategy strategy = Strategy::gaussian;
  TauPrior tau_prior;
};

// rw1 on the cell midpoints, or the rank-0 structure for a single cell.
StructureMatrix structure_for(const CellStats& cells);

PosteriorSummary infer(const CellStats& cells, const ModelOptions& options = {});

}  // namespace coalinla
