#include "coalinla/mcmc.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace coalinla {

namespace {

// (d' (tau S + diag c) d) for d = a - b
double precision_norm(const StructureMatrix& s, double tau, std::span<const double> curvature,
                      std::span<const double> a, std::span<const double> b, std::vector<double>& diff) {
  diff.resize(a.size());
  double out = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    diff[i] = a[i] - b[i];
    out += curvature[i] * diff[i] * diff[i];
  }
  return out + tau * s.quadratic_form(diff);
}

}  // namespace

void McmcConfig::validate() const {
  if (iterations <= 0) throw std::invalid_argument("iterations must be positive");
  if (burn_in < 0 || burn_in >= iterations) throw std::invalid_argument("burn_in must lie in [0, iterations)");
  if (thin < 1) throw std::invalid_argument("thin must be >= 1");
  if (!(tau_prior.alpha > 0.0) || !(tau_prior.beta > 0.0)) throw std::invalid_argument("tau prior needs alpha, beta > 0");
}

std::vector<double> McmcOutput::cell_trace(std::size_t cell) const {
  std::vector<double> out(draws());
  for (std::size_t d = 0; d < draws(); ++d) out[d] = gamma(d, cell);
  return out;
}

double gibbs_tau(std::span<const double> gamma, const StructureMatrix& s, const TauPrior& prior, Rng& rng) {
  const double shape = prior.alpha + 0.5 * static_cast<double>(s.rank);
  const double rate = prior.beta + 0.5 * s.quadratic_form(gamma);
  std::gamma_distribution<double> draw(shape, 1.0 / rate);
  return draw(rng);
}

BlockUpdate update_gamma_block(const LatentLikelihood& likelihood, const StructureMatrix& s, double tau,
                               std::span<const double> current, Rng& rng,
                               std::optional<std::span<const double>> warm_start) {
  const auto mode = find_mode(likelihood, s, tau, warm_start);
  const std::size_t n = current.size();

  std::normal_distribution<double> normal;
  std::vector<double> proposal(n);
  for (auto& z : proposal) z = normal(rng);
  tri_solve_upper(mode.precision_factor, proposal);
  for (std::size_t i = 0; i < n; ++i) proposal[i] += mode.gamma_star[i];

  std::vector<double> diff;
  auto log_target = [&](std::span<const double> g) {
    return likelihood.value(g) - 0.5 * tau * s.quadratic_form(g);
  };
  auto log_proposal = [&](std::span<const double> g) {
    return -0.5 * precision_norm(s, tau, mode.curvature, g, mode.gamma_star, diff);
  };

  BlockUpdate out;
  out.log_ratio = (log_target(proposal) - log_target(current)) + (log_proposal(current) - log_proposal(proposal));
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  out.accepted = std::log(unif(rng)) < out.log_ratio;
  out.gamma = out.accepted ? std::move(proposal) : std::vector<double>(current.begin(), current.end());
  out.mode = mode.gamma_star;
  return out;
}

McmcOutput run_mcmc(const LatentLikelihood& likelihood, const StructureMatrix& s, const McmcConfig& config) {
  config.validate();
  const std::size_t n = likelihood.size();
  Rng rng(config.seed);

  McmcOutput out;
  out.dim = n;
  const auto kept = static_cast<std::size_t>(config.kept_draws());
  out.gamma_samples.reserve(kept * n);
  out.tau_samples.reserve(kept);

  const auto start = find_mode(likelihood, s, 1.0);
  std::vector<double> gamma = start.gamma_star;
  std::vector<double> warm = gamma;
  double tau = 1.0;
  long accepted = 0;
  const long max_failures = config.iterations / 100;

  for (long it = 0; it < config.iterations; ++it) {
    tau = gibbs_tau(gamma, s, config.tau_prior, rng);
    try {
      auto update = update_gamma_block(likelihood, s, tau, gamma, rng, std::span<const double>(warm));
      if (update.accepted) ++accepted;
      gamma = std::move(update.gamma);
      warm = std::move(update.mode);
    } catch (const InferenceError& e) {
      if (++out.mode_failures > max_failures) {
        throw InferenceError("mcmc", "more than 1% of block updates failed: " + std::string(e.what()));
      }
    }
    if (it >= config.burn_in && (it - config.burn_in + 1) % config.thin == 0) {
      out.gamma_samples.insert(out.gamma_samples.end(), gamma.begin(), gamma.end());
      out.tau_samples.push_back(tau);
    }
  }

  out.acceptance_rate = static_cast<double>(accepted) / static_cast<double>(config.iterations);
  out.ess_tau = effective_sample_size(out.tau_samples);
  out.median.resize(n);
  out.lower95.resize(n);
  out.upper95.resize(n);
  out.mean.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    auto trace = out.cell_trace(i);
    out.mean[i] = trace.empty() ? 0.0 : std::accumulate(trace.begin(), trace.end(), 0.0) / trace.size();
    out.median[i] = sample_quantile(trace, 0.5);
    out.lower95[i] = sample_quantile(trace, 0.025);
    out.upper95[i] = sample_quantile(std::move(trace), 0.975);
  }
  return out;
}

McmcOutput run_mcmc(const CellStats& cells, const McmcConfig& config) {
  const CoalescentLikelihood likelihood(cells);
  return run_mcmc(likelihood, structure_for(cells), config);
}

double effective_sample_size(std::span<const double> trace) {
  const std::size_t n = trace.size();
  if (n < 4) return static_cast<double>(n);
  const double mean = std::accumulate(trace.begin(), trace.end(), 0.0) / n;
  auto autocov = [&](std::size_t lag) {
    double acc = 0.0;
    for (std::size_t t = 0; t + lag < n; ++t) acc += (trace[t] - mean) * (trace[t + lag] - mean);
    return acc / n;
  };
  const double var = autocov(0);
  if (!(var > 0.0)) return static_cast<double>(n);
  double sum = 0.0;
  for (std::size_t m = 0; 2 * m + 1 < n; ++m) {
    const double pair = (autocov(2 * m) + autocov(2 * m + 1)) / var;
    if (pair <= 0.0) break;
    sum += pair;
  }
  const double tau_int = std::max(-1.0 + 2.0 * sum, 1.0 / n);
  return static_cast<double>(n) / tau_int;
}

double sample_quantile(std::vector<double> values, double p) {
  if (values.empty()) return std::nan("");
  std::sort(values.begin(), values.end());
  const double pos = p * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, values.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return values[lo] + frac * (values[hi] - values[lo]);
}

}  // namespace coalinla
