#include "coalinla/inla.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numbers>

namespace coalinla {

namespace {

constexpr double kLog2Pi = 1.8378770664093453;  // log(2 pi)

std::string format_sci(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3g", x);
  return buf;
}

double max_abs(std::span<const double> v) {
  double m = 0.0;
  for (const double x : v) m = std::max(m, std::abs(x));
  return m;
}

TriFactor precision_factor(const StructureMatrix& s, double tau, std::span<const double> curvature) {
  std::vector<double> diag(s.dim);
  std::vector<double> off(s.offdiag.size());
  for (std::size_t i = 0; i < s.dim; ++i) diag[i] = tau * s.diag[i] + curvature[i];
  for (std::size_t i = 0; i < off.size(); ++i) off[i] = tau * s.offdiag[i];
  return tri_cholesky(diag, off);
}

// log det of (tau S + diag(c)) with row and column i removed: two independent tridiagonal blocks.
double log_det_without(const StructureMatrix& s, double tau, std::span<const double> c, std::size_t i,
                       std::vector<double>& diag, std::vector<double>& off) {
  double total = 0.0;
  auto block = [&](std::size_t first, std::size_t last) {
    if (first >= last) return;
    const std::size_t n = last - first;
    diag.resize(n);
    off.resize(n - 1);
    for (std::size_t k = 0; k < n; ++k) diag[k] = tau * s.diag[first + k] + c[first + k];
    for (std::size_t k = 0; k + 1 < n; ++k) off[k] = tau * s.offdiag[first + k];
    total += tri_log_det(diag, off);
  };
  block(0, i);
  block(i + 1, s.dim);
  return total;
}

template <class F>
auto in_stage(const char* stage, F&& f) -> decltype(f()) {
  try {
    return f();
  } catch (const InferenceError&) {
    throw;
  } catch (const std::exception& e) {
    throw InferenceError(stage, e.what());
  }
}

}  // namespace

double TauPrior::log_density(double tau) const {
  return alpha * std::log(beta) - std::lgamma(alpha) + (alpha - 1.0) * std::log(tau) - beta * tau;
}

InferenceError::InferenceError(std::string stage, const std::string& what)
    : std::runtime_error(stage + ": " + what), stage_(std::move(stage)) {}

const char* to_string(Strategy s) { return s == Strategy::gaussian ? "gaussian" : "laplace"; }

ModeResult find_mode(const LatentLikelihood& likelihood, const StructureMatrix& s, double tau,
                     std::optional<std::span<const double>> init) {
  const std::size_t n = likelihood.size();
  if (s.dim != n) throw InferenceError("mode finding", "structure and likelihood dimensions differ");
  if (!(tau > 0.0) || !std::isfinite(tau)) throw InferenceError("mode finding", "tau must be positive");

  std::vector<double> gamma = init ? std::vector<double>(init->begin(), init->end()) : likelihood.initial_point();
  if (gamma.size() != n) throw InferenceError("mode finding", "initial point has the wrong length");

  std::vector<double> gradient(n), curvature(n), s_gamma(n), trial(n);
  auto psi = [&](std::span<const double> g) {
    const double v = likelihood.value(g) - 0.5 * tau * s.quadratic_form(g);
    return std::isnan(v) ? -std::numeric_limits<double>::infinity() : v;
  };

  ModeResult out;
  bool previous_local = false;
  double previous_grad = INFINITY;
  for (int iter = 0; iter <= kMaxNewtonIterations; ++iter) {
    const double ll = likelihood.evaluate(gamma, gradient, curvature);
    s.multiply(gamma, s_gamma);
    for (std::size_t i = 0; i < n; ++i) gradient[i] -= tau * s_gamma[i];
    const double quad = s.quadratic_form(gamma);
    const double current = ll - 0.5 * tau * quad;

    TriFactor factor;
    try {
      factor = precision_factor(s, tau, curvature);
    } catch (const NotPositiveDefinite& e) {
      throw InferenceError("mode finding", std::string("singular precision; ") + e.what());
    }

    const double grad_norm = max_abs(gradient);
    const auto step = tri_solve(factor, gradient);
    // Newton decrement g' H^{-1} g: twice the predicted ascent of the quadratic model.
    double decrement = 0.0;
    for (std::size_t i = 0; i < n; ++i) decrement += gradient[i] * step[i];
    auto finish = [&]() {
      out.gamma_star = gamma;
      out.curvature = curvature;
      out.precision_factor = std::move(factor);
      out.log_likelihood = ll;
      out.quadratic_form = quad;
      out.log_joint = current;
      out.iterations = iter;
      out.converged = true;
      return out;
    };
    // Once the predicted gain is below kLocalDecrement times the magnitude of psi's
    // terms, psi comparisons are dominated by round-off, so full Newton steps are
    // taken and the iteration stops when the gradient no longer shrinks.
    const double magnitude = 1.0 + std::abs(ll) + 0.5 * tau * quad;
    const bool local = 0.5 * decrement <= kLocalDecrement * magnitude;
    if (grad_norm < kGradientTolerance || (local && previous_local && grad_norm >= 0.5 * previous_grad)) {
      return finish();
    }
    if (iter == kMaxNewtonIterations) {
      throw InferenceError("mode finding", "no convergence after " + std::to_string(kMaxNewtonIterations) +
                                               " Newton iterations (max |gradient| = " + format_sci(grad_norm) +
                                               ")");
    }
    previous_local = local;
    previous_grad = grad_norm;

    double scale = 1.0;
    bool accepted = local;
    for (int h = 0; h <= kMaxStepHalvings; ++h, scale *= 0.5) {
      for (std::size_t i = 0; i < n; ++i) trial[i] = gamma[i] + scale * step[i];
      if (local || psi(trial) >= current) {
        accepted = true;
        break;
      }
    }
    if (!accepted) {
      throw InferenceError("mode finding", "step halving failed to increase the objective (max |gradient| = " +
                                               format_sci(grad_norm) + ")");
    }
    gamma.swap(trial);
  }
  throw InferenceError("mode finding", "unreachable");
}

TauPosterior log_tau_posterior(const LatentLikelihood& likelihood, const StructureMatrix& s,
                               const TauPrior& prior, double tau, std::optional<std::span<const double>> init) {
  if (!(prior.alpha > 0.0) || !(prior.beta > 0.0)) {
    throw InferenceError("tau posterior", "Gamma prior needs alpha, beta > 0");
  }
  TauPosterior out;
  out.mode = find_mode(likelihood, s, tau, init);
  const double b = static_cast<double>(s.dim);
  out.log_density = out.mode.log_likelihood + gmrf_logdensity(s, tau, out.mode.gamma_star) +
                    prior.log_density(tau) + 0.5 * b * kLog2Pi - 0.5 * out.mode.precision_factor.log_det;
  return out;
}

TauGrid explore_tau(const LatentLikelihood& likelihood, const StructureMatrix& s, const TauPrior& prior) {
  return in_stage("tau exploration", [&] {
    std::vector<double> warm = likelihood.initial_point();
    // Density of theta = log tau includes the Jacobian tau.
    auto objective = [&](double theta, bool keep_warm) {
      const auto post = log_tau_posterior(likelihood, s, prior, std::exp(theta), std::span<const double>(warm));
      if (keep_warm) warm = post.mode.gamma_star;
      return post.log_density + theta;
    };

    constexpr double kGolden = 0.6180339887498949;
    constexpr double kTolerance = 1e-6;
    constexpr double kLimit = 60.0;
    double lo = -10.0;
    double hi = 10.0;
    double best = 0.0;
    for (int expansion = 0;; ++expansion) {
      double a = lo;
      double b = hi;
      double x1 = b - kGolden * (b - a);
      double x2 = a + kGolden * (b - a);
      double f1 = objective(x1, true);
      double f2 = objective(x2, true);
      while (b - a > kTolerance) {
        if (f1 >= f2) {
          b = x2;
          x2 = x1;
          f2 = f1;
          x1 = b - kGolden * (b - a);
          f1 = objective(x1, true);
        } else {
          a = x1;
          x1 = x2;
          f1 = f2;
          x2 = a + kGolden * (b - a);
          f2 = objective(x2, true);
        }
      }
      best = 0.5 * (a + b);
      const double edge = 1e-3;
      const bool at_lo = best - lo < edge;
      const bool at_hi = hi - best < edge;
      if (!at_lo && !at_hi) break;
      if (expansion >= 5 || std::abs(best) > kLimit) {
        throw InferenceError("tau exploration", "no interior mode of the log tau posterior in [" +
                                                    std::to_string(lo) + ", " + std::to_string(hi) + "]");
      }
      if (at_lo) {
        hi = lo + 1.0;
        lo -= 20.0;
      } else {
        lo = hi - 1.0;
        hi += 20.0;
      }
    }

    // Grid evaluations all start from the mode's latent configuration, so their
    // results do not depend on evaluation order.
    const auto at_mode = log_tau_posterior(likelihood, s, prior, std::exp(best), std::span<const double>(warm));
    const std::vector<double> anchor = at_mode.mode.gamma_star;
    auto evaluate = [&](double theta) {
      return log_tau_posterior(likelihood, s, prior, std::exp(theta), std::span<const double>(anchor)).log_density +
             theta;
    };

    const double f0 = at_mode.log_density + best;
    const double h = 0.1;
    const double second = (evaluate(best + h) - 2.0 * f0 + evaluate(best - h)) / (h * h);
    if (!(second < 0.0) || !std::isfinite(second)) {
      throw InferenceError("tau exploration", "log tau posterior is not curved at its mode");
    }

    TauGrid grid;
    grid.mode_log_tau = best;
    grid.sd_log_tau = 1.0 / std::sqrt(-second);
    const double step = kGridStepInSd * grid.sd_log_tau;

    std::vector<std::pair<double, double>> points{{best, f0}};
    for (const double dir : {-1.0, 1.0}) {
      double prev = f0;
      for (int j = 1; j <= kGridMaxPointsPerSide; ++j) {
        const double theta = best + dir * j * step;
        const double f = evaluate(theta);
        if (f0 - f > kGridDrop) break;
        if (!(f < prev)) grid.monotone = false;
        prev = f;
        points.emplace_back(theta, f);
      }
    }
    std::sort(points.begin(), points.end());

    const std::size_t m = points.size();
    grid.log_tau_values.resize(m);
    grid.log_densities.resize(m);
    grid.weights.resize(m);
    double total = 0.0;
    for (std::size_t g = 0; g < m; ++g) {
      grid.log_tau_values[g] = points[g].first;
      grid.log_densities[g] = points[g].second;
      const double trapezoid = (m > 1 && (g == 0 || g + 1 == m)) ? 0.5 : 1.0;
      grid.weights[g] = trapezoid * std::exp(points[g].second - f0);
      total += grid.weights[g];
    }
    for (auto& w : grid.weights) w /= total;
    return grid;
  });
}

std::vector<MarginalMixture> latent_mixtures(const LatentLikelihood& likelihood, const StructureMatrix& s,
                                             const TauGrid& grid, Strategy strategy) {
  return in_stage("latent marginals", [&] {
    const std::size_t n = likelihood.size();
    if (grid.log_tau_values.empty()) throw InferenceError("latent marginals", "empty tau grid");
    std::vector<MarginalMixture> mixtures(n);

    const int max_steps = static_cast<int>(std::lround(kLaplaceMaxHalfWidth / kLaplaceStep));
    std::vector<double> unit(n), shifted(n), curv(n), work_diag, work_off;
    std::vector<std::pair<double, double>> evaluations;

    for (std::size_t g = 0; g < grid.log_tau_values.size(); ++g) {
      const double tau = std::exp(grid.log_tau_values[g]);
      const auto mode = find_mode(likelihood, s, tau);
      const auto variances = tri_inverse_diag(mode.precision_factor);
      for (std::size_t i = 0; i < n; ++i) {
        const double sd = std::sqrt(variances[i]);
        if (strategy == Strategy::gaussian) {
          mixtures[i].add(grid.weights[g], MarginalComponent::gaussian(mode.gamma_star[i], sd));
          continue;
        }
        // Conditional mean of gamma_{-i} given gamma_i under the Gaussian approximation
        // moves along the i-th column of its covariance.
        std::fill(unit.begin(), unit.end(), 0.0);
        unit[i] = 1.0;
        const auto column = tri_solve(mode.precision_factor, unit);
        auto log_marginal = [&](double z) {
          const double offset = z / sd;  // (x - gamma*_i) / Sigma_ii with x = gamma*_i + sd z
          for (std::size_t j = 0; j < n; ++j) shifted[j] = mode.gamma_star[j] + column[j] * offset;
          const double joint = likelihood.value(shifted) - 0.5 * tau * s.quadratic_form(shifted);
          likelihood.curvature(shifted, curv);
          const double value = joint - 0.5 * log_det_without(s, tau, curv, i, work_diag, work_off);
          if (!std::isfinite(value)) {
            throw InferenceError("latent marginals", "non-finite Laplace evaluation at cell " + std::to_string(i));
          }
          return value;
        };
        evaluations.clear();
        const double centre = log_marginal(0.0);
        evaluations.emplace_back(0.0, centre);
        for (const int dir : {-1, 1}) {
          for (int k = 1; k <= max_steps; ++k) {
            const double z = dir * k * kLaplaceStep;
            const double value = log_marginal(z);
            evaluations.emplace_back(z, value);
            if (centre - value > kLaplaceDrop) break;
          }
        }
        std::sort(evaluations.begin(), evaluations.end());
        std::vector<double> knots, correction;
        for (const auto& [z, value] : evaluations) {
          knots.push_back(z);
          correction.push_back(value - centre + 0.5 * z * z);
        }
        mixtures[i].add(grid.weights[g], MarginalComponent::corrected(mode.gamma_star[i], sd, std::move(knots), std::move(correction)));
      }
    }
    return mixtures;
  });
}

PosteriorSummary latent_marginals(const LatentLikelihood& likelihood, const StructureMatrix& s,
                                  std::span<const double> times, const TauGrid& grid, Strategy strategy) {
  const auto mixtures = latent_mixtures(likelihood, s, grid, strategy);
  return in_stage("latent marginals", [&] {
    const std::size_t n = mixtures.size();
    PosteriorSummary out;
    out.times.assign(times.begin(), times.end());
    out.tau_grid = grid;
    out.strategy = strategy;
    out.median.resize(n);
    out.lower95.resize(n);
    out.upper95.resize(n);
    out.mean.resize(n);
    out.mean_natural.resize(n);
    out.prior_only.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
      out.median[i] = mixtures[i].quantile(0.5);
      out.lower95[i] = mixtures[i].quantile(0.025);
      out.upper95[i] = mixtures[i].quantile(0.975);
      out.mean[i] = mixtures[i].mean();
      out.mean_natural[i] = mixtures[i].mean_exp();
      out.prior_only[i] = !likelihood.informative(i);
      if (!std::isfinite(out.median[i]) || !std::isfinite(out.mean[i])) {
        throw InferenceError("latent marginals", "non-finite summary at cell " + std::to_string(i));
      }
    }
    return out;
  });
}

StructureMatrix structure_for(const CellStats& cells) {
  return cells.size() >= 2 ? build_rw1(cells.midpoints) : StructureMatrix::zero();
}

PosteriorSummary infer(const CellStats& cells, const ModelOptions& options) {
  const auto s = in_stage("structure", [&] { return structure_for(cells); });
  const CoalescentLikelihood likelihood(cells);
  const auto grid = explore_tau(likelihood, s, options.tau_prior);
  return latent_marginals(likelihood, s, cells.midpoints, grid, options.strategy);
}

}  // namespace coalinla
