#include "coalinla/gmrf.hpp"

#include <cmath>
#include <numbers>

namespace coalinla {

double StructureMatrix::quadratic_form(std::span<const double> gamma) const {
  // For rw1, gamma' S gamma = sum_i w_i (gamma_{i+1} - gamma_i)^2 with w_i = -offdiag_i;
  // the difference form keeps the null space exact.
  double q = 0.0;
  for (std::size_t i = 0; i + 1 < dim; ++i) {
    const double d = gamma[i + 1] - gamma[i];
    q -= offdiag[i] * d * d;
  }
  return q;
}

void StructureMatrix::multiply(std::span<const double> x, std::span<double> out) const {
  for (std::size_t i = 0; i < dim; ++i) {
    double v = diag[i] * x[i];
    if (i > 0) v += offdiag[i - 1] * x[i - 1];
    if (i + 1 < dim) v += offdiag[i] * x[i + 1];
    out[i] = v;
  }
}

StructureMatrix StructureMatrix::zero() {
  StructureMatrix s;
  s.dim = 1;
  s.diag = {0.0};
  return s;
}

StructureMatrix build_rw1(std::span<const double> midpoints) {
  if (midpoints.size() < 2) throw std::invalid_argument("rw1 needs at least 2 midpoints");
  const std::size_t n = midpoints.size();
  StructureMatrix s;
  s.dim = n;
  s.rank = n - 1;
  s.diag.assign(n, 0.0);
  s.offdiag.resize(n - 1);
  for (std::size_t i = 0; i + 1 < n; ++i) {
    const double delta = midpoints[i + 1] - midpoints[i];
    if (!(delta > 0.0) || !std::isfinite(delta)) {
      throw std::invalid_argument("rw1 midpoints must be strictly increasing");
    }
    const double w = 1.0 / delta;
    s.offdiag[i] = -w;
    s.diag[i] += w;
    s.diag[i + 1] += w;
  }
  // Generalized determinant = n * det(any (n-1)-principal minor) for a connected
  // weighted path Laplacian; the leading minor is tridiagonal and positive definite.
  s.log_gdet = std::log(static_cast<double>(n)) +
               tri_log_det(std::span(s.diag).first(n - 1), std::span(s.offdiag).first(n - 2));
  return s;
}

double gmrf_logdensity(const StructureMatrix& s, double tau, std::span<const double> gamma) {
  if (!(tau > 0.0)) throw std::invalid_argument("tau must be positive");
  if (gamma.size() != s.dim) throw std::invalid_argument("gamma length does not match the structure matrix");
  const double r = static_cast<double>(s.rank);
  return 0.5 * r * std::log(tau) + 0.5 * s.log_gdet - 0.5 * tau * s.quadratic_form(gamma) -
         0.5 * r * std::log(2.0 * std::numbers::pi);
}

NotPositiveDefinite::NotPositiveDefinite(std::size_t index)
    : std::runtime_error("matrix is not positive definite (pivot " + std::to_string(index) + ")"),
      index_(index) {}

TriFactor tri_cholesky(std::span<const double> diag, std::span<const double> offdiag) {
  const std::size_t n = diag.size();
  if (n > 0 && offdiag.size() + 1 != n) throw std::invalid_argument("offdiag must have n - 1 entries");
  TriFactor f;
  f.diag.resize(n);
  f.sub.resize(n > 0 ? n - 1 : 0);
  for (std::size_t i = 0; i < n; ++i) {
    double pivot = diag[i];
    if (i > 0) pivot -= f.sub[i - 1] * f.sub[i - 1];
    if (!(pivot > 0.0) || !std::isfinite(pivot)) throw NotPositiveDefinite(i);
    f.diag[i] = std::sqrt(pivot);
    f.log_det += std::log(pivot);
    if (i + 1 < n) f.sub[i] = offdiag[i] / f.diag[i];
  }
  return f;
}

double tri_log_det(std::span<const double> diag, std::span<const double> offdiag) {
  double log_det = 0.0;
  double prev_sub_sq = 0.0;
  for (std::size_t i = 0; i < diag.size(); ++i) {
    const double pivot = diag[i] - prev_sub_sq;
    if (!(pivot > 0.0) || !std::isfinite(pivot)) throw NotPositiveDefinite(i);
    log_det += std::log(pivot);
    if (i + 1 < diag.size()) prev_sub_sq = offdiag[i] * offdiag[i] / pivot;
  }
  return log_det;
}

std::vector<double> tri_solve(const TriFactor& f, std::span<const double> rhs) {
  const std::size_t n = f.size();
  if (rhs.size() != n) throw std::invalid_argument("rhs length does not match the factor");
  std::vector<double> x(rhs.begin(), rhs.end());
  for (std::size_t i = 0; i < n; ++i) {
    if (i > 0) x[i] -= f.sub[i - 1] * x[i - 1];
    x[i] /= f.diag[i];
  }
  tri_solve_upper(f, x);
  return x;
}

void tri_solve_upper(const TriFactor& f, std::span<double> z) {
  const std::size_t n = f.size();
  for (std::size_t i = n; i-- > 0;) {
    if (i + 1 < n) z[i] -= f.sub[i] * z[i + 1];
    z[i] /= f.diag[i];
  }
}

std::vector<double> tri_inverse_diag(const TriFactor& f) {
  const std::size_t n = f.size();
  std::vector<double> out(n);
  if (n == 0) return out;
  out[n - 1] = 1.0 / (f.diag[n - 1] * f.diag[n - 1]);
  for (std::size_t i = n - 1; i-- > 0;) {
    const double ratio = f.sub[i] / f.diag[i];
    const double cov_next = -ratio * out[i + 1];
    out[i] = 1.0 / (f.diag[i] * f.diag[i]) - ratio * cov_next;
  }
  return out;
}

}  // namespace coalinla
