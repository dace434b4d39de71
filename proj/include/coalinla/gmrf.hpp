#pragma once

#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace coalinla {

// Symmetric tridiagonal structure matrix S of a first-order random walk.
// The precision of the intrinsic GMRF is tau * S; the constant vector spans the null space.
struct StructureMatrix {
  std::size_t dim = 0;
  std::vector<double> diag;
  std::vector<double> offdiag;  // dim - 1 entries
  std::size_t rank = 0;
  double log_gdet = 0.0;        // log product of the nonzero eigenvalues

  // gamma' S gamma
  double quadratic_form(std::span<const double> gamma) const;
  // out = S x
  void multiply(std::span<const double> x, std::span<double> out) const;

  // The degenerate single-node structure (S = [0], rank 0) used when a model has one cell.
  static StructureMatrix zero();
};

// rw1 on an irregular grid: off-diagonals -1/delta_i, diagonals the sum of adjacent 1/delta.
// Throws std::invalid_argument for fewer than 2 or non-increasing midpoints.
StructureMatrix build_rw1(std::span<const double> midpoints);

// Intrinsic GMRF log density with precision tau * S (generalized determinant, rank S).
double gmrf_logdensity(const StructureMatrix& s, double tau, std::span<const double> gamma);

class NotPositiveDefinite : public std::runtime_error {
 public:
  explicit NotPositiveDefinite(std::size_t index);
  std::size_t index() const { return index_; }

 private:
  std::size_t index_;
};

// Cholesky factor L of a symmetric positive-definite tridiagonal matrix: L is
// lower bidiagonal with diagonal `diag` and subdiagonal `sub`.
struct TriFactor {
  std::vector<double> diag;
  std::vector<double> sub;
  double log_det = 0.0;

  std::size_t size() const { return diag.size(); }
};

TriFactor tri_cholesky(std::span<const double> diag, std::span<const double> offdiag);

// Log determinant without keeping the factor. Throws NotPositiveDefinite.
double tri_log_det(std::span<const double> diag, std::span<const double> offdiag);

// Solves (L L') x = rhs.
std::vector<double> tri_solve(const TriFactor& f, std::span<const double> rhs);

// Solves L' x = z in place; with z ~ N(0, I) the result has covariance (L L')^{-1}.
void tri_solve_upper(const TriFactor& f, std::span<double> z);

// Diagonal of (L L')^{-1} by the two-pass recursion over the bidiagonal factor.
std::vector<double> tri_inverse_diag(const TriFactor& f);

}  // namespace coalinla
