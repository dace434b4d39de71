#pragma once

#include <span>
#include <vector>

#include "coalinla/genealogy.hpp"

namespace coalinla {

// Per-cell sufficient statistics of the coalescent likelihood under a
// piecewise-constant log effective population size gamma. Cell j covers
// (boundaries[j], boundaries[j + 1]].
struct CellStats {
  std::vector<double> boundaries;  // B + 1 entries, starting at 0 and ending at the root age
  std::vector<double> midpoints;   // B cell centers
  std::vector<int> events;         // coalescent events per cell (y)
  std::vector<double> exposure;    // integral of C_k(t) over the cell (A)
  double log_const = 0.0;          // sum over events of log C_k at the event

  std::size_t size() const { return events.size(); }
  int total_events() const;
  double total_exposure() const;
};

// One cell per inter-coalescent interval, knots at the coalescent times.
CellStats build_cells_cggp(const CoalescentData& d);

// `cells` equal-width cells on [0, root age]. Throws std::invalid_argument if cells < 2.
CellStats build_cells_rggp(const CoalescentData& d, int cells);

// Same reduction on caller-supplied boundaries (first 0, last the root age).
CellStats build_cells(const CoalescentData& d, std::vector<double> boundaries);

struct LikelihoodValue {
  double value = 0.0;
  std::vector<double> gradient;
  std::vector<double> curvature;  // minus the (diagonal) Hessian, always >= 0
};

// log L(gamma) = log_const + sum_j [ -y_j gamma_j - A_j exp(-gamma_j) ].
// Throws std::invalid_argument on a length mismatch or non-finite gamma.
LikelihoodValue log_likelihood(const CellStats& cells, std::span<const double> gamma);

// Value only; no checks, no allocation. Used inside the Newton and MCMC loops.
double log_likelihood_value(const CellStats& cells, std::span<const double> gamma);

}  // namespace coalinla
