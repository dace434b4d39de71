#include "coalinla/coalescent.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <string>

namespace coalinla {

namespace {

double coalescent_factor(int k) { return 0.5 * k * (k - 1); }

// Piece of the timeline on which the lineage count is constant.
struct Segment {
  double start;
  double end;
  int lineages;
};

std::vector<Segment> lineage_segments(const CoalescentData& d) {
  std::vector<Segment> out;
  out.reserve(d.sample_ages.size() + d.coal_ages.size());
  std::size_t si = 0;
  std::size_t ci = 0;
  int k = 0;
  double t = 0.0;
  while (ci < d.coal_ages.size()) {
    while (si < d.sample_ages.size() && d.sample_ages[si] <= t) {
      ++k;
      ++si;
    }
    const double next_sample =
        si < d.sample_ages.size() ? d.sample_ages[si] : std::numeric_limits<double>::infinity();
    const double next = std::min(next_sample, d.coal_ages[ci]);
    if (next > t) out.push_back({t, next, k});
    t = next;
    if (d.coal_ages[ci] == next) {
      --k;
      ++ci;
    }
  }
  return out;
}

}  // namespace

int CellStats::total_events() const { return std::accumulate(events.begin(), events.end(), 0); }

double CellStats::total_exposure() const {
  return std::accumulate(exposure.begin(), exposure.end(), 0.0);
}

CellStats build_cells(const CoalescentData& d, std::vector<double> boundaries) {
  validate(d);
  if (boundaries.size() < 2) throw std::invalid_argument("need at least one cell");
  if (boundaries.front() != 0.0) throw std::invalid_argument("first cell boundary must be 0");
  if (boundaries.back() != d.coal_ages.back()) {
    throw std::invalid_argument("last cell boundary must equal the root age");
  }
  for (std::size_t i = 1; i < boundaries.size(); ++i) {
    if (!(boundaries[i] > boundaries[i - 1])) {
      throw std::invalid_argument("cell boundaries must be strictly increasing");
    }
  }

  const std::size_t n_cells = boundaries.size() - 1;
  CellStats cells;
  cells.events.assign(n_cells, 0);
  cells.exposure.assign(n_cells, 0.0);
  cells.midpoints.resize(n_cells);
  for (std::size_t j = 0; j < n_cells; ++j) {
    cells.midpoints[j] = 0.5 * (boundaries[j] + boundaries[j + 1]);
  }

  // Exposure: overlap of every constant-k segment with every cell, two-pointer sweep.
  const auto segments = lineage_segments(d);
  std::size_t j = 0;
  for (const auto& seg : segments) {
    const double rate = coalescent_factor(seg.lineages);
    while (j < n_cells && boundaries[j + 1] <= seg.start) ++j;
    for (std::size_t c = j; c < n_cells && boundaries[c] < seg.end; ++c) {
      const double lo = std::max(seg.start, boundaries[c]);
      const double hi = std::min(seg.end, boundaries[c + 1]);
      if (hi > lo) cells.exposure[c] += rate * (hi - lo);
    }
  }

  // Events fall in the cell whose closed right end covers them; log_const uses k(t-).
  for (const double age : d.coal_ages) {
    const auto it = std::lower_bound(boundaries.begin() + 1, boundaries.end(), age);
    const auto cell = static_cast<std::size_t>(it - (boundaries.begin() + 1));
    ++cells.events[cell];
    const auto before =
        std::lower_bound(d.sample_ages.begin(), d.sample_ages.end(), age) - d.sample_ages.begin();
    const auto coals_before =
        std::lower_bound(d.coal_ages.begin(), d.coal_ages.end(), age) - d.coal_ages.begin();
    cells.log_const += std::log(coalescent_factor(static_cast<int>(before - coals_before)));
  }

  cells.boundaries = std::move(boundaries);
  return cells;
}

CellStats build_cells_cggp(const CoalescentData& d) {
  std::vector<double> boundaries;
  boundaries.reserve(d.coal_ages.size() + 1);
  boundaries.push_back(0.0);
  boundaries.insert(boundaries.end(), d.coal_ages.begin(), d.coal_ages.end());
  return build_cells(d, std::move(boundaries));
}

CellStats build_cells_rggp(const CoalescentData& d, int cells) {
  if (cells < 2) throw std::invalid_argument("regular grid needs at least 2 cells, got " + std::to_string(cells));
  validate(d);
  const double root = d.coal_ages.back();
  std::vector<double> boundaries(static_cast<std::size_t>(cells) + 1);
  for (int j = 0; j <= cells; ++j) boundaries[j] = root * j / cells;
  boundaries.back() = root;
  return build_cells(d, std::move(boundaries));
}

LikelihoodValue log_likelihood(const CellStats& cells, std::span<const double> gamma) {
  if (gamma.size() != cells.size()) {
    throw std::invalid_argument("gamma has length " + std::to_string(gamma.size()) + ", expected " +
                                std::to_string(cells.size()));
  }
  LikelihoodValue out;
  out.value = cells.log_const;
  out.gradient.resize(gamma.size());
  out.curvature.resize(gamma.size());
  for (std::size_t j = 0; j < gamma.size(); ++j) {
    if (!std::isfinite(gamma[j])) throw std::invalid_argument("gamma must be finite");
    const double scaled = cells.exposure[j] > 0.0 ? cells.exposure[j] * std::exp(-gamma[j]) : 0.0;
    out.value += -cells.events[j] * gamma[j] - scaled;
    out.gradient[j] = -cells.events[j] + scaled;
    out.curvature[j] = scaled;
  }
  return out;
}

double log_likelihood_value(const CellStats& cells, std::span<const double> gamma) {
  double value = cells.log_const;
  for (std::size_t j = 0; j < gamma.size(); ++j) {
    value -= cells.events[j] * gamma[j];
    if (cells.exposure[j] > 0.0) value -= cells.exposure[j] * std::exp(-gamma[j]);
  }
  return value;
}

}  // namespace coalinla
