#pragma once

#include <cstdint>
#include <vector>

#include "coalinla/genealogy.hpp"
#include "coalinla/trajectory.hpp"

namespace coalinla {

struct SamplingEvent {
  double age = 0.0;
  int count = 0;
};

// Draws a genealogy from the (heterochronous) coalescent with rate C_k / N_e(t).
// Tips are labelled t1..tn in sampling order. Deterministic for a given seed.
// Throws std::invalid_argument when fewer than two samples are requested or none
// is taken at age 0, and std::runtime_error if the trajectory never lets the
// remaining lineages coalesce.
Genealogy simulate(const Trajectory& trajectory, std::vector<SamplingEvent> sampling, std::uint64_t seed);

// Convenience: n samples at age 0.
Genealogy simulate_isochronous(const Trajectory& trajectory, int n, std::uint64_t seed);

}  // namespace coalinla
