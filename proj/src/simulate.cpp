#include "coalinla/simulate.hpp"

#include <algorithm>
#include <limits>
#include <random>
#include <stdexcept>
#include <string>

namespace coalinla {

Genealogy simulate(const Trajectory& trajectory, std::vector<SamplingEvent> sampling, std::uint64_t seed) {
  std::sort(sampling.begin(), sampling.end(),
            [](const SamplingEvent& a, const SamplingEvent& b) { return a.age < b.age; });
  int total = 0;
  bool has_present = false;
  for (const auto& s : sampling) {
    if (s.count < 0 || !(s.age >= 0.0)) throw std::invalid_argument("sampling counts and ages must be nonnegative");
    total += s.count;
    if (s.age == 0.0 && s.count > 0) has_present = true;
  }
  if (total < 2) throw std::invalid_argument("need at least 2 samples, got " + std::to_string(total));
  if (!has_present) throw std::invalid_argument("at least one sample must be taken at age 0");

  std::mt19937_64 rng(seed);
  std::exponential_distribution<double> unit_exp(1.0);

  std::vector<GenealogyNode> nodes;
  nodes.reserve(2 * static_cast<std::size_t>(total) - 1);
  std::vector<std::size_t> active;
  std::size_t next_sample = 0;
  int label = 0;

  auto add_samples = [&](double age) {
    while (next_sample < sampling.size() && sampling[next_sample].age <= age) {
      for (int c = 0; c < sampling[next_sample].count; ++c) {
        GenealogyNode tip;
        tip.label = "t" + std::to_string(++label);
        tip.age = sampling[next_sample].age;
        active.push_back(nodes.size());
        nodes.push_back(std::move(tip));
      }
      ++next_sample;
    }
  };

  double t = 0.0;
  add_samples(t);
  while (active.size() > 1 || next_sample < sampling.size()) {
    const double next_sampling_age =
        next_sample < sampling.size() ? sampling[next_sample].age : std::numeric_limits<double>::infinity();
    const std::size_t k = active.size();
    if (k < 2) {
      t = next_sampling_age;
      add_samples(t);
      continue;
    }
    // Waiting time is redrawn after each sampling age; memorylessness makes this exact.
    const double rate_factor = 0.5 * static_cast<double>(k) * static_cast<double>(k - 1);
    const double target = unit_exp(rng) / rate_factor;
    const auto event = trajectory.advance(t, target);
    if (event && *event <= next_sampling_age) {
      t = *event;
      std::uniform_int_distribution<std::size_t> pick(0, k - 1);
      const std::size_t a = pick(rng);
      std::size_t b = pick(rng);
      while (b == a) b = pick(rng);
      GenealogyNode parent;
      parent.age = t;
      parent.children = {active[a], active[b]};
      const std::size_t index = nodes.size();
      nodes[active[a]].parent = index;
      nodes[active[b]].parent = index;
      nodes.push_back(std::move(parent));
      active.erase(active.begin() + static_cast<std::ptrdiff_t>(std::max(a, b)));
      active.erase(active.begin() + static_cast<std::ptrdiff_t>(std::min(a, b)));
      active.push_back(index);
    } else if (next_sample < sampling.size()) {
      t = next_sampling_age;
      add_samples(t);
    } else {
      throw std::runtime_error("trajectory grows too fast for the remaining lineages to coalesce");
    }
  }
  return Genealogy::from_nodes(std::move(nodes));
}

Genealogy simulate_isochronous(const Trajectory& trajectory, int n, std::uint64_t seed) {
  return simulate(trajectory, {{0.0, n}}, seed);
}

}  // namespace coalinla
