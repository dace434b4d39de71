#include "coalinla/trajectory.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace coalinla {

Trajectory::Trajectory(Kind kind, std::vector<Piece> pieces) : kind_(kind), pieces_(std::move(pieces)) {}

Trajectory Trajectory::constant(double size) {
  if (!(size > 0.0) || !std::isfinite(size)) throw std::invalid_argument("population size must be positive");
  return Trajectory(Kind::constant, {{0.0, std::log(size), 0.0}});
}

Trajectory Trajectory::exponential(double a, double b) {
  if (!(a > 0.0) || !std::isfinite(a) || !std::isfinite(b)) {
    throw std::invalid_argument("exponential trajectory needs a > 0 and finite b");
  }
  return Trajectory(Kind::exponential, {{0.0, std::log(a), b}});
}

Trajectory Trajectory::boom_bust() {
  return Trajectory(Kind::boom_bust, {{0.0, 0.0, -4.0}, {0.5, 3.0, 2.0}});
}

Trajectory Trajectory::piecewise_constant(std::vector<double> boundaries, std::vector<double> values) {
  if (values.size() != boundaries.size() + 1) {
    throw std::invalid_argument("piecewise trajectory needs one more value than boundaries");
  }
  std::vector<Piece> pieces;
  double prev = 0.0;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (!(values[i] > 0.0) || !std::isfinite(values[i])) {
      throw std::invalid_argument("population sizes must be positive");
    }
    const double start = i == 0 ? 0.0 : boundaries[i - 1];
    if (i > 0 && !(start > prev)) {
      throw std::invalid_argument("piecewise boundaries must be positive and strictly increasing");
    }
    prev = start;
    pieces.push_back({start, std::log(values[i]), 0.0});
  }
  return Trajectory(Kind::piecewise_constant, std::move(pieces));
}

std::string Trajectory::describe() const {
  switch (kind_) {
    case Kind::constant: return "constant";
    case Kind::exponential: return "exponential";
    case Kind::boom_bust: return "boombust";
    case Kind::piecewise_constant: return "custom";
  }
  return "unknown";
}

std::size_t Trajectory::piece_index(double t) const {
  // Piece i covers [start_i, start_{i+1}); boom-bust's first piece is closed at 0.5,
  // which is immaterial for integrals.
  const auto it = std::upper_bound(pieces_.begin(), pieces_.end(), t,
                                   [](double v, const Piece& p) { return v < p.start; });
  return it == pieces_.begin() ? 0 : static_cast<std::size_t>(it - pieces_.begin()) - 1;
}

double Trajectory::log_size_at(double t) const {
  const auto& p = pieces_[piece_index(t)];
  return p.log_a - p.b * t;
}

double Trajectory::size_at(double t) const { return std::exp(log_size_at(t)); }

double Trajectory::piece_integral(const Piece& p, double u, double v) const {
  if (p.b == 0.0) return (v - u) * std::exp(-p.log_a);
  return std::exp(-p.log_a + p.b * u) * std::expm1(p.b * (v - u)) / p.b;
}

double Trajectory::integrated_inverse(double t0, double t1) const {
  if (t1 < t0) return -integrated_inverse(t1, t0);
  double total = 0.0;
  for (std::size_t i = piece_index(t0); i < pieces_.size(); ++i) {
    const double lo = std::max(t0, pieces_[i].start);
    const double end = i + 1 < pieces_.size() ? pieces_[i + 1].start : std::numeric_limits<double>::infinity();
    const double hi = std::min(t1, end);
    if (hi > lo) total += piece_integral(pieces_[i], lo, hi);
    if (end >= t1) break;
  }
  return total;
}

std::optional<double> Trajectory::advance(double t0, double amount) const {
  double remaining = amount;
  double t = t0;
  for (std::size_t i = piece_index(t0); i < pieces_.size(); ++i) {
    const auto& p = pieces_[i];
    const double end = i + 1 < pieces_.size() ? pieces_[i + 1].start : std::numeric_limits<double>::infinity();
    const double available = std::isinf(end) ? std::numeric_limits<double>::infinity() : piece_integral(p, t, end);
    if (remaining <= available || std::isinf(end)) {
      if (p.b == 0.0) return t + remaining * std::exp(p.log_a);
      // expm1(b * dt) = remaining * b * exp(log_a - b t)
      const double q = remaining * p.b * std::exp(p.log_a - p.b * t);
      if (q <= -1.0) return std::nullopt;
      const double dt = std::log1p(q) / p.b;
      return std::isfinite(dt) ? std::optional<double>(t + dt) : std::nullopt;
    }
    remaining -= available;
    t = end;
  }
  return std::nullopt;
}

}  // namespace coalinla
