#pragma once

#include <optional>
#include <string>
#include <vector>

namespace coalinla {

// Effective population size trajectory N_e(t), t measured backward from the present.
// Every supported shape is piecewise log-linear: N_e(t) = exp(log_a - b t) on each piece,
// so the integrated coalescent rate and its inverse have closed forms.
class Trajectory {
 public:
  enum class Kind { constant, exponential, boom_bust, piecewise_constant };

  static Trajectory constant(double size);
  // N_e(t) = a exp(-b t)
  static Trajectory exponential(double a, double b);
  // Expansion followed by a crash: exp(4t) on [0, 0.5], exp(-2t + 3) afterwards.
  static Trajectory boom_bust();
  // `values` has one more entry than `boundaries`; value i applies on
  // [boundaries[i-1], boundaries[i]).
  static Trajectory piecewise_constant(std::vector<double> boundaries, std::vector<double> values);

  Kind kind() const { return kind_; }
  std::string describe() const;

  double size_at(double t) const;
  double log_size_at(double t) const;

  // Integral of 1 / N_e(u) over [t0, t1].
  double integrated_inverse(double t0, double t1) const;

  // Smallest t1 >= t0 with integrated_inverse(t0, t1) == amount; nullopt when the
  // integral stays below `amount` forever (a trajectory growing without bound).
  std::optional<double> advance(double t0, double amount) const;

 private:
  struct Piece {
    double start;
    double log_a;
    double b;
  };

  Trajectory(Kind kind, std::vector<Piece> pieces);
  std::size_t piece_index(double t) const;
  double piece_integral(const Piece& p, double u, double v) const;

  Kind kind_;
  std::vector<Piece> pieces_;
};

}  // namespace coalinla
