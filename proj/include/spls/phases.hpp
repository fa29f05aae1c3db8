#pragma once

#include <optional>
#include <vector>

#include "json.hpp"

#include "spls/gha.hpp"

namespace spls {

struct PhasePrediction;

// First-crossing times of one run. Each event is searched from the previous
// one onward, so escape ≤ arrival ≤ convergence holds by construction:
//   escape       (h₂)² ≤ 1 − δ²
//   arrival      (h₁)² ≥ 1 − δ²
//   convergence  Σ_{i≥2} (h_i)² ≤ ε
struct PhaseCrossings {
  std::optional<std::size_t> escape;
  std::optional<std::size_t> arrival;
  std::optional<std::size_t> convergence;
};

// Streaming detector fed once per iteration.
class PhaseDetector {
 public:
  PhaseDetector(double delta, double epsilon);

  void observe(std::size_t k, double h1_sq, double h2_sq, double tail_sq);
  // Convenience overload on a full h vector (tail = ‖h‖² − h₁²).
  void observe(std::size_t k, const Vec& h);

  const PhaseCrossings& crossings() const { return c_; }

 private:
  double thresh_;
  double epsilon_;
  PhaseCrossings c_;
};

// Runs the detector over logged rows. Needs columns h1 and h2; the tail
// uses `tail_sq` when logged and 1 − h₁² otherwise.
PhaseCrossings detect_phases(const Trajectory& traj, double delta, double epsilon);

struct Quantiles {
  std::size_t count = 0;
  double q25 = 0.0, median = 0.0, q75 = 0.0;
};

// Linear-interpolation quantiles; count = 0 when `values` is empty.
Quantiles quantiles(std::vector<double> values);

struct PhaseReport {
  std::vector<std::uint64_t> seeds;
  std::vector<PhaseCrossings> per_seed;
  double delta = 0.0;
  double epsilon = 0.0;
  Quantiles escape, arrival, convergence;
  std::size_t ordering_violations = 0;
  std::optional<std::uint64_t> predicted_n1, predicted_n2, predicted_n3;
};

PhaseReport summarize_phases(const std::vector<std::uint64_t>& seeds,
                             const std::vector<PhaseCrossings>& per_seed, double delta,
                             double epsilon, const PhasePrediction* prediction);

nlohmann::json to_json(const PhaseReport& r);

}  // namespace spls
