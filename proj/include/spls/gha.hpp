#pragma once

#include <functional>
#include <iosfwd>
#include <span>
#include <string>

#include "spls/types.hpp"

namespace spls {

struct SpectralBasis;

enum class Schedule { constant, inverse, inverse_sqrt };

// Step-size policy for the stochastic iterations.
struct StepConfig {
  Schedule schedule = Schedule::constant;
  double eta = 5e-5;  // η for constant, c for c/k and c/√k
  bool renormalize = false;
  double observe_prob = 1.0;

  // Step size used at iteration k (1-based).
  double eta_at(std::size_t k) const;
  void validate() const;
};

// Dual-free GHA update
//   u' = u + η (x yᵀv − (uᵀx yᵀv) u),   v' = v + η (y xᵀu − (uᵀx yᵀv) v),
// both halves read the incoming (u, v). The inner scalar is (u·x)(y·v).
PlsIterate gha_step(const PlsIterate& iter, const TwoViewSample& s, double eta,
                    bool renormalize = false);

// Same algebra on a zero-imputed sample; η_p already carries the p² factor.
PlsIterate gha_step_missing(const PlsIterate& iter, const TwoViewSample& s, double eta_p,
                            bool renormalize = false);

// In-place kernel shared by both step functions and the drivers. No checks.
inline void gha_update(Vec& u, Vec& v, const Vec& x, const Vec& y, double eta) {
  const double ux = u.dot(x);
  const double yv = y.dot(v);
  const double inner = ux * yv;
  u += eta * (yv * x - inner * u);
  v += eta * (ux * y - inner * v);
}

// uᵀ Σ_XY v.
double objective(const PlsIterate& iter, const Mat& sigma_xy);

// min over s ∈ {±1} of ‖u − s·û‖² + ‖v − s·v̂‖².
double alignment_error(const PlsIterate& iter, const Vec& u_hat, const Vec& v_hat);

// Coordinates recorded by run_gha, in long-format CSV order.
struct LogSpec {
  std::size_t stride = 1;
  std::vector<std::size_t> extra;      // further iterations to record, any order
  std::vector<std::size_t> h_indices;  // 1-based, requires basis
  bool tail = false;                   // Σ_{i≥2} h_i², requires basis
  bool objective = false;              // requires sigma_xy
  bool alignment = false;              // requires u_hat, v_hat
  bool norms = false;                  // ‖u‖², ‖v‖²
  const SpectralBasis* basis = nullptr;
  const Mat* sigma_xy = nullptr;
  Vec u_hat;
  Vec v_hat;
  // Called after every iteration k ≥ 0 (k = 0 is the initial iterate).
  std::function<void(std::size_t, const PlsIterate&)> on_step;
};

// Dense record of logged coordinates: rows are logged iterations.
struct Trajectory {
  std::uint64_t seed = 0;
  std::vector<std::string> coord_names;
  std::vector<std::size_t> iters;
  std::vector<double> values;  // row-major, iters.size() × coord_names.size()

  std::size_t rows() const { return iters.size(); }
  double at(std::size_t row, std::size_t coord) const {
    return values[row * coord_names.size() + coord];
  }
  // Column index by name; throws InvalidInput when absent.
  std::size_t column(const std::string& name) const;
};

// Runs n GHA iterations from `init`, logging at k = 0, every `stride`
// iterations, at the `extra` iterations and at k = n. Uses gha_step_missing on masked samples when
// cfg.observe_prob < 1 (masks drawn from a generator seeded with
// mask_seed). Throws StreamExhausted if the source runs dry.
Trajectory run_gha(SampleSource& stream, const PlsIterate& init, const StepConfig& cfg,
                   std::size_t n, const LogSpec& log, std::uint64_t mask_seed = 0,
                   PlsIterate* final_iterate = nullptr);

// Long-format CSV: header `iter,coord_name,value,seed`, 17 significant
// digits, LF line endings.
void write_trajectories_csv(std::ostream& out, std::span<const Trajectory> trajectories);

// Formats a double with 17 significant digits.
std::string format_double(double value);

}  // namespace spls
