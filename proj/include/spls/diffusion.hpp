#pragma once

#include <cstdint>
#include <vector>

#include "json.hpp"

#include "spls/types.hpp"

namespace spls {

// Orthogonal P and diagonal Λ with P Λ Pᵀ = Q = [[0, Σ_XY], [Σ_XYᵀ, 0]].
// Columns: (1/√2)(O_X; O_Y) for each singular pair, then the null-space
// completion (rectangular case), then (1/√2)(O_X; −O_Y).
struct SpectralBasis {
  Mat P;
  Vec lambda;    // λ₁..λ_k, zeros, −λ₁..−λ_k
  Vec singular;  // λ₁..λ_k, k = min(m, d)
  Mat o_x;
  Mat o_y;
  std::size_t m = 0;
  std::size_t d = 0;
  bool rect = false;
};

// Throws Unidentifiable when λ₁ − λ₂ ≤ 1e-8.
SpectralBasis build_basis(const Mat& sigma_xy);

// h = Pᵀ (1/√2)(u; v).
Vec to_h(const Vec& u, const Vec& v, const SpectralBasis& basis);
inline Vec to_h(const PlsIterate& it, const SpectralBasis& basis) {
  return to_h(it.u, it.v, basis);
}

// dh_i/dt = h_i Σ_j (λ_i − λ_j) h_j².
Vec ode_rhs(const Vec& h, const Vec& lambda);

// Closed form h_i(t) ∝ h_i(0) exp(λ_i t), normalized to the unit sphere.
// exp(λ* t) is factored out, λ* the largest rate with h_i(0) ≠ 0.
Vec ode_solution(const Vec& h0, const Vec& lambda, double t);

// ½ √(γ_i ω_j + γ_j ω_i ± 2 α_ij), indices 1-based in 1..2d; indices above
// d reuse the moments of i − d. Plus when i and j sit on the same side of d.
// Throws InvalidInput on a negative radicand.
double beta_coeff(std::size_t i, std::size_t j, const LatentMoments& mom, std::size_t d);

enum class OuPhase { escape, converge };

struct OuMoments {
  double mean = 0.0;
  double var = 0.0;
};

// Mean and variance of dZ = ±gap·Z dt + β dB started at z0 (+ for escape).
// gap must be > 0; equal rates are a random walk (random_walk_variance).
// t may be +inf for the stationary converge-phase law.
OuMoments ou_moments(double z0, double gap, double beta, double t, OuPhase phase);

// Var Z(t) = β² t for the zero-gap case.
double random_walk_variance(double beta, double t);

// Euler–Maruyama path z_{n+1} = z_n ± gap·z_n·dt + β√dt ξ_n including z0.
// Uses round(t_end/dt) steps; gap = 0 gives the random walk.
std::vector<double> simulate_ou(double z0, double gap, double beta, double t_end, double dt,
                                Rng& rng, OuPhase phase);

// Terminal values of n_paths independent paths; path p draws from a
// generator seeded with (seed, p), so both versions agree bitwise.
Vec simulate_ou_terminal(double z0, double gap, double beta, double t_end, double dt,
                         std::size_t n_paths, std::uint64_t seed, OuPhase phase);
Vec simulate_ou_terminal_serial(double z0, double gap, double beta, double t_end, double dt,
                                std::size_t n_paths, std::uint64_t seed, OuPhase phase);

// φ = Σ_{i=1..d} β_{i1}².
double phi_coeff(const LatentMoments& mom);

struct PhasePrediction {
  double eta = 0.0;
  double nu = 0.1;
  double epsilon = 0.01;
  double mu_exponent = 0.75;
  double delta = 0.0;
  double phi = 0.0;
  double beta12 = 0.0;
  double gap = 0.0;
  Vec singular;
  double T1 = 0.0, T2 = 0.0, T3 = 0.0, T_total = 0.0;
  std::uint64_t N1 = 0, N2 = 0, N3 = 0, N_total = 0;
  bool phase3_defined = true;
  std::string phase3_error;
};

// T₁ = (1/g) log(2η⁻¹δ² g / (q² β₁₂²) + 1), q = Φ⁻¹((1 + ν/2)/2).
double escape_time(double gap, double beta12, double eta, double delta, double nu);
// T₂ = (1/g) log((1 − δ²)/δ²).
double traverse_time(double gap, double delta);
// T₃ = (1/g) log(g δ² / (g ε − 8ηφ)), clamped at 0. Throws StepSizeTooLarge
// unless g ε > 8ηφ.
double convergence_time(double gap, double delta, double epsilon, double eta, double phi);

// Evaluates all three times with constants 1. `singular` holds λ₁ ≥ λ₂ ≥ ...
// Throws StepSizeTooLarge when phase III is undefined.
PhasePrediction phase_times(const Vec& singular, const LatentMoments& mom, double eta,
                            double nu, double epsilon, double mu_exponent = 0.75);

// Same, but an undefined phase III is reported through phase3_defined
// (T3, N3 and the totals are then NaN / 0).
PhasePrediction phase_times_partial(const Vec& singular, const LatentMoments& mom, double eta,
                                    double nu, double epsilon, double mu_exponent = 0.75);

// ε (λ₁ − λ₂) / φ.
double recommended_eta(double epsilon, double lambda1, double lambda2, double phi);

nlohmann::json to_json(const PhasePrediction& p);

}  // namespace spls
