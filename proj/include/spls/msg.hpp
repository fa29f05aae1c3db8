#pragma once

#include "spls/types.hpp"

namespace spls {

// Convex relaxation iterate; feasible set is ‖M‖₂ ≤ 1, ‖M‖_* ≤ 1.
struct MsgIterate {
  Mat M;
  std::size_t step_count = 0;
};

// Euclidean projection onto {s : 0 ≤ s_i ≤ cap, Σ s_i ≤ budget}.
Vec capped_simplex_project(const Vec& sigma, double cap = 1.0, double budget = 1.0);

// SVD, capped-simplex projection of the singular values, reconstruction.
Mat fantope_project(const Mat& m);

// M' = Π(M + η x yᵀ).
MsgIterate msg_step(const MsgIterate& it, const TwoViewSample& s, double eta_k);

// λ₁ − ⟨M, Σ_XY⟩.
double msg_objective_gap(const MsgIterate& it, const Mat& sigma_xy, double lambda1);

// Leading singular pair of M, for error metrics shared with GHA. The zero
// matrix maps to (e₁, e₁).
PlsIterate msg_leading_pair(const MsgIterate& it);

}  // namespace spls
