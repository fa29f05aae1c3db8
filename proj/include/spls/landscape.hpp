#pragma once

#include <string>
#include <vector>

#include "spls/types.hpp"

namespace spls {

enum class PointKind { global_optimum_stable, saddle_unstable, null_space_unstable };

const char* to_string(PointKind kind);

struct StationaryPoint {
  Vec u;
  Vec v;
  double multiplier = 0.0;  // μ = σ = ½ uᵀΣv
  double singular_value = 0.0;
  PointKind kind = PointKind::saddle_unstable;
  double max_hessian_eig = 0.0;
};

struct LagrangianGrad {
  Vec g_u;
  Vec g_v;
};

// Gradient with the multipliers at their optimal value:
//   g_u = Σv − (uᵀΣv)u,  g_v = Σᵀu − (uᵀΣv)v.
LagrangianGrad lagrangian_grad(const Vec& u, const Vec& v, const Mat& sigma_xy);

// L(u, v) = uᵀΣv − μ(uᵀu − 1) − σ(vᵀv − 1) for fixed multipliers.
double lagrangian_value(const Vec& u, const Vec& v, const Mat& sigma_xy, double mu, double sigma);

// [[−cI, Σ], [Σᵀ, −cI]] with c = uᵀΣv.
Mat lagrangian_hessian(const Vec& u, const Vec& v, const Mat& sigma_xy);

// Largest Hessian eigenvalue at a stationary point. Rejects points whose
// KKT residual exceeds 1e-8.
double lagrangian_hessian_max_eig(const Vec& u, const Vec& v, const Mat& sigma_xy);

// One point per nonzero singular value, plus one null-space representative
// when Σ is rank deficient. Throws Unidentifiable when λ₁ − λ₂ ≤ 1e-8.
std::vector<StationaryPoint> enumerate_stationary_points(const Mat& sigma_xy);

}  // namespace spls
