#include "spls/landscape.hpp"

#include <algorithm>
#include <cmath>

#include "spls/oracle.hpp"

namespace spls {

const char* to_string(PointKind kind) {
  switch (kind) {
    case PointKind::global_optimum_stable:
      return "global_optimum_stable";
    case PointKind::saddle_unstable:
      return "saddle_unstable";
    case PointKind::null_space_unstable:
      return "null_space_unstable";
  }
  return "unknown";
}

namespace {

void check_dims(const Vec& u, const Vec& v, const Mat& s, const char* who) {
  if (s.rows() != u.size() || s.cols() != v.size()) {
    throw InvalidInput(std::string(who) + ": dimension mismatch");
  }
}

constexpr double kStationaryTol = 1e-8;
constexpr double kStableTol = 1e-8;

}  // namespace

LagrangianGrad lagrangian_grad(const Vec& u, const Vec& v, const Mat& sigma_xy) {
  check_dims(u, v, sigma_xy, "lagrangian_grad");
  const Vec sv = sigma_xy * v;
  const double c = u.dot(sv);
  return {sv - c * u, sigma_xy.transpose() * u - c * v};
}

double lagrangian_value(const Vec& u, const Vec& v, const Mat& sigma_xy, double mu,
                        double sigma) {
  check_dims(u, v, sigma_xy, "lagrangian_value");
  return u.dot(sigma_xy * v) - mu * (u.squaredNorm() - 1.0) - sigma * (v.squaredNorm() - 1.0);
}

Mat lagrangian_hessian(const Vec& u, const Vec& v, const Mat& sigma_xy) {
  check_dims(u, v, sigma_xy, "lagrangian_hessian");
  const Eigen::Index m = u.size(), d = v.size();
  const double c = u.dot(sigma_xy * v);
  Mat h = Mat::Zero(m + d, m + d);
  h.topLeftCorner(m, m).diagonal().setConstant(-c);
  h.bottomRightCorner(d, d).diagonal().setConstant(-c);
  h.topRightCorner(m, d) = sigma_xy;
  h.bottomLeftCorner(d, m) = sigma_xy.transpose();
  return h;
}

double lagrangian_hessian_max_eig(const Vec& u, const Vec& v, const Mat& sigma_xy) {
  const LagrangianGrad g = lagrangian_grad(u, v, sigma_xy);
  const double res = std::max(g.g_u.norm(), g.g_v.norm());
  if (!(res <= kStationaryTol)) {
    throw InvalidInput("lagrangian_hessian_max_eig: point is not stationary (KKT residual " +
                       std::to_string(res) + ")");
  }
  return oracle::symmetric_eigen(lagrangian_hessian(u, v, sigma_xy)).values(0);
}

std::vector<StationaryPoint> enumerate_stationary_points(const Mat& sigma_xy) {
  if (sigma_xy.size() == 0 || !sigma_xy.allFinite()) {
    throw InvalidInput("enumerate_stationary_points: Σ must be finite and non-empty");
  }
  const oracle::SvdResult sv = oracle::svd(sigma_xy);
  if (sv.singular.size() >= 2 && sv.singular(0) - sv.singular(1) <= 1e-8) {
    throw Unidentifiable("leading singular pair is not unique (λ₁ − λ₂ ≤ 1e-8)");
  }
  const Eigen::Index rank = sv.rank();
  const Eigen::Index k = sv.singular.size();

  auto classify = [&](StationaryPoint& p, bool null_space) {
    p.max_hessian_eig = lagrangian_hessian_max_eig(p.u, p.v, sigma_xy);
    if (p.max_hessian_eig <= kStableTol) {
      p.kind = PointKind::global_optimum_stable;
    } else {
      p.kind = null_space ? PointKind::null_space_unstable : PointKind::saddle_unstable;
    }
  };

  std::vector<StationaryPoint> out;
  for (Eigen::Index j = 0; j < rank; ++j) {
    StationaryPoint p;
    p.u = sv.o_x.col(j);
    p.v = sv.o_y.col(j);
    p.singular_value = sv.singular(j);
    p.multiplier = 0.5 * p.u.dot(sigma_xy * p.v);
    classify(p, false);
    out.push_back(std::move(p));
  }
  if (rank < k) {
    StationaryPoint p;
    p.u = sv.o_x.col(rank);
    p.v = sv.o_y.col(rank);
    p.singular_value = 0.0;
    p.multiplier = 0.5 * p.u.dot(sigma_xy * p.v);
    classify(p, true);
    out.push_back(std::move(p));
  }
  return out;
}

}  // namespace spls
