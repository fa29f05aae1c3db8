#include "spls/msg.hpp"

#include <algorithm>
#include <cmath>

#include "spls/oracle.hpp"

namespace spls {

namespace {

double clipped_sum(const Vec& s, double theta, double cap) {
  double acc = 0.0;
  for (Eigen::Index i = 0; i < s.size(); ++i) acc += std::clamp(s(i) - theta, 0.0, cap);
  return acc;
}

}  // namespace

Vec capped_simplex_project(const Vec& sigma, double cap, double budget) {
  if (!sigma.allFinite()) throw InvalidInput("capped_simplex_project: non-finite input");
  if (!(cap > 0.0) || !(budget > 0.0)) {
    throw InvalidInput("capped_simplex_project: cap and budget must be > 0");
  }
  if (clipped_sum(sigma, 0.0, cap) <= budget) {
    return sigma.unaryExpr([cap](double s) { return std::clamp(s, 0.0, cap); });
  }
  // f(θ) = Σ clip(σ_i − θ, 0, cap) is nonincreasing, f(0) > budget, f(max σ) = 0
  double lo = 0.0, hi = sigma.maxCoeff();
  while (hi - lo > 1e-12 * std::max(1.0, hi)) {
    const double mid = 0.5 * (lo + hi);
    if (clipped_sum(sigma, mid, cap) > budget) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  double theta = 0.5 * (lo + hi);

  // polish: solve exactly on the active set found by bisection
  double fixed = 0.0;
  double free_sum = 0.0;
  int n_free = 0;
  for (Eigen::Index i = 0; i < sigma.size(); ++i) {
    const double t = sigma(i) - theta;
    if (t >= cap) {
      fixed += cap;
    } else if (t > 0.0) {
      free_sum += sigma(i);
      ++n_free;
    }
  }
  if (n_free > 0) {
    const double exact = (free_sum + fixed - budget) / n_free;
    if (std::abs(exact - theta) < 1e-9) theta = exact;
  }
  return sigma.unaryExpr([theta, cap](double s) { return std::clamp(s - theta, 0.0, cap); });
}

Mat fantope_project(const Mat& m) {
  if (!m.allFinite()) throw InvalidInput("fantope_project: non-finite input");
  const oracle::SvdResult sv = oracle::svd(m);
  const Vec s = capped_simplex_project(sv.singular);
  const Eigen::Index k = s.size();
  return sv.o_x.leftCols(k) * s.asDiagonal() * sv.o_y.leftCols(k).transpose();
}

MsgIterate msg_step(const MsgIterate& it, const TwoViewSample& s, double eta_k) {
  if (it.M.rows() != s.x.size() || it.M.cols() != s.y.size()) {
    throw InvalidInput("msg_step: dimension mismatch");
  }
  if (!s.x.allFinite() || !s.y.allFinite()) throw InvalidInput("msg_step: non-finite sample");
  if (!(eta_k >= 0.0)) throw InvalidInput("msg_step: step size must be ≥ 0");
  MsgIterate next;
  next.M = fantope_project(it.M + eta_k * s.x * s.y.transpose());
  next.step_count = it.step_count + 1;
  return next;
}

double msg_objective_gap(const MsgIterate& it, const Mat& sigma_xy, double lambda1) {
  if (it.M.rows() != sigma_xy.rows() || it.M.cols() != sigma_xy.cols()) {
    throw InvalidInput("msg_objective_gap: dimension mismatch");
  }
  return lambda1 - it.M.cwiseProduct(sigma_xy).sum();
}

PlsIterate msg_leading_pair(const MsgIterate& it) {
  PlsIterate out;
  out.step_count = it.step_count;
  if (it.M.norm() == 0.0) {
    out.u = Vec::Unit(it.M.rows(), 0);
    out.v = Vec::Unit(it.M.cols(), 0);
    return out;
  }
  const oracle::SvdResult sv = oracle::svd(it.M);
  out.u = sv.o_x.col(0);
  out.v = sv.o_y.col(0);
  return out;
}

}  // namespace spls
