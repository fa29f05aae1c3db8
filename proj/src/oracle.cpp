#include "spls/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include <omp.h>

#include "spls/datagen.hpp"
#include "spls/linalg.hpp"

namespace spls::oracle {

namespace {

constexpr int kMaxSweeps = 60;
constexpr double kEps = std::numeric_limits<double>::epsilon();

struct OneSided {
  Mat u;  // m×n, orthonormal where singular > 0
  Vec s;
  Mat v;  // n×n
};

// One-sided Jacobi on a tall (m ≥ n) matrix.
OneSided one_sided_jacobi(const Mat& a) {
  const Eigen::Index m = a.rows();
  const Eigen::Index n = a.cols();
  Mat g = a;
  Mat v = Mat::Identity(n, n);
  const double fro = a.norm();
  const double tol = std::max<double>(static_cast<double>(m), 1.0) * kEps;
  // pairs whose cross term is below this are treated as orthogonal even if
  // both columns are numerically zero
  const double floor = (1e-12 * fro) * (1e-12 * fro);

  bool converged = (n < 2) || fro == 0.0;
  for (int sweep = 0; sweep < kMaxSweeps && !converged; ++sweep) {
    bool rotated = false;
    for (Eigen::Index i = 0; i + 1 < n; ++i) {
      for (Eigen::Index j = i + 1; j < n; ++j) {
        const double alpha = g.col(i).squaredNorm();
        const double beta = g.col(j).squaredNorm();
        const double gamma = g.col(i).dot(g.col(j));
        if (std::abs(gamma) <= tol * std::sqrt(alpha * beta) ||
            std::abs(gamma) <= floor) {
          continue;
        }
        rotated = true;
        const double zeta = (beta - alpha) / (2.0 * gamma);
        const double t = std::copysign(1.0, zeta) /
                         (std::abs(zeta) + std::sqrt(1.0 + zeta * zeta));
        const double c = 1.0 / std::sqrt(1.0 + t * t);
        const double s = c * t;
        for (Eigen::Index k = 0; k < m; ++k) {
          const double gi = g(k, i);
          const double gj = g(k, j);
          g(k, i) = c * gi - s * gj;
          g(k, j) = s * gi + c * gj;
        }
        for (Eigen::Index k = 0; k < n; ++k) {
          const double vi = v(k, i);
          const double vj = v(k, j);
          v(k, i) = c * vi - s * vj;
          v(k, j) = s * vi + c * vj;
        }
      }
    }
    converged = !rotated;
  }
  if (!converged) {
    throw NumericalFailure("svd: one-sided Jacobi did not converge in 60 sweeps");
  }

  OneSided out{Mat::Zero(m, n), Vec(n), v};
  for (Eigen::Index j = 0; j < n; ++j) out.s(j) = g.col(j).norm();

  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](Eigen::Index l, Eigen::Index r) { return out.s(l) > out.s(r); });

  Vec s_sorted(n);
  Mat v_sorted(n, n);
  Mat g_sorted(m, n);
  for (Eigen::Index k = 0; k < n; ++k) {
    s_sorted(k) = out.s(order[k]);
    v_sorted.col(k) = v.col(order[k]);
    g_sorted.col(k) = g.col(order[k]);
  }
  out.s = s_sorted;
  out.v = v_sorted;
  out.u = g_sorted;
  return out;
}

}  // namespace

Eigen::Index SvdResult::rank() const {
  if (singular.size() == 0) return 0;
  const double thresh =
      static_cast<double>(std::max(o_x.rows(), o_y.rows())) * kEps * singular(0);
  Eigen::Index r = 0;
  while (r < singular.size() && singular(r) > thresh) ++r;
  return r;
}

SvdResult svd(const Mat& a) {
  if (!a.allFinite()) throw InvalidInput("svd: non-finite input");
  if (a.rows() < a.cols()) {
    SvdResult t = svd(a.transpose());
    return SvdResult{t.o_y, t.singular, t.o_x};
  }
  const Eigen::Index m = a.rows();
  const Eigen::Index n = a.cols();
  OneSided js = one_sided_jacobi(a);

  SvdResult out;
  out.singular = js.s;
  out.o_y = js.v;
  out.o_x = Mat::Zero(m, m);

  const double thresh = static_cast<double>(std::max(m, n)) * kEps *
                        (n > 0 ? js.s(0) : 0.0);
  Eigen::Index r = 0;
  while (r < n && js.s(r) > thresh) {
    out.o_x.col(r) = js.u.col(r) / js.s(r);
    ++r;
  }
  // Columns of G are orthogonal only to working precision; re-orthonormalize
  // the range part before completing it.
  if (r > 0) out.o_x.leftCols(r) = linalg::gram_schmidt(out.o_x.leftCols(r));
  linalg::complete_basis(out.o_x, r);
  for (Eigen::Index k = r; k < n; ++k) out.singular(k) = 0.0;

  // Right vectors of zero singular values are not tied to a left vector.
  for (Eigen::Index k = 0; k < r; ++k) {
    const double sgn = linalg::orientation(out.o_x.col(k));
    out.o_x.col(k) *= sgn;
    out.o_y.col(k) *= sgn;
  }
  for (Eigen::Index k = r; k < m; ++k) out.o_x.col(k) *= linalg::orientation(out.o_x.col(k));
  for (Eigen::Index k = r; k < n; ++k) out.o_y.col(k) *= linalg::orientation(out.o_y.col(k));
  return out;
}

SymmetricEigen symmetric_eigen(const Mat& s_in) {
  if (s_in.rows() != s_in.cols()) throw InvalidInput("symmetric_eigen: matrix not square");
  if (!s_in.allFinite()) throw InvalidInput("symmetric_eigen: non-finite input");
  const Eigen::Index n = s_in.rows();
  Mat a = 0.5 * (s_in + s_in.transpose());
  Mat v = Mat::Identity(n, n);
  const double fro = a.norm();

  bool converged = n < 2 || fro == 0.0;
  for (int sweep = 0; sweep < kMaxSweeps && !converged; ++sweep) {
    double off = 0.0;
    for (Eigen::Index p = 0; p < n; ++p)
      for (Eigen::Index q = p + 1; q < n; ++q) off += a(p, q) * a(p, q);
    if (std::sqrt(off) <= kEps * fro * static_cast<double>(n)) {
      converged = true;
      break;
    }
    for (Eigen::Index p = 0; p + 1 < n; ++p) {
      for (Eigen::Index q = p + 1; q < n; ++q) {
        const double apq = a(p, q);
        if (std::abs(apq) <= 0.1 * kEps * fro / static_cast<double>(n)) continue;
        const double theta = (a(q, q) - a(p, p)) / (2.0 * apq);
        const double t = std::copysign(1.0, theta) /
                         (std::abs(theta) + std::sqrt(1.0 + theta * theta));
        const double c = 1.0 / std::sqrt(1.0 + t * t);
        const double s = t * c;
        // A ← Jᵀ A J with J the rotation in the (p, q) plane
        for (Eigen::Index k = 0; k < n; ++k) {
          const double akp = a(k, p);
          const double akq = a(k, q);
          a(k, p) = c * akp - s * akq;
          a(k, q) = s * akp + c * akq;
        }
        for (Eigen::Index k = 0; k < n; ++k) {
          const double apk = a(p, k);
          const double aqk = a(q, k);
          a(p, k) = c * apk - s * aqk;
          a(q, k) = s * apk + c * aqk;
        }
        a(p, q) = 0.0;
        a(q, p) = 0.0;
        for (Eigen::Index k = 0; k < n; ++k) {
          const double vkp = v(k, p);
          const double vkq = v(k, q);
          v(k, p) = c * vkp - s * vkq;
          v(k, q) = s * vkp + c * vkq;
        }
      }
    }
  }
  if (!converged) {
    throw NumericalFailure("symmetric_eigen: Jacobi did not converge in 60 sweeps");
  }

  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](Eigen::Index l, Eigen::Index r) { return a(l, l) > a(r, r); });
  SymmetricEigen out{Vec(n), Mat(n, n)};
  for (Eigen::Index k = 0; k < n; ++k) {
    out.values(k) = a(order[k], order[k]);
    out.vectors.col(k) = v.col(order[k]) * linalg::orientation(v.col(order[k]));
  }
  return out;
}

namespace {

void check_samples(std::span<const TwoViewSample> samples) {
  if (samples.empty()) throw InvalidInput("empirical_cov: no samples");
  const auto m = samples.front().x.size();
  const auto d = samples.front().y.size();
  for (const auto& s : samples) {
    if (s.x.size() != m || s.y.size() != d) {
      throw InvalidInput("empirical_cov: inconsistent sample dimensions");
    }
  }
}

Mat finish_cov(Mat sxy, const Vec& sx, const Vec& sy, double n, bool center) {
  sxy /= n;
  if (center) sxy -= (sx / n) * (sy / n).transpose();
  return sxy;
}

}  // namespace

Mat empirical_cov(std::span<const TwoViewSample> samples, bool center) {
  check_samples(samples);
  const auto m = samples.front().x.size();
  const auto d = samples.front().y.size();
  Mat acc = Mat::Zero(m, d);
  Vec sx = Vec::Zero(m);
  Vec sy = Vec::Zero(d);
  for (const auto& s : samples) {
    acc.noalias() += s.x * s.y.transpose();
    sx += s.x;
    sy += s.y;
  }
  return finish_cov(acc, sx, sy, static_cast<double>(samples.size()), center);
}

Mat empirical_cov_parallel(std::span<const TwoViewSample> samples, bool center) {
  check_samples(samples);
  const auto m = samples.front().x.size();
  const auto d = samples.front().y.size();
  const auto n = static_cast<std::ptrdiff_t>(samples.size());
  Mat acc = Mat::Zero(m, d);
  Vec sx = Vec::Zero(m);
  Vec sy = Vec::Zero(d);
#pragma omp parallel
  {
    Mat local = Mat::Zero(m, d);
    Vec lx = Vec::Zero(m);
    Vec ly = Vec::Zero(d);
#pragma omp for schedule(static) nowait
    for (std::ptrdiff_t k = 0; k < n; ++k) {
      const auto& s = samples[static_cast<std::size_t>(k)];
      local.noalias() += s.x * s.y.transpose();
      lx += s.x;
      ly += s.y;
    }
#pragma omp critical
    {
      acc += local;
      sx += lx;
      sy += ly;
    }
  }
  return finish_cov(acc, sx, sy, static_cast<double>(samples.size()), center);
}

Vec fd_gradient(const std::function<double(const Vec&)>& f, const Vec& x0, double h) {
  Vec g(x0.size());
  Vec x = x0;
  for (Eigen::Index i = 0; i < x0.size(); ++i) {
    const double xi = x(i);
    x(i) = xi + h;
    const double fp = f(x);
    x(i) = xi - h;
    const double fm = f(x);
    x(i) = xi;
    g(i) = (fp - fm) / (2.0 * h);
  }
  return g;
}

MomentEstimate mc_moments(const CovarianceModel& model, std::size_t n, Rng& rng) {
  if (n < 2) throw InvalidInput("mc_moments: need at least 2 draws");
  const Eigen::Index d = static_cast<Eigen::Index>(model.d);
  const Eigen::Index m = static_cast<Eigen::Index>(model.m);
  const Mat& l = model.latent_chol;
  std::normal_distribution<double> normal;

  Vec xi(m + d);
  Vec z(m + d);
  Vec s_x2 = Vec::Zero(d), s_x4 = Vec::Zero(d);
  Vec s_y2 = Vec::Zero(d), s_y4 = Vec::Zero(d);
  Mat s_a = Mat::Zero(d, d), s_a2 = Mat::Zero(d, d);
  Vec prod(d);
  for (std::size_t k = 0; k < n; ++k) {
    for (Eigen::Index i = 0; i < xi.size(); ++i) xi(i) = normal(rng);
    z.noalias() = l.triangularView<Eigen::Lower>() * xi;
    const auto xbar = z.head(d);
    const auto ybar = z.segment(m, d);
    const Vec x2 = xbar.array().square();
    const Vec y2 = ybar.array().square();
    s_x2 += x2;
    s_x4 += x2.array().square().matrix();
    s_y2 += y2;
    s_y4 += y2.array().square().matrix();
    prod = xbar.array() * ybar.array();
    const Mat outer = prod * prod.transpose();
    s_a += outer;
    s_a2 += outer.array().square().matrix();
  }
  const double nn = static_cast<double>(n);
  auto se = [nn](double mean, double mean_sq) {
    return std::sqrt(std::max(mean_sq - mean * mean, 0.0) / (nn - 1.0));
  };
  MomentEstimate est;
  est.value.gamma = s_x2 / nn;
  est.value.omega = s_y2 / nn;
  est.value.alpha = s_a / nn;
  est.gamma_se.resize(d);
  est.omega_se.resize(d);
  est.alpha_se.resize(d, d);
  for (Eigen::Index i = 0; i < d; ++i) {
    est.gamma_se(i) = se(est.value.gamma(i), s_x4(i) / nn);
    est.omega_se(i) = se(est.value.omega(i), s_y4(i) / nn);
    for (Eigen::Index j = 0; j < d; ++j) {
      est.alpha_se(i, j) = se(est.value.alpha(i, j), s_a2(i, j) / nn);
    }
  }
  return est;
}

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

double inverse_normal_cdf(double q) {
  if (!(q > 0.0 && q < 1.0)) {
    throw InvalidInput("inverse_normal_cdf: q must lie in (0,1)");
  }
  static constexpr double a[] = {-3.969683028665376e+01, 2.209460984245205e+02,
                                 -2.759285104469687e+02, 1.383577518672690e+02,
                                 -3.066479806614716e+01, 2.506628277459239e+00};
  static constexpr double b[] = {-5.447609879822406e+01, 1.615858368580409e+02,
                                 -1.556989798598866e+02, 6.680131188771972e+01,
                                 -1.328068155288572e+01};
  static constexpr double c[] = {-7.784894002430293e-03, -3.223964580411365e-01,
                                 -2.400758277161838e+00, -2.549732539343734e+00,
                                 4.374664141464968e+00, 2.938163982698783e+00};
  static constexpr double d[] = {7.784695709041462e-03, 3.224671290700398e-01,
                                 2.445134137142996e+00, 3.754408661907416e+00};
  constexpr double p_low = 0.02425;

  double x;
  if (q < p_low) {
    const double r = std::sqrt(-2.0 * std::log(q));
    x = (((((c[0] * r + c[1]) * r + c[2]) * r + c[3]) * r + c[4]) * r + c[5]) /
        ((((d[0] * r + d[1]) * r + d[2]) * r + d[3]) * r + 1.0);
  } else if (q <= 1.0 - p_low) {
    const double r0 = q - 0.5;
    const double r = r0 * r0;
    x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * r0 /
        (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
  } else {
    const double r = std::sqrt(-2.0 * std::log1p(-q));
    x = -(((((c[0] * r + c[1]) * r + c[2]) * r + c[3]) * r + c[4]) * r + c[5]) /
        ((((d[0] * r + d[1]) * r + d[2]) * r + d[3]) * r + 1.0);
  }
  // Halley refinement on Φ(x) − q; the upper tail uses the complementary
  // form to avoid cancellation.
  const double pdf = std::exp(-0.5 * x * x) / std::sqrt(2.0 * M_PI);
  const double err = q > 0.5 ? (1.0 - q) - 0.5 * std::erfc(x / std::sqrt(2.0))
                             : normal_cdf(x) - q;
  const double u = err / pdf;
  x -= u / (1.0 + 0.5 * x * u);
  return x;
}

}  // namespace spls::oracle
