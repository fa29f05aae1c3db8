#pragma once

#include <functional>
#include <span>

#include "spls/types.hpp"

namespace spls {

struct CovarianceModel;

namespace oracle {

// Full SVD  A = o_x · diag(singular) · o_yᵀ  with o_x (m×m) and o_y (d×d)
// orthogonal and singular values sorted descending.
struct SvdResult {
  Mat o_x;
  Vec singular;
  Mat o_y;

  // Number of singular values above max(m,d)·eps·σ₁.
  Eigen::Index rank() const;
};

// Cyclic one-sided (Hestenes) Jacobi SVD.
//
// Each singular pair is oriented so that the largest-magnitude entry of the
// left vector is positive; completion columns spanning the null spaces are
// oriented individually. Throws NumericalFailure after 60 sweeps without
// convergence and InvalidInput on non-finite input.
SvdResult svd(const Mat& a);

// Eigen-decomposition of a symmetric matrix, eigenvalues descending and
// eigenvectors (columns) sign-oriented like svd().
struct SymmetricEigen {
  Vec values;
  Mat vectors;
};

// Cyclic two-sided Jacobi eigensolver for symmetric matrices.
SymmetricEigen symmetric_eigen(const Mat& s);

// (1/n) Σ x_k y_kᵀ, optionally with the empirical means removed.
Mat empirical_cov(std::span<const TwoViewSample> samples, bool center = false);

// OpenMP version of empirical_cov; agrees with the serial reference up to
// summation order.
Mat empirical_cov_parallel(std::span<const TwoViewSample> samples,
                           bool center = false);

// Central differences, one coordinate at a time.
Vec fd_gradient(const std::function<double(const Vec&)>& f, const Vec& x0,
                double h = 1e-6);

struct MomentEstimate {
  LatentMoments value;
  Vec gamma_se;
  Vec omega_se;
  Mat alpha_se;
};

// Monte-Carlo estimate of the latent moments from n pre-mixing draws.
MomentEstimate mc_moments(const CovarianceModel& model, std::size_t n, Rng& rng);

double normal_cdf(double x);

// Φ⁻¹(q): Acklam's rational approximation followed by one Halley step.
double inverse_normal_cdf(double q);

}  // namespace oracle
}  // namespace spls
