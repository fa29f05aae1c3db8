#include "spls/linalg.hpp"

#include <cmath>

namespace spls::linalg {

namespace {

// Orthogonalizes column j of q against columns [0, j) twice and returns the
// remaining norm before normalization.
double orthogonalize_column(Mat& q, Eigen::Index j) {
  for (int pass = 0; pass < 2; ++pass) {
    for (Eigen::Index i = 0; i < j; ++i) {
      const double r = q.col(i).dot(q.col(j));
      q.col(j) -= r * q.col(i);
    }
  }
  return q.col(j).norm();
}

}  // namespace

Mat gram_schmidt(const Mat& a) {
  Mat q = a;
  for (Eigen::Index j = 0; j < q.cols(); ++j) {
    const double before = q.col(j).norm();
    const double after = orthogonalize_column(q, j);
    if (!(after > 1e-12 * std::max(before, 1.0))) {
      throw NumericalFailure("gram_schmidt: column " + std::to_string(j) +
                             " is linearly dependent");
    }
    q.col(j) /= after;
  }
  return q;
}

void complete_basis(Mat& q, Eigen::Index k) {
  const Eigen::Index n = q.rows();
  Eigen::Index filled = k;
  for (Eigen::Index e = 0; e < n && filled < q.cols(); ++e) {
    q.col(filled).setZero();
    q(e, filled) = 1.0;
    const double r = orthogonalize_column(q, filled);
    // a unit vector keeps at least 1/sqrt(n) of its mass outside any
    // proper subspace for some e; 0.5/sqrt(n) rejects near-duplicates
    if (r > 0.5 / std::sqrt(static_cast<double>(n))) {
      q.col(filled) /= r;
      ++filled;
    }
  }
  if (filled < q.cols()) {
    throw NumericalFailure("complete_basis: could not extend basis");
  }
}

Eigen::Index argmax_abs(const Vec& v) {
  Eigen::Index best = 0;
  for (Eigen::Index i = 1; i < v.size(); ++i) {
    if (std::abs(v(i)) > std::abs(v(best))) best = i;
  }
  return best;
}

double orientation(const Vec& v) {
  if (v.size() == 0) return 1.0;
  return v(argmax_abs(v)) < 0.0 ? -1.0 : 1.0;
}

double max_abs(const Mat& a) { return a.size() == 0 ? 0.0 : a.cwiseAbs().maxCoeff(); }

}  // namespace spls::linalg
