#pragma once

#include "spls/types.hpp"

namespace spls::linalg {

// Modified Gram–Schmidt with one re-orthogonalization pass. Columns of the
// result are orthonormal; throws NumericalFailure on a rank-deficient input.
Mat gram_schmidt(const Mat& a);

// Extends the first `k` orthonormal columns of `q` to a full orthonormal
// basis of R^rows, filling columns k.. in place.
void complete_basis(Mat& q, Eigen::Index k);

// Index of the entry with the largest magnitude (first one on ties).
Eigen::Index argmax_abs(const Vec& v);

// +1 if the largest-magnitude entry is nonnegative, else -1.
double orientation(const Vec& v);

double max_abs(const Mat& a);

}  // namespace spls::linalg
