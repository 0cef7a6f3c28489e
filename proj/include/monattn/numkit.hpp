#ifndef MONATTN_NUMKIT_HPP
#define MONATTN_NUMKIT_HPP

#include <Eigen/Dense>

namespace monattn {

// 64-bit reals everywhere; matrices are row-major so flat serialization
// order matches the documented checkpoint layout.
using Vec = Eigen::VectorXd;
using Mat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// Throws std::domain_error if any entry is NaN or infinite.
void require_finite(const Vec& v, const char* what);
void require_finite(const Mat& m, const char* what);

// Numerically safe softmax (max-subtraction). Output sums to 1 within
// 1e-12 for any finite input. Empty input is a domain error.
Vec softmax(const Vec& e);

// Logistic sigmoid, stable for large |x|. Result is in (0, 1) for any
// finite x down to the underflow limit (~ -745).
double sigmoid(double x);

// Inclusive prefix sum: out[k] = sum of v[0..k].
Vec cumsum(const Vec& v);

// Exclusive prefix product: out[0] = 1, out[k] = v[0] * ... * v[k-1].
// Entries must lie in [0, 1]. Exact sequential form; zeros annihilate.
Vec exclusive_cumprod(const Vec& v);

// Log-space exclusive prefix product for entries in [0, 1]:
// exp(sum log(max(v[i], 1e-300))), each output floored at eps. Intended
// for denominator use where a hard lower bound is required.
Vec exclusive_cumprod_stable(const Vec& v, double eps);

}  // namespace monattn

#endif  // MONATTN_NUMKIT_HPP
