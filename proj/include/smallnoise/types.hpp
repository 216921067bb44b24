#pragma once

#include <Eigen/Dense>

namespace smallnoise {

/// Upper bound on the state dimension p and on each parameter block (a, b).
/// Vectors and matrices carry their storage inline so the flow integrator
/// never touches the heap inside its inner loop.
inline constexpr int kMaxDim = 8;

using Vec = Eigen::Matrix<double, Eigen::Dynamic, 1, 0, kMaxDim, 1>;
using Mat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, 0, kMaxDim, kMaxDim>;

/// Optimizer space: (alpha, beta) stacked, unbounded size.
using DVec = Eigen::VectorXd;
using DMat = Eigen::MatrixXd;

}  // namespace smallnoise
