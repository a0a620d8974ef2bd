#pragma once

#include <Eigen/Core>

namespace homeofit::detail {

// Reciprocal 2-norms of the columns of `a`; 1 for zero columns.
inline Eigen::VectorXd column_scale(const Eigen::MatrixXd& a) {
  Eigen::VectorXd scale(a.cols());
  for (Eigen::Index j = 0; j < a.cols(); ++j) {
    const double n = a.col(j).norm();
    scale(j) = n > 0.0 ? 1.0 / n : 1.0;
  }
  return scale;
}

}  // namespace homeofit::detail
