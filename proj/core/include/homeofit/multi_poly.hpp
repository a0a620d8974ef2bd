#pragma once

#include <Eigen/Core>
#include <span>
#include <vector>

#include "homeofit/poly.hpp"

namespace homeofit {

/// Exponent tuple (i_1, ..., i_D).
using MultiIndex = std::vector<int>;

/// All D-tuples with component sum <= max_degree, in lexicographic order.
/// The count is binomial(max_degree + dim, dim).
std::vector<MultiIndex> total_degree_indices(int dim, int max_degree);

/// binomial(n, k) as a size; exact for the sizes used here.
std::size_t binomial(int n, int k);

/// Total-degree expansion sum_c c_{i_1..i_D} phi_{i_1}(x_1) ... phi_{i_D}(x_D)
/// where phi is the 1D basis selected by `basis` on the per-axis `domain`.
struct MultiIndexExpansion {
  int dim = 1;
  int max_degree = 0;
  Basis basis = Basis::kMonomial;
  std::vector<Interval> domain;
  std::vector<MultiIndex> indices;
  Eigen::VectorXd coeffs;

  double operator()(std::span<const double> x) const;
  /// Values at the columns of a D x P point matrix.
  Eigen::VectorXd evaluate(const Eigen::MatrixXd& points) const;
};

/// Design matrix with one row per point (column of `points`) and one column
/// per multi-index.
Eigen::MatrixXd total_degree_design(const Eigen::MatrixXd& points, std::span<const MultiIndex> indices,
                                    Basis basis, std::span<const Interval> domain);

/// Least-squares total-degree fit. kOrthogonalQr uses a Legendre tensor
/// basis with column-pivoted QR; kPseudoinverse uses mapped monomials and
/// a truncated SVD (computed on the triangular factor of a QR).
MultiIndexExpansion fit_total_degree(const Eigen::MatrixXd& points, const Eigen::VectorXd& values, int degree,
                                     std::span<const Interval> domain, const LeastSquaresOptions& options = {});

}  // namespace homeofit
