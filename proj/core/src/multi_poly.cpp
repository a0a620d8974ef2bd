#include "homeofit/multi_poly.hpp"

#include <Eigen/Dense>
#include <Eigen/SVD>
#include <sstream>

#include "homeofit/errors.hpp"
#include "homeofit/parallel.hpp"
#include "column_scale.hpp"

namespace homeofit {
namespace {

void append_indices(int dim, int remaining, MultiIndex& prefix, std::vector<MultiIndex>& out) {
  if (static_cast<int>(prefix.size()) == dim) {
    out.push_back(prefix);
    return;
  }
  for (int i = 0; i <= remaining; ++i) {
    prefix.push_back(i);
    append_indices(dim, remaining - i, prefix, out);
    prefix.pop_back();
  }
}

// Per-axis 1D basis table: values(k, p) = phi_k(u_p) for k = 0..degree.
Eigen::MatrixXd axis_table(const Eigen::RowVectorXd& coord, Basis basis, const Interval& dom, int degree) {
  Eigen::MatrixXd t(degree + 1, coord.size());
  for (Eigen::Index p = 0; p < coord.size(); ++p) {
    const double u = basis == Basis::kMonomial ? coord(p) : dom.to_unit(coord(p));
    t(0, p) = 1.0;
    if (degree >= 1) t(1, p) = u;
    for (int k = 1; k < degree; ++k) {
      t(k + 1, p) = basis == Basis::kLegendre ? ((2.0 * k + 1.0) * u * t(k, p) - k * t(k - 1, p)) / (k + 1.0)
                                              : t(k, p) * u;
    }
  }
  return t;
}

int max_component(std::span<const MultiIndex> indices) {
  int m = 0;
  for (const auto& idx : indices)
    for (int e : idx) m = std::max(m, e);
  return m;
}

}  // namespace

std::vector<MultiIndex> total_degree_indices(int dim, int max_degree) {
  if (dim < 1 || max_degree < 0) throw Error(ErrorCode::kPrecondition, "need dim >= 1 and max_degree >= 0");
  std::vector<MultiIndex> out;
  out.reserve(binomial(max_degree + dim, dim));
  MultiIndex prefix;
  append_indices(dim, max_degree, prefix, out);
  return out;
}

std::size_t binomial(int n, int k) {
  if (k < 0 || k > n) return 0;
  std::size_t r = 1;
  for (int i = 1; i <= k; ++i) r = r * static_cast<std::size_t>(n - k + i) / static_cast<std::size_t>(i);
  return r;
}

Eigen::MatrixXd total_degree_design(const Eigen::MatrixXd& points, std::span<const MultiIndex> indices,
                                    Basis basis, std::span<const Interval> domain) {
  const auto dim = points.rows();
  if (basis != Basis::kMonomial && static_cast<Eigen::Index>(domain.size()) != dim) {
    throw Error(ErrorCode::kPrecondition, "design needs one domain interval per axis");
  }
  const int degree = max_component(indices);
  std::vector<Eigen::MatrixXd> tables;
  tables.reserve(static_cast<std::size_t>(dim));
  for (Eigen::Index d = 0; d < dim; ++d) {
    const Interval dom = basis == Basis::kMonomial ? Interval{} : domain[static_cast<std::size_t>(d)];
    tables.push_back(axis_table(points.row(d), basis, dom, degree));
  }
  Eigen::MatrixXd design(points.cols(), static_cast<Eigen::Index>(indices.size()));
  for (std::size_t c = 0; c < indices.size(); ++c) {
    auto col = design.col(static_cast<Eigen::Index>(c));
    col.setOnes();
    for (Eigen::Index d = 0; d < dim; ++d) {
      const int e = indices[c][static_cast<std::size_t>(d)];
      if (e > 0) col.array() *= tables[static_cast<std::size_t>(d)].row(e).transpose().array();
    }
  }
  return design;
}

double MultiIndexExpansion::operator()(std::span<const double> x) const {
  Eigen::MatrixXd pt(dim, 1);
  for (int d = 0; d < dim; ++d) pt(d, 0) = x[static_cast<std::size_t>(d)];
  return evaluate(pt)(0);
}

Eigen::VectorXd MultiIndexExpansion::evaluate(const Eigen::MatrixXd& points) const {
  constexpr std::size_t kChunk = 4096;
  const auto n = static_cast<std::size_t>(points.cols());
  Eigen::VectorXd out(points.cols());
  for_each_chunk(n, kChunk, [&](std::size_t, std::size_t begin, std::size_t end) {
    const auto b = static_cast<Eigen::Index>(begin), len = static_cast<Eigen::Index>(end - begin);
    const Eigen::MatrixXd block = points.middleCols(b, len);
    out.segment(b, len) = total_degree_design(block, indices, basis, domain) * coeffs;
  });
  return out;
}

MultiIndexExpansion fit_total_degree(const Eigen::MatrixXd& points, const Eigen::VectorXd& values, int degree,
                                     std::span<const Interval> domain, const LeastSquaresOptions& options) {
  const auto dim = static_cast<int>(points.rows());
  if (points.cols() != values.size()) throw Error(ErrorCode::kPrecondition, "points and values differ in count");
  if (static_cast<int>(domain.size()) != dim) throw Error(ErrorCode::kPrecondition, "need one domain interval per axis");

  MultiIndexExpansion fit;
  fit.dim = dim;
  fit.max_degree = degree;
  fit.domain.assign(domain.begin(), domain.end());
  fit.indices = total_degree_indices(dim, degree);
  const auto n_basis = static_cast<Eigen::Index>(fit.indices.size());
  if (points.cols() < n_basis) throw Error(ErrorCode::kPrecondition, "fewer samples than basis functions");

  if (options.solver == LeastSquaresSolver::kOrthogonalQr) {
    fit.basis = Basis::kLegendre;
    const Eigen::MatrixXd design = total_degree_design(points, fit.indices, fit.basis, domain);
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(design);
    qr.setThreshold(options.rank_tolerance);
    if (qr.rank() < n_basis) {
      std::ostringstream msg;
      msg << "least-squares system is rank deficient: effective rank " << qr.rank() << " of " << n_basis;
      throw SingularSystemError(msg.str(), qr.rank());
    }
    fit.coeffs = qr.solve(values);
    return fit;
  }

  fit.basis = Basis::kMappedMonomial;
  Eigen::MatrixXd design = total_degree_design(points, fit.indices, fit.basis, domain);
  const Eigen::VectorXd col_scale = detail::column_scale(design);
  design *= col_scale.asDiagonal();
  // A = Q R, so pinv(A) = pinv(R) Q^T with identical singular values.
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(design);
  const Eigen::MatrixXd r = qr.matrixQR().topRows(n_basis).triangularView<Eigen::Upper>();
  const Eigen::VectorXd qtb = (qr.householderQ().transpose() * values).head(n_basis);
  Eigen::BDCSVD<Eigen::MatrixXd> svd(r, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const Eigen::VectorXd& s = svd.singularValues();
  const double cutoff = options.pinv_rcond * s(0);
  Eigen::VectorXd proj = svd.matrixU().transpose() * qtb;
  for (Eigen::Index i = 0; i < s.size(); ++i) proj(i) = s(i) > cutoff ? proj(i) / s(i) : 0.0;
  fit.coeffs = col_scale.asDiagonal() * (svd.matrixV() * proj);
  return fit;
}

}  // namespace homeofit
