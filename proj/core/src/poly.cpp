#include "homeofit/poly.hpp"

#include <Eigen/Dense>
#include <Eigen/SVD>
#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "homeofit/errors.hpp"
#include "column_scale.hpp"

namespace homeofit {
namespace {

double horner(std::span<const double> c, double x) noexcept {
  double acc = 0.0;
  for (auto it = c.rbegin(); it != c.rend(); ++it) acc = acc * x + *it;
  return acc;
}

// Clenshaw recurrence for sum c_n P_n(u).
double clenshaw_legendre(std::span<const double> c, double u) noexcept {
  const auto n = static_cast<int>(c.size()) - 1;
  if (n == 0) return c[0];
  double b1 = 0.0, b2 = 0.0;
  for (int k = n; k >= 1; --k) {
    // P_{k+1} = alpha_k P_k + beta_{k+1} P_{k-1},  alpha_k = (2k+1)u/(k+1), beta_k = -k/(k+1)
    const double alpha = (2.0 * k + 1.0) * u / (k + 1.0);
    const double beta = -(k + 1.0) / (k + 2.0);
    const double b0 = c[k] + alpha * b1 + beta * b2;
    b2 = b1;
    b1 = b0;
  }
  // P_0 = 1, P_1 = u, beta_1 = -1/2
  return c[0] + u * b1 - 0.5 * b2;
}

// Monomial coefficients (in u) of P_0..P_n.
std::vector<std::vector<double>> legendre_monomials(int n) {
  std::vector<std::vector<double>> table(n + 1, std::vector<double>(n + 1, 0.0));
  table[0][0] = 1.0;
  if (n >= 1) table[1][1] = 1.0;
  for (int k = 1; k < n; ++k) {
    for (int j = 0; j <= k; ++j) {
      table[k + 1][j + 1] += (2.0 * k + 1.0) * table[k][j] / (k + 1.0);
      table[k + 1][j] -= k * table[k - 1][j] / (k + 1.0);
    }
  }
  return table;
}

void require_convertible(const Polynomial& p) {
  if (p.degree() > kMaxConvertibleDegree) {
    throw Error(ErrorCode::kPrecondition,
                "monomial conversion is only offered up to degree 20");
  }
}

Eigen::MatrixXd legendre_vandermonde(std::span<const double> xs, const Interval& dom, int degree) {
  Eigen::MatrixXd v(static_cast<Eigen::Index>(xs.size()), degree + 1);
  for (Eigen::Index r = 0; r < v.rows(); ++r) {
    const double u = dom.to_unit(xs[static_cast<std::size_t>(r)]);
    v(r, 0) = 1.0;
    if (degree >= 1) v(r, 1) = u;
    for (int k = 1; k < degree; ++k) {
      v(r, k + 1) = ((2.0 * k + 1.0) * u * v(r, k) - k * v(r, k - 1)) / (k + 1.0);
    }
  }
  return v;
}

Eigen::MatrixXd mapped_vandermonde(std::span<const double> xs, const Interval& dom, int degree) {
  Eigen::MatrixXd v(static_cast<Eigen::Index>(xs.size()), degree + 1);
  for (Eigen::Index r = 0; r < v.rows(); ++r) {
    const double u = dom.to_unit(xs[static_cast<std::size_t>(r)]);
    v(r, 0) = 1.0;
    for (int k = 1; k <= degree; ++k) v(r, k) = v(r, k - 1) * u;
  }
  return v;
}

}  // namespace

Polynomial::Polynomial(Basis basis, std::vector<double> coeffs, Interval domain)
    : basis_(basis), coeffs_(std::move(coeffs)), domain_(domain) {
  if (coeffs_.empty()) throw Error(ErrorCode::kPrecondition, "polynomial needs at least one coefficient");
  if (!(domain_.lo < domain_.hi)) throw Error(ErrorCode::kPrecondition, "polynomial domain must satisfy a < b");
}

double Polynomial::operator()(double x) const noexcept {
  switch (basis_) {
    case Basis::kMonomial:
      return horner(coeffs_, x);
    case Basis::kMappedMonomial:
      return horner(coeffs_, domain_.to_unit(x));
    case Basis::kLegendre:
      return clenshaw_legendre(coeffs_, domain_.to_unit(x));
  }
  return std::numeric_limits<double>::quiet_NaN();
}

double eval(const Polynomial& p, double x) noexcept { return p(x); }

Polynomial Polynomial::to_mapped_monomial() const {
  require_convertible(*this);
  switch (basis_) {
    case Basis::kMappedMonomial:
      return *this;
    case Basis::kLegendre: {
      const auto table = legendre_monomials(degree());
      std::vector<double> out(coeffs_.size(), 0.0);
      for (std::size_t k = 0; k < coeffs_.size(); ++k)
        for (std::size_t j = 0; j <= k; ++j) out[j] += coeffs_[k] * table[k][j];
      return Polynomial(Basis::kMappedMonomial, std::move(out), domain_);
    }
    case Basis::kMonomial: {
      // x = c + h u; expand sum a_i (c + h u)^i by Horner on coefficient vectors.
      const double c = domain_.center(), h = domain_.half_width();
      std::vector<double> acc{coeffs_.back()};
      for (auto i = static_cast<int>(coeffs_.size()) - 2; i >= 0; --i) {
        std::vector<double> next(acc.size() + 1, 0.0);
        for (std::size_t j = 0; j < acc.size(); ++j) {
          next[j] += c * acc[j];
          next[j + 1] += h * acc[j];
        }
        next[0] += coeffs_[static_cast<std::size_t>(i)];
        acc = std::move(next);
      }
      return Polynomial(Basis::kMappedMonomial, std::move(acc), domain_);
    }
  }
  return *this;
}

Polynomial Polynomial::to_monomial() const {
  require_convertible(*this);
  if (basis_ == Basis::kMonomial) return *this;
  const Polynomial mapped = to_mapped_monomial();
  // u = (x - c) / h
  const double c = domain_.center(), inv_h = 1.0 / domain_.half_width();
  const auto coeffs = mapped.coeffs();
  std::vector<double> acc{coeffs.back()};
  for (auto i = static_cast<int>(coeffs.size()) - 2; i >= 0; --i) {
    std::vector<double> next(acc.size() + 1, 0.0);
    for (std::size_t j = 0; j < acc.size(); ++j) {
      next[j] += -c * inv_h * acc[j];
      next[j + 1] += inv_h * acc[j];
    }
    next[0] += coeffs[static_cast<std::size_t>(i)];
    acc = std::move(next);
  }
  return Polynomial(Basis::kMonomial, std::move(acc), domain_);
}

Polynomial derivative(const Polynomial& p) {
  const auto c = p.coeffs();
  const int n = p.degree();
  if (n == 0) return Polynomial(p.basis(), {0.0}, p.domain());
  std::vector<double> der(static_cast<std::size_t>(n), 0.0);
  switch (p.basis()) {
    case Basis::kMonomial:
    case Basis::kMappedMonomial: {
      const double chain = p.basis() == Basis::kMappedMonomial ? 1.0 / p.domain().half_width() : 1.0;
      for (int i = 1; i <= n; ++i) der[static_cast<std::size_t>(i - 1)] = i * c[static_cast<std::size_t>(i)] * chain;
      break;
    }
    case Basis::kLegendre: {
      std::vector<double> work(c.begin(), c.end());
      for (int j = n; j > 2; --j) {
        der[static_cast<std::size_t>(j - 1)] = (2.0 * j - 1.0) * work[static_cast<std::size_t>(j)];
        work[static_cast<std::size_t>(j - 2)] += work[static_cast<std::size_t>(j)];
      }
      if (n > 1) der[1] = 3.0 * work[2];
      der[0] = work[1];
      const double chain = 1.0 / p.domain().half_width();
      for (auto& d : der) d *= chain;
      break;
    }
  }
  return Polynomial(p.basis(), std::move(der), p.domain());
}

Polynomial fit_least_squares(std::span<const double> xs, std::span<const double> ys, int degree,
                             const LeastSquaresOptions& options) {
  if (degree < 0) throw Error(ErrorCode::kPrecondition, "degree must be non-negative");
  if (xs.size() != ys.size()) throw Error(ErrorCode::kPrecondition, "xs and ys differ in length");
  if (xs.size() < static_cast<std::size_t>(degree) + 1) {
    throw Error(ErrorCode::kPrecondition, "need at least degree+1 samples");
  }
  Interval dom;
  if (options.domain) {
    dom = *options.domain;
  } else {
    const auto [lo, hi] = std::minmax_element(xs.begin(), xs.end());
    dom = {*lo, *hi};
  }
  if (!(dom.lo < dom.hi)) throw Error(ErrorCode::kPrecondition, "sample abscissae span a degenerate interval");

  const Eigen::Map<const Eigen::VectorXd> rhs(ys.data(), static_cast<Eigen::Index>(ys.size()));
  Eigen::VectorXd coeffs;
  Basis basis = Basis::kLegendre;

  if (options.solver == LeastSquaresSolver::kOrthogonalQr) {
    const Eigen::MatrixXd v = legendre_vandermonde(xs, dom, degree);
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(v);
    qr.setThreshold(options.rank_tolerance);
    if (qr.rank() < v.cols()) {
      std::ostringstream msg;
      msg << "least-squares system is rank deficient: effective rank " << qr.rank() << " of " << v.cols();
      throw SingularSystemError(msg.str(), qr.rank());
    }
    coeffs = qr.solve(rhs);
  } else {
    basis = Basis::kMappedMonomial;
    Eigen::MatrixXd v = mapped_vandermonde(xs, dom, degree);
    // Unit-norm columns, so the cutoff judges directions rather than the
    // raw magnitude of high powers.
    const Eigen::VectorXd col_scale = detail::column_scale(v);
    v *= col_scale.asDiagonal();
    Eigen::BDCSVD<Eigen::MatrixXd> svd(v, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const Eigen::VectorXd& s = svd.singularValues();
    const double cutoff = options.pinv_rcond * s(0);
    Eigen::VectorXd proj = svd.matrixU().transpose() * rhs;
    for (Eigen::Index i = 0; i < s.size(); ++i) proj(i) = s(i) > cutoff ? proj(i) / s(i) : 0.0;
    coeffs = col_scale.asDiagonal() * (svd.matrixV() * proj);
  }
  return Polynomial(basis, std::vector<double>(coeffs.data(), coeffs.data() + coeffs.size()), dom);
}

double invert_on_monotone_interval(const Polynomial& p, const Interval& piece, double y,
                                   std::optional<double> tol) {
  const double tolerance = tol.value_or(default_inversion_tolerance(piece));
  double lo = piece.lo, hi = piece.hi;
  double f_lo = p(lo) - y, f_hi = p(hi) - y;
  if (std::abs(f_lo) <= tolerance) return lo;
  if (std::abs(f_hi) <= tolerance) return hi;
  if (f_lo * f_hi > 0.0) {
    std::ostringstream msg;
    msg << "value " << y << " lies outside p([" << piece.lo << ", " << piece.hi << "]) = [" << std::min(p(lo), p(hi))
        << ", " << std::max(p(lo), p(hi)) << "]";
    throw Error(ErrorCode::kOutOfRange, msg.str());
  }
  // Orient so that g = s*(p - y) is increasing: g(lo) < 0 < g(hi).
  const double s = f_lo < 0.0 ? 1.0 : -1.0;
  const Polynomial dp = derivative(p);
  // p' may vanish at the piece ends but must not change sign inside.
  constexpr int kProbes = 33;
  const double slope_scale = std::abs(f_hi - f_lo) / piece.width();
  for (int k = 1; k < kProbes; ++k) {
    const double t = piece.lo + piece.width() * k / kProbes;
    if (s * dp(t) < -1e-9 * slope_scale) {
      throw Error(ErrorCode::kPrecondition, "polynomial is not monotone on the requested piece");
    }
  }
  double x = 0.5 * (lo + hi);
  const double g_lo = s * f_lo, g_hi = s * f_hi;
  double prev_width = hi - lo;
  for (int iter = 0; iter < 400; ++iter) {
    const double g = s * (p(x) - y);
    if (std::abs(g) <= tolerance) return x;
    if (g < g_lo - tolerance || g > g_hi + tolerance) {
      throw Error(ErrorCode::kPrecondition, "polynomial is not monotone on the requested piece");
    }
    if (g < 0.0) lo = x; else hi = x;
    const double width_floor = 4.0 * std::numeric_limits<double>::epsilon() *
                               std::max({1.0, std::abs(lo), std::abs(hi)});
    if (hi - lo <= width_floor) return x;
    // Fall back to bisection whenever Newton fails to halve the bracket.
    const bool stalled = hi - lo > 0.5 * prev_width;
    prev_width = hi - lo;
    const double slope = s * dp(x);
    double next = (slope > 0.0 && !stalled) ? x - g / slope : lo - 1.0;
    if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
    x = next;
  }
  return x;
}

}  // namespace homeofit
