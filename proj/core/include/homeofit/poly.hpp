#pragma once

#include <optional>
#include <span>
#include <vector>

namespace homeofit {

struct Interval {
  double lo = -1.0;
  double hi = 1.0;

  double width() const noexcept { return hi - lo; }
  double center() const noexcept { return 0.5 * (lo + hi); }
  double half_width() const noexcept { return 0.5 * (hi - lo); }
  bool contains(double x) const noexcept { return x >= lo && x <= hi; }
  /// Affine map onto [-1, 1].
  double to_unit(double x) const noexcept { return (x - center()) / half_width(); }
  double from_unit(double u) const noexcept { return center() + half_width() * u; }
};

/// Basis the coefficient vector is expressed in.
///  - kMonomial:       sum a_i x^i (raw variable; domain is informational)
///  - kMappedMonomial: sum a_i u^i with u the affine image of x in [-1, 1]
///  - kLegendre:       sum a_i P_i(u), same mapping
enum class Basis { kMonomial, kMappedMonomial, kLegendre };

/// Highest degree for which conversion to a monomial representation is offered.
inline constexpr int kMaxConvertibleDegree = 20;

class Polynomial {
 public:
  /// Throws kPrecondition on empty coefficients or a degenerate domain.
  Polynomial(Basis basis, std::vector<double> coeffs, Interval domain = {});

  static Polynomial monomial(std::vector<double> coeffs, Interval domain = {}) {
    return Polynomial(Basis::kMonomial, std::move(coeffs), domain);
  }

  Basis basis() const noexcept { return basis_; }
  std::span<const double> coeffs() const noexcept { return coeffs_; }
  const Interval& domain() const noexcept { return domain_; }
  int degree() const noexcept { return static_cast<int>(coeffs_.size()) - 1; }

  double operator()(double x) const noexcept;

  /// Same function in the raw monomial basis. Only for degree <= 20.
  Polynomial to_monomial() const;
  /// Same function as powers of the mapped variable. Only for degree <= 20.
  Polynomial to_mapped_monomial() const;

 private:
  Basis basis_;
  std::vector<double> coeffs_;
  Interval domain_;
};

double eval(const Polynomial& p, double x) noexcept;

/// d/dx, expressed in the same basis. The derivative of a constant is the
/// zero polynomial of degree 0.
Polynomial derivative(const Polynomial& p);

enum class LeastSquaresSolver {
  /// Legendre basis on the data domain, column-pivoted Householder QR.
  kOrthogonalQr,
  /// Mapped-monomial Vandermonde with unit-norm columns, SVD pseudoinverse
  /// with relative cutoff.
  kPseudoinverse,
};

struct LeastSquaresOptions {
  LeastSquaresSolver solver = LeastSquaresSolver::kOrthogonalQr;
  /// Defaults to [min(xs), max(xs)].
  std::optional<Interval> domain;
  /// Relative threshold for rank decisions in the QR path.
  double rank_tolerance = 1e-13;
  /// Singular values below rcond * sigma_max are discarded.
  double pinv_rcond = 1e-15;
};

/// Least-squares polynomial of the given degree through (xs, ys).
/// Throws SingularSystemError (naming the effective rank) when the QR path
/// detects rank deficiency.
Polynomial fit_least_squares(std::span<const double> xs, std::span<const double> ys, int degree,
                             const LeastSquaresOptions& options = {});

/// Default value tolerance of `invert_on_monotone_interval`.
inline double default_inversion_tolerance(const Interval& piece) noexcept {
  return 1e-12 * (1.0 + piece.width());
}

/// Solves p(x) = y for x in `piece`, assuming p strictly monotone there.
/// Safeguarded Newton iteration inside a shrinking bisection bracket.
/// Throws kOutOfRange when y is outside p(piece) by more than `tol` and
/// kPrecondition when the bracket reveals that p is not monotone.
double invert_on_monotone_interval(const Polynomial& p, const Interval& piece, double y,
                                   std::optional<double> tol = std::nullopt);

}  // namespace homeofit
