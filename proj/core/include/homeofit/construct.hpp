#pragma once

#include <span>
#include <vector>

#include "homeofit/critical.hpp"
#include "homeofit/poly.hpp"

namespace homeofit {

/// Polynomial of degree M+1 with p(y_i) = f_i for i = 0..M+1 and
/// p'(y_j) = 0 at the M interior nodes.
struct ChandlerResult {
  Polynomial p = Polynomial::monomial({0.0});
  std::vector<double> nodes;        // y_0 < y_1 < ... < y_{M+1}
  double value_residual = 0.0;      // max_i |p(y_i) - f_i|
  double derivative_residual = 0.0; // max_j |p'(y_j)|, interior nodes
  int newton_iterations = 0;
};

struct ChandlerOptions {
  int max_iterations = 200;    // per continuation stage
  int max_halvings = 30;
  double tolerance = 1e-12;    // relative to 1 + max |f_i|
};

/// Builds the Chandler polynomial for an alternating value sequence.
/// Interior nodes are normalized to y_1 = 0 and y_M = 1 (M >= 2); for M = 1
/// the polynomial is +-y^2 + f_1; for M = 0 it is the linear map on [0, 1].
/// Throws kNotAlternating for invalid input and ConvergenceError when the
/// damped Newton continuation stalls.
ChandlerResult chandler_polynomial(std::span<const double> values, const ChandlerOptions& options = {});

/// Exact homeomorphism h with f = p o h, assembled piecewise from
/// h_i = (p restricted to J_i)^{-1} o f on I_i.
class PiecewiseHomeo {
 public:
  struct Piece {
    Interval source;       // I_i
    Interval target;       // J_i
    double blend = 0.0;    // weight of the linear ramp mixed into f (plateau pieces)
    double left_value = 0.0;
    double right_value = 0.0;
  };

  PiecewiseHomeo(ScalarFunction f, Polynomial p, std::vector<Piece> pieces, double range_tolerance);

  double operator()(double x) const;

  const std::vector<Piece>& pieces() const noexcept { return pieces_; }
  const Polynomial& polynomial() const noexcept { return p_; }
  Interval domain() const noexcept { return {pieces_.front().source.lo, pieces_.back().source.hi}; }
  Interval image() const noexcept { return {pieces_.front().target.lo, pieces_.back().target.hi}; }

  /// Largest jump |h_i(right end) - h_{i+1}(left end)| over the junctions.
  double junction_gap() const;

 private:
  double strictified(std::size_t piece, double x) const;
  double clamp_to_image(std::size_t piece, double y) const;

  ScalarFunction f_;
  Polynomial p_;
  std::vector<Piece> pieces_;
  double range_tolerance_;
};

struct ExactOptions {
  /// Ramp height for pieces that meet a plateau; defaults to 1e-9 * range(f).
  std::optional<double> strictify_eps;
  /// Allowed excursion of f outside p(J_i) before a range mismatch is raised;
  /// defaults to 1e-8 * (1 + range(f)).
  std::optional<double> range_tolerance;
};

/// Pairs the pieces of `cs` with the monotone branches of `cr.p`.
/// Throws kRangeMismatch if the critical values of `cs` and `cr` disagree.
PiecewiseHomeo exact_homeomorphism(const ScalarFunction& f, const CriticalSet& cs, const ChandlerResult& cr,
                                   const ExactOptions& options = {});

/// sup over an equidistant grid of |f(x) - p(h(x))|.
double composition_error(const ScalarFunction& f, const PiecewiseHomeo& h, int n_grid = 2001);

struct Sample {
  double x = 0.0;
  double y = 0.0;
};

/// Makes monotone samples strictly monotone by ramping every maximal
/// constant run. The added ramp never exceeds `eps` or half the gap to the
/// next distinct value.
std::vector<Sample> strictify(std::span<const Sample> samples, double eps);

/// Closed-form map for a function with one extremizer set containing x0:
/// f(x) = a0 + a2 * h(x)^2 with h(x) = sign(x - x0) sqrt(|f(x) - a0|).
struct SingleExtremumMap {
  double a0 = 0.0;
  double a2 = 1.0;
  double x0 = 0.0;
  ScalarFunction f;

  double h(double x) const;
};

/// Throws kNotSingleExtremum when f - f(x0) takes both signs beyond `tol`
/// on a 2001-point scan (default tol 1e-9 * (1 + range)).
SingleExtremumMap single_extremum_h(const ScalarFunction& f, double x0, const Interval& domain,
                                    std::optional<double> tol = std::nullopt);

}  // namespace homeofit
