#pragma once

#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "homeofit/poly.hpp"

namespace homeofit {

using ScalarFunction = std::function<double(double)>;

/// One set of local extremizers: a point (lower == upper) or a closed
/// interval of constancy.
struct Extremizer {
  double lower = 0.0;
  double upper = 0.0;
  double value = 0.0;
  bool plateau = false;
  bool is_minimum = false;

  /// Point used to split the domain; the midpoint for plateaus.
  double representative() const noexcept { return 0.5 * (lower + upper); }
};

/// Ordered critical set of a univariate function on `domain`.
struct CriticalSet {
  Interval domain;
  std::vector<Extremizer> extremizers;
  double left_value = 0.0;   // f(x_0)
  double right_value = 0.0;  // f(x_{M+1})
  /// +1 when the value sequence starts by increasing, -1 otherwise.
  int sign = 1;

  std::size_t count() const noexcept { return extremizers.size(); }
  /// (f(x_0), f_1, ..., f_M, f(x_{M+1})).
  std::vector<double> value_sequence() const;
  /// (x_0, r_1, ..., r_M, x_{M+1}) with r_i the representatives.
  std::vector<double> node_sequence() const;
};

struct CriticalScanOptions {
  int n_scan = 2001;
  /// Differences at or below this magnitude count as flat. Defaults to
  /// 1e-9 * (1 + range of the scanned values).
  std::optional<double> plateau_tol;
  /// Target bracket width for golden-section refinement of point extrema.
  double x_tol = 1e-10;
};

/// Sign s with s * (-1)^i * (v[i+1] - v[i]) > 0 for all i. Throws
/// kNotAlternating if neither sign works and kPrecondition for fewer than
/// two values.
int alternation_sign(std::span<const double> values);

/// Scans f on an equidistant grid and returns its critical set. Throws
/// kConstantFunction when f has no variation above the plateau tolerance
/// and kInternalConsistency when refined extrema fail to alternate.
CriticalSet find_critical_sets(const ScalarFunction& f, const Interval& domain,
                               const CriticalScanOptions& options = {});

/// Pieces I_0..I_M covering the domain, split at the representatives.
std::vector<Interval> piece_decomposition(const Interval& domain, const CriticalSet& cs);

}  // namespace homeofit
