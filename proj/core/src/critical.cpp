#include "homeofit/critical.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "homeofit/errors.hpp"

namespace homeofit {
namespace {

// Golden-section search for the minimizer of sign*f on [a, b].
double golden_minimize(const ScalarFunction& f, double sign, double a, double b, double x_tol) {
  constexpr double kInvPhi = 0.6180339887498949;
  double c = b - kInvPhi * (b - a);
  double d = a + kInvPhi * (b - a);
  double fc = sign * f(c), fd = sign * f(d);
  while (b - a > x_tol) {
    if (fc <= fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - kInvPhi * (b - a);
      fc = sign * f(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + kInvPhi * (b - a);
      fd = sign * f(d);
    }
  }
  return 0.5 * (a + b);
}

// Locates where |f - level| crosses tol between `outside` and `inside`
// (|f(inside) - level| <= tol assumed). Falls back to `inside`.
double refine_plateau_edge(const ScalarFunction& f, double level, double tol, double outside, double inside,
                           double x_tol) {
  auto excess = [&](double x) { return std::abs(f(x) - level) - tol; };
  if (excess(outside) <= 0.0 || excess(inside) > 0.0) return inside;
  while (std::abs(inside - outside) > x_tol) {
    const double mid = 0.5 * (inside + outside);
    if (excess(mid) > 0.0) outside = mid; else inside = mid;
  }
  return inside;
}

struct Run {
  int sign;       // -1, 0, +1
  int first;      // first difference index
  int last;       // last difference index (inclusive)
};

}  // namespace

std::vector<double> CriticalSet::value_sequence() const {
  std::vector<double> v;
  v.reserve(extremizers.size() + 2);
  v.push_back(left_value);
  for (const auto& e : extremizers) v.push_back(e.value);
  v.push_back(right_value);
  return v;
}

std::vector<double> CriticalSet::node_sequence() const {
  std::vector<double> v;
  v.reserve(extremizers.size() + 2);
  v.push_back(domain.lo);
  for (const auto& e : extremizers) v.push_back(e.representative());
  v.push_back(domain.hi);
  return v;
}

int alternation_sign(std::span<const double> values) {
  if (values.size() < 2) throw Error(ErrorCode::kPrecondition, "alternation needs at least two values");
  for (int s : {1, -1}) {
    bool ok = true;
    double parity = 1.0;
    for (std::size_t i = 0; i + 1 < values.size() && ok; ++i) {
      ok = s * parity * (values[i + 1] - values[i]) > 0.0;
      parity = -parity;
    }
    if (ok) return s;
  }
  throw Error(ErrorCode::kNotAlternating, "value sequence does not alternate");
}

CriticalSet find_critical_sets(const ScalarFunction& f, const Interval& domain, const CriticalScanOptions& options) {
  if (options.n_scan < 3) throw Error(ErrorCode::kPrecondition, "n_scan must be at least 3");
  if (!(domain.lo < domain.hi)) throw Error(ErrorCode::kPrecondition, "degenerate domain");
  const int n = options.n_scan;
  const double step = domain.width() / (n - 1);
  std::vector<double> xs(static_cast<std::size_t>(n)), vs(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    xs[static_cast<std::size_t>(i)] = i == n - 1 ? domain.hi : domain.lo + i * step;
    vs[static_cast<std::size_t>(i)] = f(xs[static_cast<std::size_t>(i)]);
    if (!std::isfinite(vs[static_cast<std::size_t>(i)])) {
      throw Error(ErrorCode::kPrecondition, "function is not finite on the scan grid");
    }
  }
  const auto [vmin, vmax] = std::minmax_element(vs.begin(), vs.end());
  const double tol = options.plateau_tol.value_or(1e-9 * (1.0 + (*vmax - *vmin)));

  std::vector<Run> runs;
  for (int k = 0; k + 1 < n; ++k) {
    const double d = vs[static_cast<std::size_t>(k + 1)] - vs[static_cast<std::size_t>(k)];
    const int s = std::abs(d) <= tol ? 0 : (d > 0.0 ? 1 : -1);
    if (!runs.empty() && runs.back().sign == s) {
      runs.back().last = k;
    } else {
      runs.push_back({s, k, k});
    }
  }
  if (std::all_of(runs.begin(), runs.end(), [](const Run& r) { return r.sign == 0; })) {
    throw Error(ErrorCode::kConstantFunction, "function is constant within the plateau tolerance");
  }

  CriticalSet cs;
  cs.domain = domain;
  cs.left_value = vs.front();
  cs.right_value = vs.back();

  auto x_at = [&](int i) { return xs[static_cast<std::size_t>(std::clamp(i, 0, n - 1))]; };
  for (std::size_t r = 0; r + 1 < runs.size(); ++r) {
    if (runs[r].sign == 0) continue;
    // Next non-flat run, possibly separated by one flat run.
    std::size_t next = r + 1;
    int flat_count = 0;
    if (runs[next].sign == 0) {
      flat_count = runs[next].last - runs[next].first + 1;
      ++next;
      if (next >= runs.size()) break;
    }
    const int before = runs[r].sign, after = runs[next].sign;
    if (before == after) continue;
    const bool is_min = before < 0;
    Extremizer e;
    e.is_minimum = is_min;
    // Grid points x_{i} .. x_{j} bracket the turn.
    const int i = runs[r].last;
    const int j = runs[next].first + 1;
    if (flat_count >= 2) {
      const int flat_lo = runs[r].last + 1, flat_hi = runs[next].first;
      const double level = f(0.5 * (x_at(flat_lo) + x_at(flat_hi)));
      e.plateau = true;
      e.value = level;
      e.lower = refine_plateau_edge(f, level, tol, x_at(flat_lo - 1), x_at(flat_lo), options.x_tol);
      e.upper = refine_plateau_edge(f, level, tol, x_at(flat_hi + 1), x_at(flat_hi), options.x_tol);
    } else {
      const double x_star = golden_minimize(f, is_min ? 1.0 : -1.0, x_at(i), x_at(j), options.x_tol);
      e.lower = e.upper = x_star;
      e.value = f(x_star);
    }
    cs.extremizers.push_back(e);
  }

  const auto values = cs.value_sequence();
  try {
    cs.sign = alternation_sign(values);
  } catch (const Error&) {
    std::ostringstream msg;
    msg << "refined extrema do not alternate (" << cs.count() << " extremizer sets)";
    throw Error(ErrorCode::kInternalConsistency, msg.str());
  }
  return cs;
}

std::vector<Interval> piece_decomposition(const Interval& domain, const CriticalSet& cs) {
  std::vector<double> nodes;
  nodes.reserve(cs.count() + 2);
  nodes.push_back(domain.lo);
  for (const auto& e : cs.extremizers) nodes.push_back(e.representative());
  nodes.push_back(domain.hi);
  std::vector<Interval> pieces;
  pieces.reserve(nodes.size() - 1);
  for (std::size_t i = 0; i + 1 < nodes.size(); ++i) pieces.push_back({nodes[i], nodes[i + 1]});
  return pieces;
}

}  // namespace homeofit
