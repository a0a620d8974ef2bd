#include "homeofit/construct.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>

#include "homeofit/errors.hpp"

namespace homeofit {
namespace {

struct GaussRule {
  std::vector<double> nodes;
  std::vector<double> weights;
};

// Gauss-Legendre rule on [-1, 1] by Newton iteration on P_n.
GaussRule gauss_legendre(int n) {
  GaussRule rule;
  rule.nodes.resize(static_cast<std::size_t>(n));
  rule.weights.resize(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    double x = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
    double dp = 1.0;
    for (int it = 0; it < 100; ++it) {
      double p0 = 1.0, p1 = x;
      for (int k = 1; k < n; ++k) {
        const double p2 = ((2.0 * k + 1.0) * x * p1 - k * p0) / (k + 1.0);
        p0 = p1;
        p1 = p2;
      }
      dp = n * (x * p1 - p0) / (x * x - 1.0);
      const double dx = p1 / dp;
      x -= dx;
      if (std::abs(dx) < 1e-16) break;
    }
    rule.nodes[static_cast<std::size_t>(i)] = x;
    rule.weights[static_cast<std::size_t>(i)] = 2.0 / ((1.0 - x * x) * dp * dp);
  }
  return rule;
}

// Unknowns: free interior nodes y_2..y_{M-1} and gamma with c = sigma * exp(gamma).
class ChandlerSystem {
 public:
  ChandlerSystem(int m, double sigma) : m_(m), sigma_(sigma), rule_(gauss_legendre(m + 1)) {}

  std::vector<double> nodes(const Eigen::VectorXd& u) const {
    std::vector<double> y(static_cast<std::size_t>(m_));
    y.front() = 0.0;
    y.back() = 1.0;
    for (int k = 1; k + 1 < m_; ++k) y[static_cast<std::size_t>(k)] = u(k - 1);
    return y;
  }
  double scale(const Eigen::VectorXd& u) const { return sigma_ * std::exp(u(u.size() - 1)); }

  bool ordered(const Eigen::VectorXd& u) const {
    const auto y = nodes(u);
    for (std::size_t k = 0; k + 1 < y.size(); ++k)
      if (!(y[k] < y[k + 1])) return false;
    return true;
  }

  // integrals(j) = int_{y_j}^{y_{j+1}} prod_{l != skip} (t - y_l) dt, j over interior gaps.
  Eigen::VectorXd integrals(const std::vector<double>& y, int skip) const {
    Eigen::VectorXd out(m_ - 1);
    for (int j = 0; j + 1 < m_; ++j) {
      const double a = y[static_cast<std::size_t>(j)], b = y[static_cast<std::size_t>(j + 1)];
      const double half = 0.5 * (b - a), mid = 0.5 * (a + b);
      double sum = 0.0;
      for (std::size_t g = 0; g < rule_.nodes.size(); ++g) {
        const double t = mid + half * rule_.nodes[g];
        double prod = 1.0;
        for (int l = 0; l < m_; ++l)
          if (l != skip) prod *= t - y[static_cast<std::size_t>(l)];
        sum += rule_.weights[g] * prod;
      }
      out(j) = half * sum;
    }
    return out;
  }

  Eigen::VectorXd residual(const Eigen::VectorXd& u, const Eigen::VectorXd& target) const {
    return scale(u) * integrals(nodes(u), -1) - target;
  }

  Eigen::MatrixXd jacobian(const Eigen::VectorXd& u) const {
    const auto y = nodes(u);
    const double c = scale(u);
    Eigen::MatrixXd jac(m_ - 1, m_ - 1);
    // Boundary terms vanish because the integrand is zero at every node.
    for (int k = 1; k + 1 < m_; ++k) jac.col(k - 1) = -c * integrals(y, k);
    jac.col(m_ - 2) = c * integrals(y, -1);
    return jac;
  }

 private:
  int m_;
  double sigma_;
  GaussRule rule_;
};

// Coefficients of c * prod (y - y_k) integrated, with p(y_1) = f_1 where y_1 = nodes[0].
Polynomial assemble_polynomial(const std::vector<double>& interior, double c, double f1) {
  std::vector<double> q{1.0};
  for (double r : interior) {
    std::vector<double> next(q.size() + 1, 0.0);
    for (std::size_t i = 0; i < q.size(); ++i) {
      next[i + 1] += q[i];
      next[i] -= r * q[i];
    }
    q = std::move(next);
  }
  std::vector<double> coeffs(q.size() + 1, 0.0);
  for (std::size_t i = 0; i < q.size(); ++i) coeffs[i + 1] = c * q[i] / static_cast<double>(i + 1);
  const Polynomial raw = Polynomial::monomial(coeffs);
  coeffs[0] = f1 - raw(interior.front());
  return Polynomial::monomial(std::move(coeffs));
}

// Solves p(y) = target on the monotone branch beyond `anchor` in `direction`.
double solve_outer_node(const Polynomial& p, double anchor, double target, double direction) {
  const double at_anchor = p(anchor) - target;
  double reach = 1.0;
  for (int i = 0; i < 200; ++i) {
    const double y = anchor + direction * reach;
    if ((p(y) - target) * at_anchor <= 0.0) {
      const Interval piece = direction < 0 ? Interval{y, anchor} : Interval{anchor, y};
      const double tol = 4.0 * std::numeric_limits<double>::epsilon() * (1.0 + std::abs(target));
      return invert_on_monotone_interval(p, piece, target, tol);
    }
    reach *= 2.0;
  }
  throw ConvergenceError("could not bracket an exterior node", std::abs(at_anchor));
}

void fill_residuals(ChandlerResult& out, std::span<const double> values) {
  const Polynomial dp = derivative(out.p);
  out.value_residual = 0.0;
  out.derivative_residual = 0.0;
  for (std::size_t i = 0; i < out.nodes.size(); ++i) {
    out.value_residual = std::max(out.value_residual, std::abs(out.p(out.nodes[i]) - values[i]));
    if (i > 0 && i + 1 < out.nodes.size()) {
      out.derivative_residual = std::max(out.derivative_residual, std::abs(dp(out.nodes[i])));
    }
  }
  out.p = Polynomial(out.p.basis(), {out.p.coeffs().begin(), out.p.coeffs().end()},
                     Interval{out.nodes.front(), out.nodes.back()});
}

}  // namespace

ChandlerResult chandler_polynomial(std::span<const double> values, const ChandlerOptions& options) {
  if (values.size() < 2) throw Error(ErrorCode::kPrecondition, "need at least two values");
  const int s = alternation_sign(values);
  const int m = static_cast<int>(values.size()) - 2;
  ChandlerResult out;

  if (m == 0) {
    out.p = Polynomial::monomial({values[0], values[1] - values[0]});
    out.nodes = {0.0, 1.0};
    fill_residuals(out, values);
    return out;
  }
  if (m == 1) {
    // Minimum when the sequence starts decreasing.
    const double a2 = s < 0 ? 1.0 : -1.0;
    out.p = Polynomial::monomial({values[1], 0.0, a2});
    out.nodes = {-std::sqrt(std::abs(values[0] - values[1])), 0.0, std::sqrt(std::abs(values[2] - values[1]))};
    fill_residuals(out, values);
    return out;
  }

  // p'(y) = c prod (y - y_k) has sign sigma * (-1)^M left of y_1.
  const double sigma = (m % 2 == 0) ? s : -s;
  const ChandlerSystem system(m, sigma);
  Eigen::VectorXd diffs(m - 1);
  for (int j = 0; j + 1 < m; ++j) diffs(j) = values[static_cast<std::size_t>(j + 2)] - values[static_cast<std::size_t>(j + 1)];

  // Start from equispaced nodes with c matched to the total variation.
  Eigen::VectorXd u(m - 1);
  for (int k = 1; k + 1 < m; ++k) u(k - 1) = static_cast<double>(k) / (m - 1);
  u(m - 2) = 0.0;
  const Eigen::VectorXd base = system.integrals(system.nodes(u), -1);
  u(m - 2) = std::log(diffs.cwiseAbs().sum() / base.cwiseAbs().sum());
  const Eigen::VectorXd start = system.scale(u) * base;

  double max_abs = 0.0;
  for (double v : values) max_abs = std::max(max_abs, std::abs(v));
  const double tol = options.tolerance * (1.0 + max_abs);

  // Continuation from the values realized by the initial guess to the target.
  double t = 0.0, dt = 1.0;
  int total = 0;
  double last_norm = 0.0;
  while (t < 1.0) {
    const double t_next = std::min(1.0, t + dt);
    const Eigen::VectorXd target = (1.0 - t_next) * start + t_next * diffs;
    Eigen::VectorXd trial = u;
    bool converged = false;
    for (int it = 0; it < options.max_iterations; ++it, ++total) {
      const Eigen::VectorXd r = system.residual(trial, target);
      last_norm = r.lpNorm<Eigen::Infinity>();
      if (last_norm <= tol) {
        converged = true;
        break;
      }
      const Eigen::VectorXd step = system.jacobian(trial).colPivHouseholderQr().solve(-r);
      double alpha = 1.0;
      bool accepted = false;
      for (int h = 0; h <= options.max_halvings; ++h, alpha *= 0.5) {
        const Eigen::VectorXd cand = trial + alpha * step;
        if (!cand.allFinite() || !system.ordered(cand)) continue;
        if (system.residual(cand, target).lpNorm<Eigen::Infinity>() < last_norm) {
          trial = cand;
          accepted = true;
          break;
        }
      }
      if (!accepted) break;
    }
    if (converged) {
      u = trial;
      t = t_next;
      dt = std::min(1.0, 2.0 * dt);
    } else {
      dt *= 0.5;
      if (dt < 1e-8) {
        std::ostringstream msg;
        msg << "Chandler Newton continuation stalled at t=" << t << " (residual " << last_norm << ")";
        throw ConvergenceError(msg.str(), last_norm);
      }
    }
  }
  out.newton_iterations = total;

  const auto interior = system.nodes(u);
  out.p = assemble_polynomial(interior, system.scale(u), values[1]);
  out.nodes.reserve(static_cast<std::size_t>(m) + 2);
  out.nodes.push_back(solve_outer_node(out.p, interior.front(), values.front(), -1.0));
  out.nodes.insert(out.nodes.end(), interior.begin(), interior.end());
  out.nodes.push_back(solve_outer_node(out.p, interior.back(), values.back(), 1.0));
  fill_residuals(out, values);
  return out;
}

PiecewiseHomeo::PiecewiseHomeo(ScalarFunction f, Polynomial p, std::vector<Piece> pieces, double range_tolerance)
    : f_(std::move(f)), p_(std::move(p)), pieces_(std::move(pieces)), range_tolerance_(range_tolerance) {
  if (pieces_.empty()) throw Error(ErrorCode::kPrecondition, "homeomorphism needs at least one piece");
}

double PiecewiseHomeo::strictified(std::size_t i, double x) const {
  const Piece& piece = pieces_[i];
  const double fx = f_(x);
  if (piece.blend == 0.0) return fx;
  const double w = (x - piece.source.lo) / piece.source.width();
  const double ramp = piece.left_value + w * (piece.right_value - piece.left_value);
  return (1.0 - piece.blend) * fx + piece.blend * ramp;
}

double PiecewiseHomeo::operator()(double x) const {
  std::size_t i = 0;
  while (i + 1 < pieces_.size() && x > pieces_[i].source.hi) ++i;
  const Piece& piece = pieces_[i];
  double y = strictified(i, x);
  const double lo = std::min(piece.left_value, piece.right_value);
  const double hi = std::max(piece.left_value, piece.right_value);
  if (y < lo - range_tolerance_ || y > hi + range_tolerance_) {
    std::ostringstream msg;
    msg << "f(" << x << ") = " << y << " lies outside p(J_" << i << ") = [" << lo << ", " << hi << "]";
    throw Error(ErrorCode::kRangeMismatch, msg.str());
  }
  const double tol = 4.0 * std::numeric_limits<double>::epsilon() * (1.0 + std::max(std::abs(lo), std::abs(hi)));
  return invert_on_monotone_interval(p_, piece.target, clamp_to_image(i, y), tol);
}

// p matches the critical values only up to its interpolation residual, so
// clamp onto the image p(J_i) itself rather than onto the critical values.
double PiecewiseHomeo::clamp_to_image(std::size_t i, double y) const {
  const Piece& piece = pieces_[i];
  const double a = p_(piece.target.lo), b = p_(piece.target.hi);
  return std::clamp(y, std::min(a, b), std::max(a, b));
}

double PiecewiseHomeo::junction_gap() const {
  double gap = 0.0;
  for (std::size_t i = 0; i + 1 < pieces_.size(); ++i) {
    const double x = pieces_[i].source.hi;
    const double tol = 4.0 * std::numeric_limits<double>::epsilon() * (1.0 + std::abs(pieces_[i].right_value));
    const double left = invert_on_monotone_interval(p_, pieces_[i].target, clamp_to_image(i, strictified(i, x)), tol);
    const double right =
        invert_on_monotone_interval(p_, pieces_[i + 1].target, clamp_to_image(i + 1, strictified(i + 1, x)), tol);
    gap = std::max(gap, std::abs(left - right));
  }
  return gap;
}

PiecewiseHomeo exact_homeomorphism(const ScalarFunction& f, const CriticalSet& cs, const ChandlerResult& cr,
                                   const ExactOptions& options) {
  const auto values = cs.value_sequence();
  if (cr.nodes.size() != values.size()) {
    throw Error(ErrorCode::kRangeMismatch, "critical set and Chandler polynomial have different node counts");
  }
  const auto [vmin, vmax] = std::minmax_element(values.begin(), values.end());
  const double range = *vmax - *vmin;
  const double eps = options.strictify_eps.value_or(1e-9 * range);
  const double range_tol = options.range_tolerance.value_or(1e-8 * (1.0 + range));
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (std::abs(cr.p(cr.nodes[i]) - values[i]) > range_tol) {
      throw Error(ErrorCode::kRangeMismatch, "Chandler polynomial does not reproduce the critical values");
    }
  }

  const auto sources = piece_decomposition(cs.domain, cs);
  std::vector<PiecewiseHomeo::Piece> pieces;
  pieces.reserve(sources.size());
  for (std::size_t i = 0; i < sources.size(); ++i) {
    PiecewiseHomeo::Piece piece;
    piece.source = sources[i];
    piece.target = {cr.nodes[i], cr.nodes[i + 1]};
    piece.left_value = values[i];
    piece.right_value = values[i + 1];
    const bool touches_plateau = (i > 0 && cs.extremizers[i - 1].plateau) ||
                                 (i < cs.extremizers.size() && cs.extremizers[i].plateau);
    bool flat_step = false;
    if (!touches_plateau) {
      // Shelves inside a piece also need the ramp.
      constexpr int kProbe = 200;
      double prev = f(piece.source.lo);
      for (int k = 1; k <= kProbe && !flat_step; ++k) {
        const double cur = f(piece.source.lo + piece.source.width() * k / kProbe);
        flat_step = cur == prev;
        prev = cur;
      }
    }
    const double delta = std::abs(piece.right_value - piece.left_value);
    if ((touches_plateau || flat_step) && delta > 0.0) piece.blend = std::min(1.0, eps / delta);
    pieces.push_back(piece);
  }
  return PiecewiseHomeo(f, cr.p, std::move(pieces), range_tol);
}

double composition_error(const ScalarFunction& f, const PiecewiseHomeo& h, int n_grid) {
  const Interval dom = h.domain();
  double worst = 0.0;
  for (int k = 0; k < n_grid; ++k) {
    const double x = k == n_grid - 1 ? dom.hi : dom.lo + dom.width() * k / (n_grid - 1);
    worst = std::max(worst, std::abs(f(x) - h.polynomial()(h(x))));
  }
  return worst;
}

std::vector<Sample> strictify(std::span<const Sample> samples, double eps) {
  std::vector<Sample> out(samples.begin(), samples.end());
  if (out.size() < 2) return out;
  const double direction = out.back().y < out.front().y ? -1.0 : 1.0;
  std::size_t start = 0;
  while (start < out.size()) {
    std::size_t end = start + 1;
    while (end < out.size() && samples[end].y == samples[start].y) ++end;
    const std::size_t k = end - start;
    if (k > 1) {
      double height = eps;
      if (end < out.size()) height = std::min(height, 0.5 * std::abs(samples[end].y - samples[start].y));
      for (std::size_t j = 0; j < k; ++j) {
        out[start + j].y += direction * height * static_cast<double>(j) / static_cast<double>(k);
      }
    }
    start = end;
  }
  return out;
}

double SingleExtremumMap::h(double x) const {
  const double r = std::sqrt(std::abs(f(x) - a0));
  return x < x0 ? -r : (x > x0 ? r : 0.0);
}

SingleExtremumMap single_extremum_h(const ScalarFunction& f, double x0, const Interval& domain,
                                    std::optional<double> tol) {
  constexpr int kScan = 2001;
  SingleExtremumMap map;
  map.f = f;
  map.x0 = x0;
  map.a0 = f(x0);
  std::vector<double> rem(kScan);
  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  for (int k = 0; k < kScan; ++k) {
    const double x = domain.lo + domain.width() * k / (kScan - 1);
    rem[static_cast<std::size_t>(k)] = f(x) - map.a0;
    lo = std::min(lo, rem[static_cast<std::size_t>(k)]);
    hi = std::max(hi, rem[static_cast<std::size_t>(k)]);
  }
  const double threshold = tol.value_or(1e-9 * (1.0 + (hi - lo)));
  const bool above = hi > threshold, below = lo < -threshold;
  if (above && below) {
    throw Error(ErrorCode::kNotSingleExtremum, "f - f(x0) changes sign; x0 is not the only extremizer");
  }
  map.a2 = below ? -1.0 : 1.0;
  return map;
}

}  // namespace homeofit
