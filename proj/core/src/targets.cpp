#include "homeofit/targets.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <numbers>

#include "homeofit/errors.hpp"
#include "homeofit/rng.hpp"

namespace homeofit {

double f1(double x) noexcept { return std::exp(x) + std::exp(-x); }

double f2(double x) noexcept {
  if (x <= 0.0) return std::atan(-x);
  const double d = x - 1.0;
  return 1.0 - d * d;
}

double f3(double x) noexcept {
  const double a = std::abs(x);
  if (a <= 1.0) return 0.0;
  const double d = a - 1.0;
  return std::exp(-1.0 / (d * d));
}

double f4(double x, double y) noexcept { return std::atan(x) * std::atan(y); }

std::size_t GridSpec::size() const noexcept {
  std::size_t n = axes.empty() ? 0 : 1;
  for (int c : counts) n *= static_cast<std::size_t>(std::max(c, 0));
  return n;
}

void GridSpec::validate() const {
  if (axes.empty() || axes.size() != counts.size()) {
    throw Error(ErrorCode::kPrecondition, "grid needs one point count per axis");
  }
  for (std::size_t k = 0; k < axes.size(); ++k) {
    if (counts[k] < 2) throw Error(ErrorCode::kPrecondition, "grid counts must be at least 2");
    if (!(axes[k].lo < axes[k].hi)) throw Error(ErrorCode::kPrecondition, "grid axis is degenerate");
  }
}

std::vector<double> GridSpec::nodes(int k) const {
  const Interval& iv = axes.at(static_cast<std::size_t>(k));
  const int n = counts.at(static_cast<std::size_t>(k));
  std::vector<double> out(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) out[static_cast<std::size_t>(i)] = iv.lo + iv.width() * i / (n - 1);
  out.back() = iv.hi;
  return out;
}

GridSpec GridSpec::uniform(std::vector<Interval> axes, int count) {
  GridSpec g;
  g.counts.assign(axes.size(), count);
  g.axes = std::move(axes);
  return g;
}

bool Dataset::operator==(const Dataset& other) const {
  return x.rows() == other.x.rows() && x.cols() == other.x.cols() && y.size() == other.y.size() && x == other.x &&
         y == other.y;
}

Dataset make_dataset(const PointFunction& f, const GridSpec& grid, std::optional<double> cutoff,
                     std::optional<std::vector<double>> minimum) {
  grid.validate();
  const int d = grid.dim();
  std::vector<std::vector<double>> nodes;
  for (int k = 0; k < d; ++k) nodes.push_back(grid.nodes(k));
  const std::size_t total = grid.size();

  std::vector<double> xs, ys;
  xs.reserve(total * static_cast<std::size_t>(d));
  ys.reserve(total);
  std::vector<int> idx(static_cast<std::size_t>(d), 0);
  std::vector<double> point(static_cast<std::size_t>(d));
  for (std::size_t n = 0; n < total; ++n) {
    for (int k = 0; k < d; ++k) point[static_cast<std::size_t>(k)] = nodes[static_cast<std::size_t>(k)][static_cast<std::size_t>(idx[static_cast<std::size_t>(k)])];
    const double v = f(point);
    if (!cutoff || v <= *cutoff) {
      xs.insert(xs.end(), point.begin(), point.end());
      ys.push_back(v);
    }
    for (int k = d - 1; k >= 0; --k) {
      if (++idx[static_cast<std::size_t>(k)] < grid.counts[static_cast<std::size_t>(k)]) break;
      idx[static_cast<std::size_t>(k)] = 0;
    }
  }
  if (cutoff && minimum) {
    if (minimum->size() != static_cast<std::size_t>(d)) throw Error(ErrorCode::kPrecondition, "minimum has the wrong dimension");
    const double v = f(*minimum);
    if (v <= *cutoff) {
      xs.insert(xs.end(), minimum->begin(), minimum->end());
      ys.push_back(v);
    }
  }
  if (ys.empty()) throw Error(ErrorCode::kEmptyDataset, "no grid points remain below the cutoff");
  Dataset data;
  data.x = Eigen::Map<const Eigen::MatrixXd>(xs.data(), d, static_cast<Eigen::Index>(ys.size()));
  data.y = Eigen::Map<const Eigen::VectorXd>(ys.data(), static_cast<Eigen::Index>(ys.size()));
  return data;
}

void PesConfig::validate() const {
  if (!(alpha0 > 0.0 && alpha1 > 0.0)) throw Error(ErrorCode::kPrecondition, "Morse widths must be positive");
  if (!(beta2 > 0.0 && beta2 < std::numbers::pi)) throw Error(ErrorCode::kPrecondition, "equilibrium angle must lie in (0, pi)");
  if (coeffs.size() != binomial(4 + 3, 3)) throw Error(ErrorCode::kPrecondition, "PES needs 35 quartic coefficients");
}

std::array<double, 3> morse_variables(const PesConfig& cfg, std::span<const double> x) noexcept {
  return {1.0 - std::exp(-cfg.alpha0 * (x[0] - cfg.beta0)), 1.0 - std::exp(-cfg.alpha1 * (x[1] - cfg.beta1)),
          std::cos(x[2]) - std::cos(cfg.beta2)};
}

namespace {

const std::vector<MultiIndex>& quartic_indices() {
  static const std::vector<MultiIndex> indices = total_degree_indices(3, 4);
  return indices;
}

double quartic_value(std::span<const double> coeffs, const std::array<double, 3>& y) {
  double pw[3][5];
  for (int k = 0; k < 3; ++k) {
    pw[k][0] = 1.0;
    for (int e = 1; e <= 4; ++e) pw[k][e] = pw[k][e - 1] * y[static_cast<std::size_t>(k)];
  }
  const auto& indices = quartic_indices();
  double v = 0.0;
  for (std::size_t i = 0; i < indices.size(); ++i) {
    v += coeffs[i] * pw[0][indices[i][0]] * pw[1][indices[i][1]] * pw[2][indices[i][2]];
  }
  return v;
}

}  // namespace

double pes_eval(const PesConfig& cfg, std::span<const double> x) {
  if (x.size() != 3) throw Error(ErrorCode::kPrecondition, "PES takes three internal coordinates");
  return quartic_value(cfg.coeffs, morse_variables(cfg, x));
}

std::vector<double> pes_minimum(const PesConfig& cfg) { return {cfg.beta0, cfg.beta1, cfg.beta2}; }

PesConfig default_pes_config(std::uint64_t seed) {
  PesConfig cfg;
  // Features y0, y1, y2, y0^2, y1^2, y2^2, y0 y1, y0 y2, y1 y2.
  const int features[9][3] = {{1, 0, 0}, {0, 1, 0}, {0, 0, 1}, {2, 0, 0}, {0, 2, 0},
                              {0, 0, 2}, {1, 1, 0}, {1, 0, 1}, {0, 1, 1}};
  // Bond exchange y0 <-> y1 as a feature permutation.
  const int swap[9] = {1, 0, 2, 4, 3, 5, 6, 8, 7};
  CounterRng rng = CounterRng(seed).split(0x9e5);
  Eigen::MatrixXd l(9, 9);
  for (int j = 0; j < 9; ++j) {
    for (int i = 0; i < 9; ++i) l(i, j) = 0.3 * rng.normal();
  }
  Eigen::MatrixXd s = l * l.transpose();
  const double diag[9] = {1.0, 1.0, 0.6, 0.3, 0.3, 0.3, 0.2, 0.2, 0.2};
  for (int i = 0; i < 9; ++i) s(i, i) += diag[i];
  Eigen::MatrixXd sym(9, 9);
  for (int i = 0; i < 9; ++i) {
    for (int j = 0; j < 9; ++j) sym(i, j) = 0.5 * (s(i, j) + s(swap[i], swap[j]));
  }

  const auto& indices = quartic_indices();
  cfg.coeffs.assign(indices.size(), 0.0);
  for (int a = 0; a < 9; ++a) {
    for (int b = 0; b < 9; ++b) {
      const MultiIndex e = {features[a][0] + features[b][0], features[a][1] + features[b][1],
                            features[a][2] + features[b][2]};
      const auto it = std::find(indices.begin(), indices.end(), e);
      cfg.coeffs[static_cast<std::size_t>(it - indices.begin())] += sym(a, b);
    }
  }
  const std::array<double, 3> stretch = {3.5, cfg.beta1, cfg.beta2};
  const double scale = 3e4 / pes_eval(cfg, stretch);
  for (double& c : cfg.coeffs) c *= scale;
  return cfg;
}

namespace {

Benchmark one_dimensional(std::string name, double (*fn)(double), Interval domain, int n_train, int n_val) {
  Benchmark b;
  b.name = std::move(name);
  b.dim = 1;
  b.f = [fn](std::span<const double> x) { return fn(x[0]); };
  b.domain = {domain};
  b.train = GridSpec::uniform({domain}, n_train);
  b.validation = GridSpec::uniform({domain}, n_val);
  return b;
}

}  // namespace

Benchmark benchmark(std::string_view name) {
  if (name == "f1") return one_dimensional("f1", f1, {-10.0, 10.0}, 301, 5001);
  if (name == "f2") return one_dimensional("f2", f2, {-3.0, 3.0}, 301, 5001);
  if (name == "f3") return one_dimensional("f3", f3, {-4.0, 4.0}, 1000, 5000);
  if (name == "f4") {
    Benchmark b;
    b.name = "f4";
    b.dim = 2;
    b.f = [](std::span<const double> x) { return f4(x[0], x[1]); };
    b.domain = {{-4.0, 4.0}, {-4.0, 4.0}};
    b.train = GridSpec::uniform(b.domain, 20);
    b.validation = GridSpec::uniform(b.domain, 100);
    return b;
  }
  if (name == "pes") {
    const PesConfig cfg = default_pes_config();
    Benchmark b;
    b.name = "pes";
    b.dim = 3;
    b.f = [cfg](std::span<const double> x) { return pes_eval(cfg, x); };
    b.domain = {cfg.radial, cfg.radial, cfg.angle};
    b.train = GridSpec::uniform(b.domain, 40);
    b.validation = GridSpec::uniform(b.domain, 100);
    b.cutoff = cfg.cutoff;
    b.minimum = pes_minimum(cfg);
    return b;
  }
  throw Error(ErrorCode::kUsage, "unknown target '" + std::string(name) + "'");
}

std::vector<std::string> benchmark_names() { return {"f1", "f2", "f3", "f4", "pes"}; }

}  // namespace homeofit
