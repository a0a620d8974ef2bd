#pragma once

#include <Eigen/Core>
#include <array>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "homeofit/multi_poly.hpp"
#include "homeofit/poly.hpp"

namespace homeofit {

double f1(double x) noexcept;  // exp(x) + exp(-x)
double f2(double x) noexcept;  // arctan(-x) for x <= 0, 1 - (x - 1)^2 otherwise
double f3(double x) noexcept;  // exp(-1/(|x| - 1)^2) outside [-1, 1], zero inside
double f4(double x, double y) noexcept;  // arctan(x) arctan(y)

/// Tensor-product grid, one interval and point count per axis.
struct GridSpec {
  std::vector<Interval> axes;
  std::vector<int> counts;

  int dim() const noexcept { return static_cast<int>(axes.size()); }
  std::size_t size() const noexcept;
  /// Throws kPrecondition for mismatched lengths, counts < 2 or degenerate axes.
  void validate() const;
  /// Equidistant nodes of axis k, endpoints included.
  std::vector<double> nodes(int k) const;

  static GridSpec uniform(std::vector<Interval> axes, int count);
};

/// Points are the columns of `x` (D x P).
struct Dataset {
  Eigen::MatrixXd x;
  Eigen::VectorXd y;

  int dim() const noexcept { return static_cast<int>(x.rows()); }
  long size() const noexcept { return static_cast<long>(y.size()); }
  bool operator==(const Dataset& other) const;
};

using PointFunction = std::function<double(std::span<const double>)>;

/// Samples f on the grid in lexicographic index order (last axis fastest).
/// With a cutoff, rows with value > cutoff are removed and the row at
/// `minimum` (if given) is appended. Throws kEmptyDataset when nothing remains.
Dataset make_dataset(const PointFunction& f, const GridSpec& grid, std::optional<double> cutoff = std::nullopt,
                     std::optional<std::vector<double>> minimum = std::nullopt);

/// Synthetic triatomic surface, a quartic total-degree expansion in the Morse
/// variables y0 = 1 - exp(-a0 (r0 - b0)), y1 = 1 - exp(-a1 (r1 - b1)) and
/// y2 = cos(theta) - cos(b2). Energies in cm^-1, lengths in Angstrom.
struct PesConfig {
  double alpha0 = 1.8;
  double alpha1 = 1.8;
  double beta0 = 1.336;
  double beta1 = 1.336;
  double beta2 = 1.611;
  /// Coefficients aligned with total_degree_indices(3, 4).
  std::vector<double> coeffs;
  double cutoff = 4e4;
  Interval radial{0.9, 3.5};
  Interval angle{0.0, 3.14159265358979323846};

  /// Throws kPrecondition when the widths or the equilibrium angle are invalid.
  void validate() const;
};

/// Default surface: V = scale * z^T S z with z the nine monomials of degree 1
/// and 2 in the Morse variables and S symmetric positive definite, drawn from
/// `seed` and symmetrized under exchange of the two bonds. The global minimum
/// is V = 0 at equilibrium. The scale puts the single-bond stretch to 3.5 A
/// at 3e4 cm^-1.
PesConfig default_pes_config(std::uint64_t seed = 2024);

std::array<double, 3> morse_variables(const PesConfig& cfg, std::span<const double> x) noexcept;
double pes_eval(const PesConfig& cfg, std::span<const double> x);
std::vector<double> pes_minimum(const PesConfig& cfg);

/// Named benchmark problem: target function, domain and the default grids.
struct Benchmark {
  std::string name;
  int dim = 1;
  PointFunction f;
  std::vector<Interval> domain;
  GridSpec train;
  GridSpec validation;
  std::optional<double> cutoff;
  std::optional<std::vector<double>> minimum;

  Dataset train_set() const { return make_dataset(f, train, cutoff, minimum); }
  Dataset validation_set() const { return make_dataset(f, validation, cutoff, minimum); }
};

/// f1, f2, f3, f4 or pes. Throws kUsage for unknown names.
Benchmark benchmark(std::string_view name);
std::vector<std::string> benchmark_names();

/// CSV with header `x0[,x1[,x2...]],value`, 17 significant digits, LF endings.
std::string dataset_to_csv(const Dataset& data);
/// Throws ParseError naming the offending line.
Dataset dataset_from_csv(std::string_view text);
void save_dataset(const Dataset& data, const std::string& path);
Dataset load_dataset(const std::string& path);

}  // namespace homeofit
