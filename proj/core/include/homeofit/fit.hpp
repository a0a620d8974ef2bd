#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "homeofit/invnet.hpp"
#include "homeofit/multi_poly.hpp"
#include "homeofit/targets.hpp"

namespace homeofit {

struct Metrics {
  double rmse = 0.0;
  double mae = 0.0;  // maximum absolute error
  double mre = 0.0;  // mean relative error over |truth| >= 1e-12
  double sup = 0.0;
  long mre_excluded = 0;
};

/// Throws kPrecondition for mismatched or empty inputs.
Metrics metrics(std::span<const double> pred, std::span<const double> truth);
inline Metrics metrics(const Eigen::VectorXd& pred, const Eigen::VectorXd& truth) {
  return metrics(std::span<const double>(pred.data(), static_cast<std::size_t>(pred.size())),
                 std::span<const double>(truth.data(), static_cast<std::size_t>(truth.size())));
}

/// Row p holds prod_k q_k(p)^{i_k} for every multi-index. Throws kNumeric on
/// non-finite entries.
Eigen::MatrixXd design_matrix(const Eigen::MatrixXd& q, std::span<const MultiIndex> indices);
Eigen::MatrixXd design_matrix(const InvResNet& net, const Eigen::MatrixXd& x, std::span<const MultiIndex> indices);

/// Gradient of sum_i c_i prod_k q_k^{i_k} with respect to q, one column per point.
Eigen::MatrixXd expansion_gradient(const Eigen::MatrixXd& q, std::span<const MultiIndex> indices,
                                   const Eigen::VectorXd& coeffs);

struct VarproSolution {
  Eigen::VectorXd coeffs;
  long rank = 0;
  /// True when rank deficiency forced the ridge fallback.
  bool regularized = false;
};

/// Minimum-norm least-squares coefficients by complete orthogonal
/// decomposition of the column-equilibrated design. On numerical rank loss
/// the solve falls back to ridge regression with lambda = 1e-12 ||A||_F^2.
VarproSolution varpro_coeffs(const Eigen::MatrixXd& design, const Eigen::VectorXd& ys);

struct FitConfig {
  int degree = 2;
  /// Fixed expansion coefficients aligned with total_degree_indices(dim, degree);
  /// the output scale of the network is then trained instead of solved for.
  std::optional<std::vector<double>> fixed_coeffs;
  int steps = 20000;
  double lr = 1e-3;
  double lr_min = 1e-5;
  int eval_every = 100;
  std::uint64_t seed = 0;
  int n_blocks = 15;
  int width = 8;
  double lipschitz = 0.97;
  double init_gain = 1.0;
  int power_iterations = 1;
  /// Snapshot selection uses every k-th validation point with k chosen so that
  /// at most this many points are used; 0 uses the full validation set.
  long selection_points = 0;
  /// Candidate initial output log-scales and shifts (in unit coordinates)
  /// for the fixed-coefficient mode.
  std::vector<double> log_scale_grid = default_log_scale_grid();
  std::vector<double> shift_grid = default_shift_grid();

  static std::vector<double> default_log_scale_grid();
  static std::vector<double> default_shift_grid();
};

struct HistoryEntry {
  int step = 0;
  double train_rmse = 0.0;
  double selection_rmse = 0.0;
  double best_selection_rmse = 0.0;
};

struct FitReport {
  std::string target;
  std::string mode;
  int dim = 1;
  int degree = 0;
  long n_basis = 0;
  std::uint64_t seed = 0;
  Metrics validation;
  Metrics train;
  long n_train = 0;
  long n_validation = 0;
  int steps = 0;
  int best_step = -1;
  double wall_time = 0.0;
  bool regularized = false;
  bool diverged = false;
  std::string solver;
  std::vector<HistoryEntry> history;
};

struct FitResult {
  InvResNet net;
  std::vector<MultiIndex> indices;
  Eigen::VectorXd coeffs;
  FitReport report;

  /// Model values at the columns of x.
  Eigen::VectorXd predict(const Eigen::MatrixXd& x) const;
};

/// Adam on the network parameters with the expansion coefficients
/// eliminated by least squares (or fixed) at every step. Returns the
/// snapshot with the lowest selection RMSE. A non-finite loss stops
/// training and sets `report.diverged`.
FitResult train(const Dataset& train_set, const Dataset& validation_set, const std::vector<Interval>& domain,
                const FitConfig& config);

/// Direct total-degree least-squares fit in the original coordinates.
struct BaselineResult {
  MultiIndexExpansion expansion;
  FitReport report;
};
BaselineResult fit_baseline(const Dataset& train_set, const Dataset& validation_set, const std::vector<Interval>& domain,
                            int degree, LeastSquaresSolver solver);

/// JSON rendering of a report (stable key order).
std::string report_to_json(const FitReport& report, int indent = 2);
/// CSV with header x0[,x1...],truth,pred,residual.
std::string residual_table(const Eigen::MatrixXd& x, const Eigen::VectorXd& truth, const Eigen::VectorXd& pred);

}  // namespace homeofit
