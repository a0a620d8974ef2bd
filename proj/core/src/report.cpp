#include <cstdio>

#include "homeofit/errors.hpp"
#include "homeofit/fit.hpp"
#include "json.hpp"

namespace homeofit {

std::string_view to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::kPrecondition: return "precondition";
    case ErrorCode::kConstantFunction: return "constant-function";
    case ErrorCode::kNotAlternating: return "not-alternating";
    case ErrorCode::kInternalConsistency: return "internal-consistency";
    case ErrorCode::kConvergence: return "convergence";
    case ErrorCode::kOutOfRange: return "out-of-range";
    case ErrorCode::kRangeMismatch: return "range-mismatch";
    case ErrorCode::kNotSingleExtremum: return "not-single-extremum";
    case ErrorCode::kSingularSystem: return "singular-system";
    case ErrorCode::kNumeric: return "numeric";
    case ErrorCode::kUsage: return "usage";
    case ErrorCode::kEmptyDataset: return "empty-dataset";
    case ErrorCode::kParse: return "parse";
    case ErrorCode::kIo: return "io";
  }
  return "unknown";
}

namespace {

nlohmann::ordered_json metrics_json(const Metrics& m) {
  nlohmann::ordered_json j;
  j["rmse"] = m.rmse;
  j["mae"] = m.mae;
  j["mre"] = m.mre;
  j["sup_error"] = m.sup;
  j["mre_excluded"] = m.mre_excluded;
  return j;
}

void append_number(std::string& out, double v) {
  char buf[40];
  const int n = std::snprintf(buf, sizeof buf, "%.17g", v);
  out.append(buf, static_cast<std::size_t>(n));
}

}  // namespace

std::string report_to_json(const FitReport& r, int indent) {
  nlohmann::ordered_json j;
  j["target"] = r.target;
  j["mode"] = r.mode;
  j["dim"] = r.dim;
  j["degree"] = r.degree;
  j["n_basis"] = r.n_basis;
  j["seed"] = r.seed;
  j["solver"] = r.solver;
  j["rmse"] = r.validation.rmse;
  j["mae"] = r.validation.mae;
  j["mre"] = r.validation.mre;
  j["sup_error"] = r.validation.sup;
  j["validation"] = metrics_json(r.validation);
  j["train"] = metrics_json(r.train);
  j["n_train"] = r.n_train;
  j["n_validation"] = r.n_validation;
  j["steps"] = r.steps;
  j["best_step"] = r.best_step;
  j["wall_time"] = r.wall_time;
  j["regularized"] = r.regularized;
  j["diverged"] = r.diverged;
  nlohmann::ordered_json hist = nlohmann::ordered_json::array();
  for (const auto& h : r.history) {
    hist.push_back({{"step", h.step},
                    {"train_rmse", h.train_rmse},
                    {"selection_rmse", h.selection_rmse},
                    {"best_selection_rmse", h.best_selection_rmse}});
  }
  j["history"] = hist;
  return j.dump(indent);
}

std::string residual_table(const Eigen::MatrixXd& x, const Eigen::VectorXd& truth, const Eigen::VectorXd& pred) {
  if (x.cols() != truth.size() || truth.size() != pred.size()) {
    throw Error(ErrorCode::kPrecondition, "residual table inputs differ in length");
  }
  std::string out;
  for (Eigen::Index k = 0; k < x.rows(); ++k) out += "x" + std::to_string(k) + ",";
  out += "truth,pred,residual\n";
  for (Eigen::Index p = 0; p < x.cols(); ++p) {
    for (Eigen::Index k = 0; k < x.rows(); ++k) {
      append_number(out, x(k, p));
      out += ',';
    }
    append_number(out, truth(p));
    out += ',';
    append_number(out, pred(p));
    out += ',';
    append_number(out, pred(p) - truth(p));
    out += '\n';
  }
  return out;
}

}  // namespace homeofit
