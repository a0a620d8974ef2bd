#include "homeofit/fit.hpp"

#include <Eigen/Dense>
#include <chrono>
#include <cmath>
#include <limits>

#include "homeofit/adam.hpp"
#include "homeofit/errors.hpp"
#include "homeofit/parallel.hpp"

namespace homeofit {
namespace {

constexpr std::size_t kChunk = 2048;

// pw[k](e, p) = q(k, p)^e for e = 0..degree.
std::vector<Eigen::MatrixXd> power_tables(const Eigen::MatrixXd& q, int degree) {
  std::vector<Eigen::MatrixXd> pw(static_cast<std::size_t>(q.rows()));
  for (Eigen::Index k = 0; k < q.rows(); ++k) {
    Eigen::MatrixXd& t = pw[static_cast<std::size_t>(k)];
    t.resize(degree + 1, q.cols());
    t.row(0).setOnes();
    for (int e = 1; e <= degree; ++e) t.row(e) = t.row(e - 1).cwiseProduct(q.row(k));
  }
  return pw;
}

int max_degree(std::span<const MultiIndex> indices) {
  int n = 0;
  for (const auto& idx : indices) {
    int s = 0;
    for (int e : idx) s += e;
    n = std::max(n, s);
  }
  return n;
}

Eigen::MatrixXd columns_of(const Dataset& data, Eigen::Index begin, Eigen::Index end) {
  return data.x.middleCols(begin, end - begin);
}

double seconds_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

// Every k-th point so that at most `limit` points remain.
Dataset strided_subset(const Dataset& data, long limit) {
  if (limit <= 0 || data.size() <= limit) return data;
  const long stride = (data.size() + limit - 1) / limit;
  const long n = (data.size() + stride - 1) / stride;
  Dataset out;
  out.x.resize(data.dim(), n);
  out.y.resize(n);
  for (long i = 0; i < n; ++i) {
    out.x.col(i) = data.x.col(i * stride);
    out.y(i) = data.y(i * stride);
  }
  return out;
}

Eigen::VectorXd predict_with(const InvResNet& net, std::span<const MultiIndex> indices, const Eigen::VectorXd& coeffs,
                             const Eigen::MatrixXd& x) {
  Eigen::VectorXd out(x.cols());
  for_each_chunk(static_cast<std::size_t>(x.cols()), kChunk, [&](std::size_t, std::size_t b, std::size_t e) {
    const auto begin = static_cast<Eigen::Index>(b), len = static_cast<Eigen::Index>(e - b);
    const Eigen::MatrixXd q = net.forward(x.middleCols(begin, len));
    out.segment(begin, len) = design_matrix(q, indices) * coeffs;
  });
  return out;
}

}  // namespace

Metrics metrics(std::span<const double> pred, std::span<const double> truth) {
  if (pred.size() != truth.size()) throw Error(ErrorCode::kPrecondition, "prediction and truth differ in length");
  if (pred.empty()) throw Error(ErrorCode::kPrecondition, "metrics need at least one point");
  Metrics m;
  double sq = 0.0, rel = 0.0;
  long counted = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double r = pred[i] - truth[i];
    sq += r * r;
    m.mae = std::max(m.mae, std::abs(r));
    if (std::abs(truth[i]) < 1e-12) {
      ++m.mre_excluded;
    } else {
      rel += std::abs(r / truth[i]);
      ++counted;
    }
  }
  m.rmse = std::sqrt(sq / static_cast<double>(pred.size()));
  m.mre = counted > 0 ? rel / static_cast<double>(counted) : 0.0;
  m.sup = m.mae;
  return m;
}

Eigen::MatrixXd design_matrix(const Eigen::MatrixXd& q, std::span<const MultiIndex> indices) {
  const auto pw = power_tables(q, max_degree(indices));
  Eigen::MatrixXd a(q.cols(), static_cast<Eigen::Index>(indices.size()));
  for (std::size_t i = 0; i < indices.size(); ++i) {
    const MultiIndex& idx = indices[i];
    if (idx.size() != static_cast<std::size_t>(q.rows())) {
      throw Error(ErrorCode::kPrecondition, "multi-index dimension does not match the points");
    }
    Eigen::RowVectorXd col = pw[0].row(idx[0]);
    for (std::size_t k = 1; k < idx.size(); ++k) col = col.cwiseProduct(pw[k].row(idx[k]));
    a.col(static_cast<Eigen::Index>(i)) = col.transpose();
  }
  if (!a.allFinite()) throw Error(ErrorCode::kNumeric, "design matrix has non-finite entries");
  return a;
}

Eigen::MatrixXd design_matrix(const InvResNet& net, const Eigen::MatrixXd& x, std::span<const MultiIndex> indices) {
  return design_matrix(net.forward(x), indices);
}

Eigen::MatrixXd expansion_gradient(const Eigen::MatrixXd& q, std::span<const MultiIndex> indices,
                                   const Eigen::VectorXd& coeffs) {
  const auto pw = power_tables(q, max_degree(indices));
  const Eigen::Index d = q.rows();
  Eigen::MatrixXd g = Eigen::MatrixXd::Zero(d, q.cols());
  for (std::size_t i = 0; i < indices.size(); ++i) {
    const double c = coeffs(static_cast<Eigen::Index>(i));
    if (c == 0.0) continue;
    const MultiIndex& idx = indices[i];
    for (Eigen::Index k = 0; k < d; ++k) {
      const int ek = idx[static_cast<std::size_t>(k)];
      if (ek == 0) continue;
      Eigen::RowVectorXd term = (c * ek) * pw[static_cast<std::size_t>(k)].row(ek - 1);
      for (Eigen::Index j = 0; j < d; ++j) {
        if (j != k) term = term.cwiseProduct(pw[static_cast<std::size_t>(j)].row(idx[static_cast<std::size_t>(j)]));
      }
      g.row(k) += term;
    }
  }
  return g;
}

VarproSolution varpro_coeffs(const Eigen::MatrixXd& design, const Eigen::VectorXd& ys) {
  if (design.rows() != ys.size()) throw Error(ErrorCode::kPrecondition, "design rows and targets differ");
  if (design.rows() < design.cols()) throw Error(ErrorCode::kPrecondition, "design needs at least as many rows as columns");
  Eigen::VectorXd norms = design.colwise().norm().transpose();
  for (Eigen::Index i = 0; i < norms.size(); ++i) {
    if (norms(i) == 0.0) norms(i) = 1.0;
  }
  const Eigen::MatrixXd scaled = design * norms.cwiseInverse().asDiagonal();
  Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod(scaled);
  VarproSolution out;
  out.rank = cod.rank();
  if (out.rank == design.cols()) {
    out.coeffs = cod.solve(ys).cwiseQuotient(norms);
    return out;
  }
  // Ridge fallback as an augmented least-squares problem.
  const double lambda = 1e-12 * design.squaredNorm();
  Eigen::MatrixXd aug(design.rows() + design.cols(), design.cols());
  aug.topRows(design.rows()) = design;
  aug.bottomRows(design.cols()) = std::sqrt(lambda) * Eigen::MatrixXd::Identity(design.cols(), design.cols());
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(aug.rows());
  rhs.head(ys.size()) = ys;
  out.coeffs = aug.colPivHouseholderQr().solve(rhs);
  out.regularized = true;
  return out;
}

std::vector<double> FitConfig::default_log_scale_grid() {
  std::vector<double> grid;
  for (int i = -16; i <= 24; ++i) grid.push_back(0.25 * i);
  return grid;
}

std::vector<double> FitConfig::default_shift_grid() {
  std::vector<double> grid;
  for (int i = -64; i <= 64; ++i) grid.push_back(i / 16.0);
  return grid;
}

Eigen::VectorXd FitResult::predict(const Eigen::MatrixXd& x) const { return predict_with(net, indices, coeffs, x); }

namespace {

// Forward over all training chunks with caches, then the loss and its gradient.
struct StepState {
  std::vector<ForwardCache> caches;
  Eigen::MatrixXd q;
  Eigen::VectorXd coeffs;
  Eigen::VectorXd residual;
  double rmse = 0.0;
  bool regularized = false;
};

class Trainer {
 public:
  Trainer(const Dataset& train, std::vector<MultiIndex> indices, std::optional<Eigen::VectorXd> fixed)
      : train_(train), indices_(std::move(indices)), fixed_(std::move(fixed)) {}

  // Evaluates the loss at the current parameters and keeps the caches.
  void evaluate(const InvResNet& net, StepState& s) const {
    const std::size_t n = static_cast<std::size_t>(train_.size());
    s.caches.assign(chunk_count(n, kChunk), {});
    s.q.resize(net.dim(), train_.size());
    for_each_chunk(n, kChunk, [&](std::size_t c, std::size_t b, std::size_t e) {
      const auto begin = static_cast<Eigen::Index>(b), len = static_cast<Eigen::Index>(e - b);
      s.q.middleCols(begin, len) = net.forward(columns_of(train_, begin, begin + len), s.caches[c]);
    });
    const Eigen::MatrixXd a = design_matrix(s.q, indices_);
    if (fixed_) {
      s.coeffs = *fixed_;
      s.regularized = false;
    } else {
      const VarproSolution sol = varpro_coeffs(a, train_.y);
      s.coeffs = sol.coeffs;
      s.regularized = sol.regularized;
    }
    s.residual = a * s.coeffs - train_.y;
    s.rmse = std::sqrt(s.residual.squaredNorm() / static_cast<double>(train_.size()));
  }

  std::vector<double> gradient(const InvResNet& net, const StepState& s) const {
    const std::size_t n = static_cast<std::size_t>(train_.size());
    std::vector<std::vector<double>> partial(s.caches.size());
    const double denom = static_cast<double>(train_.size()) * s.rmse;
    for_each_chunk(n, kChunk, [&](std::size_t c, std::size_t b, std::size_t e) {
      const auto begin = static_cast<Eigen::Index>(b), len = static_cast<Eigen::Index>(e - b);
      const Eigen::MatrixXd q = s.q.middleCols(begin, len);
      Eigen::MatrixXd up = expansion_gradient(q, indices_, s.coeffs);
      const Eigen::RowVectorXd w = s.residual.segment(begin, len).transpose() / denom;
      up.array().rowwise() *= w.array();
      partial[c] = net.backward(s.caches[c], up);
    });
    std::vector<double> grad(net.n_params(), 0.0);
    for (const auto& p : partial) {
      for (std::size_t i = 0; i < grad.size(); ++i) grad[i] += p[i];
    }
    return grad;
  }

  const std::vector<MultiIndex>& indices() const { return indices_; }

 private:
  const Dataset& train_;
  std::vector<MultiIndex> indices_;
  std::optional<Eigen::VectorXd> fixed_;
};

}  // namespace

FitResult train(const Dataset& train_set, const Dataset& validation_set, const std::vector<Interval>& domain,
                const FitConfig& config) {
  const auto start = std::chrono::steady_clock::now();
  if (train_set.size() == 0) throw Error(ErrorCode::kEmptyDataset, "training set is empty");
  if (validation_set.size() == 0) throw Error(ErrorCode::kEmptyDataset, "validation set is empty");
  if (config.degree < 0) throw Error(ErrorCode::kPrecondition, "degree must be nonnegative");
  if (config.steps < 0 || config.eval_every < 1) throw Error(ErrorCode::kPrecondition, "invalid step settings");
  const int dim = train_set.dim();
  if (validation_set.dim() != dim || domain.size() != static_cast<std::size_t>(dim)) {
    throw Error(ErrorCode::kPrecondition, "datasets and domain differ in dimension");
  }

  std::vector<MultiIndex> indices = total_degree_indices(dim, config.degree);
  std::optional<Eigen::VectorXd> fixed;
  if (config.fixed_coeffs) {
    if (config.fixed_coeffs->size() != indices.size()) {
      throw Error(ErrorCode::kPrecondition, "fixed coefficients must match the basis size " +
                                                std::to_string(indices.size()));
    }
    fixed = Eigen::Map<const Eigen::VectorXd>(config.fixed_coeffs->data(),
                                              static_cast<Eigen::Index>(config.fixed_coeffs->size()));
  } else if (train_set.size() < static_cast<long>(indices.size())) {
    throw Error(ErrorCode::kPrecondition, "fewer training points than basis functions");
  }

  InvResNetConfig net_config;
  net_config.dim = dim;
  net_config.n_blocks = config.n_blocks;
  net_config.width = config.width;
  net_config.lipschitz = config.lipschitz;
  net_config.init_gain = config.init_gain;
  net_config.seed = config.seed;
  net_config.domain = domain;
  InvResNet net = InvResNet::init(net_config);

  const Trainer trainer(train_set, indices, fixed);
  StepState state;

  if (fixed) {
    // The fixed polynomial needs a matching output scale and shift to start
    // from. The latent does not depend on either, so one forward pass serves
    // a grid search over both, one axis at a time.
    auto p = net.mutable_params();
    for (int k = 0; k < dim; ++k) {
      p[net.log_scale_offset() + static_cast<std::size_t>(k)] = 0.0;
      p[net.shift_offset() + static_cast<std::size_t>(k)] = 0.0;
    }
    const Eigen::MatrixXd q0 = net.forward(train_set.x);
    Eigen::MatrixXd z(dim, q0.cols());
    for (int k = 0; k < dim; ++k) {
      const Interval& iv = domain[static_cast<std::size_t>(k)];
      z.row(k) = (q0.row(k).array() - iv.center()) / iv.half_width();
    }
    std::vector<double> scale(static_cast<std::size_t>(dim), 0.0), shift(static_cast<std::size_t>(dim), 0.0);
    auto loss = [&](const std::vector<double>& sc, const std::vector<double>& sh) {
      Eigen::MatrixXd q(dim, z.cols());
      for (int k = 0; k < dim; ++k) {
        const Interval& iv = domain[static_cast<std::size_t>(k)];
        q.row(k) = iv.center() + iv.half_width() * (std::exp(sc[static_cast<std::size_t>(k)]) * z.row(k).array() +
                                                     sh[static_cast<std::size_t>(k)]);
      }
      const double r = (design_matrix(q, indices) * *fixed - train_set.y).squaredNorm();
      return std::isfinite(r) ? r : std::numeric_limits<double>::infinity();
    };
    double best = loss(scale, shift);
    for (int sweep = 0; sweep < (dim > 1 ? 2 : 1); ++sweep) {
      for (std::size_t k = 0; k < static_cast<std::size_t>(dim); ++k) {
        auto sc = scale, sh = shift;
        for (double s : config.log_scale_grid) {
          for (double t : config.shift_grid) {
            sc[k] = s;
            sh[k] = t;
            const double v = loss(sc, sh);
            if (v < best) {
              best = v;
              scale[k] = s;
              shift[k] = t;
            }
          }
        }
      }
    }
    p = net.mutable_params();
    for (std::size_t k = 0; k < static_cast<std::size_t>(dim); ++k) {
      p[net.log_scale_offset() + k] = scale[k];
      p[net.shift_offset() + k] = shift[k];
    }
  }

  const Dataset selection = strided_subset(validation_set, config.selection_points);
  FitReport report;
  report.dim = dim;
  report.degree = config.degree;
  report.n_basis = static_cast<long>(indices.size());
  report.seed = config.seed;
  report.mode = "learned";
  report.n_train = train_set.size();
  report.n_validation = validation_set.size();
  report.solver = fixed ? "fixed" : "varpro";

  AdamState adam(net.n_params(), AdamHyper{config.lr, 0.9, 0.999, 1e-8});
  std::vector<double> best_params(net.params().begin(), net.params().end());
  double best_rmse = std::numeric_limits<double>::infinity();

  for (int step = 0; step <= config.steps; ++step) {
    net.spectral_normalize(config.power_iterations);
    try {
      trainer.evaluate(net, state);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::kNumeric) throw;
      state.rmse = std::numeric_limits<double>::quiet_NaN();
    }
    if (!std::isfinite(state.rmse)) {
      report.diverged = true;
      break;
    }
    report.regularized = report.regularized || state.regularized;
    const bool last = step == config.steps;
    if (step % config.eval_every == 0 || last) {
      double sel = std::numeric_limits<double>::quiet_NaN();
      try {
        sel = metrics(predict_with(net, indices, state.coeffs, selection.x), selection.y).rmse;
      } catch (const Error& e) {
        if (e.code() != ErrorCode::kNumeric) throw;
      }
      if (std::isfinite(sel) && sel < best_rmse) {
        best_rmse = sel;
        best_params.assign(net.params().begin(), net.params().end());
        report.best_step = step;
      }
      report.history.push_back({step, state.rmse, sel, best_rmse});
    }
    if (last) break;
    const std::vector<double> grad = trainer.gradient(net, state);
    adam.update(net.mutable_params(), grad, cosine_lr(step, config.steps, config.lr, config.lr_min));
    report.steps = step + 1;
  }

  net.set_params(best_params);
  net.normalize_to_convergence();
  trainer.evaluate(net, state);
  FitResult result{std::move(net), std::move(indices), state.coeffs, {}};
  report.regularized = report.regularized || state.regularized;
  report.train = metrics(state.residual + train_set.y, train_set.y);
  report.validation = metrics(result.predict(validation_set.x), validation_set.y);
  report.wall_time = seconds_since(start);
  result.report = std::move(report);
  return result;
}

BaselineResult fit_baseline(const Dataset& train_set, const Dataset& validation_set, const std::vector<Interval>& domain,
                            int degree, LeastSquaresSolver solver) {
  const auto start = std::chrono::steady_clock::now();
  if (train_set.size() == 0 || validation_set.size() == 0) throw Error(ErrorCode::kEmptyDataset, "empty dataset");
  LeastSquaresOptions opts;
  opts.solver = solver;
  BaselineResult out;
  if (train_set.dim() == 1) {
    opts.domain = domain.at(0);
    const Polynomial p = fit_least_squares(std::span<const double>(train_set.x.data(), static_cast<std::size_t>(train_set.size())),
                                           std::span<const double>(train_set.y.data(), static_cast<std::size_t>(train_set.size())),
                                           degree, opts);
    MultiIndexExpansion& e = out.expansion;
    e.dim = 1;
    e.max_degree = degree;
    e.basis = p.basis();
    e.domain = {p.domain()};
    e.indices = total_degree_indices(1, degree);
    e.coeffs = Eigen::Map<const Eigen::VectorXd>(p.coeffs().data(), static_cast<Eigen::Index>(p.coeffs().size()));
  } else {
    out.expansion = fit_total_degree(train_set.x, train_set.y, degree, domain, opts);
  }
  FitReport& r = out.report;
  r.mode = "baseline";
  r.dim = train_set.dim();
  r.degree = degree;
  r.n_basis = static_cast<long>(out.expansion.indices.size());
  r.n_train = train_set.size();
  r.n_validation = validation_set.size();
  r.solver = solver == LeastSquaresSolver::kPseudoinverse ? "pinv" : "qr";
  r.train = metrics(out.expansion.evaluate(train_set.x), train_set.y);
  r.validation = metrics(out.expansion.evaluate(validation_set.x), validation_set.y);
  r.wall_time = seconds_since(start);
  return out;
}

}  // namespace homeofit
