#include "homeofit_cli/cli.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <numeric>
#include <sstream>

#include "CLI11.hpp"
#include "homeofit/construct.hpp"
#include "homeofit/critical.hpp"
#include "homeofit/errors.hpp"
#include "homeofit/fit.hpp"
#include "homeofit/targets.hpp"
#include "json.hpp"

namespace homeofit::cli {
namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

namespace {

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::kIo, "cannot write " + path.string());
  out << text;
  if (text.empty() || text.back() != '\n') out << '\n';
}

json read_json(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIo, "cannot read " + path);
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw ParseError(path + ": " + e.what(), 0);
  }
}

std::string format_number(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

// Training data, validation data and domain for a named target or CSV input.
struct Problem {
  std::string name;
  Dataset train;
  Dataset validation;
  std::vector<Interval> domain;
};

std::vector<Interval> bounding_box(const Dataset& data) {
  std::vector<Interval> box;
  for (int k = 0; k < data.dim(); ++k) {
    const double lo = data.x.row(k).minCoeff(), hi = data.x.row(k).maxCoeff();
    if (!(lo < hi)) throw Error(ErrorCode::kPrecondition, "dataset spans a degenerate interval on axis " + std::to_string(k));
    box.push_back({lo, hi});
  }
  return box;
}

void check_target_source(const RunConfig& cfg) {
  if (cfg.target.empty() == cfg.dataset.empty()) {
    throw Error(ErrorCode::kUsage, "give exactly one of --target or --dataset");
  }
}

Problem load_problem(const RunConfig& cfg) {
  check_target_source(cfg);
  Problem p;
  if (!cfg.target.empty()) {
    Benchmark b = benchmark(cfg.target);
    if (cfg.train_points) b.train.counts.assign(b.train.counts.size(), *cfg.train_points);
    if (cfg.validation_points) b.validation.counts.assign(b.validation.counts.size(), *cfg.validation_points);
    p.name = b.name;
    p.train = b.train_set();
    p.validation = b.validation_set();
    p.domain = b.domain;
  } else {
    p.name = fs::path(cfg.dataset).stem().string();
    p.train = load_dataset(cfg.dataset);
    p.validation = cfg.validation.empty() ? p.train : load_dataset(cfg.validation);
    if (p.validation.dim() != p.train.dim()) throw Error(ErrorCode::kPrecondition, "validation data has a different dimension");
    p.domain = bounding_box(p.train);
  }
  return p;
}

// Piecewise-linear interpolant of 1D samples sorted by x.
ScalarFunction interpolant(const Dataset& data, Interval& domain) {
  if (data.dim() != 1) throw Error(ErrorCode::kPrecondition, "construct needs one-dimensional data");
  std::vector<long> order(static_cast<std::size_t>(data.size()));
  std::iota(order.begin(), order.end(), 0L);
  std::stable_sort(order.begin(), order.end(), [&](long a, long b) { return data.x(0, a) < data.x(0, b); });
  std::vector<double> xs, ys;
  for (long i : order) {
    if (!xs.empty() && data.x(0, i) == xs.back()) {
      throw Error(ErrorCode::kPrecondition, "duplicate abscissa in dataset");
    }
    xs.push_back(data.x(0, i));
    ys.push_back(data.y(i));
  }
  if (xs.size() < 2) throw Error(ErrorCode::kPrecondition, "need at least two samples");
  domain = {xs.front(), xs.back()};
  return [xs = std::move(xs), ys = std::move(ys)](double x) {
    const auto it = std::upper_bound(xs.begin(), xs.end(), x);
    std::size_t j = static_cast<std::size_t>(std::clamp<long>(it - xs.begin(), 1, static_cast<long>(xs.size()) - 1));
    const double t = (x - xs[j - 1]) / (xs[j] - xs[j - 1]);
    return ys[j - 1] + t * (ys[j] - ys[j - 1]);
  };
}

json error_report(const RunConfig& cfg, const std::string& name, const Error& e) {
  json r;
  r["target"] = name;
  r["mode"] = cfg.mode;
  r["status"] = "error";
  r["reason"] = std::string(e.reason());
  r["message"] = e.what();
  return r;
}

struct RunDir {
  fs::path path;
  explicit RunDir(const RunConfig& cfg) : path(fresh_output_dir(cfg.out_dir)) {
    write_text(path / "config.json", config_to_json(cfg));
  }
  void write(const std::string& file, const std::string& text) const { write_text(path / file, text); }
};

int exit_code_for(const Error& e) {
  return e.code() == ErrorCode::kConvergence ? kExitOptimization : kExitInput;
}

}  // namespace

std::string fresh_output_dir(const std::string& requested) {
  fs::path base(requested.empty() ? "runs/run" : requested);
  fs::path candidate = base;
  for (int n = 1; fs::exists(candidate); ++n) candidate = fs::path(base.string() + "-" + std::to_string(n));
  std::error_code ec;
  fs::create_directories(candidate, ec);
  if (ec) throw Error(ErrorCode::kIo, "cannot create " + candidate.string() + ": " + ec.message());
  return candidate.string();
}

std::string config_to_json(const RunConfig& cfg) {
  json j;
  j["subcommand"] = cfg.subcommand;
  j["mode"] = cfg.mode;
  if (!cfg.target.empty()) j["target"] = cfg.target;
  if (!cfg.dataset.empty()) j["dataset"] = cfg.dataset;
  if (!cfg.validation.empty()) j["validation"] = cfg.validation;
  j["degree"] = cfg.degree;
  j["seed"] = cfg.seed;
  j["out_dir"] = cfg.out_dir;
  if (cfg.subcommand == "fit") {
    j["fixed_coeffs"] = cfg.fixed_coeffs ? json(*cfg.fixed_coeffs) : json(nullptr);
    j["steps"] = cfg.steps;
    j["lr"] = cfg.lr;
    j["lr_min"] = cfg.lr_min;
    j["blocks"] = cfg.blocks;
    j["width"] = cfg.width;
    j["lipschitz"] = cfg.lipschitz;
    j["power_iterations"] = cfg.power_iterations;
    j["eval_every"] = cfg.eval_every;
    j["selection_points"] = cfg.selection_points;
    j["init_gain"] = cfg.init_gain;
  }
  if (cfg.subcommand == "baseline") j["solver"] = cfg.solver;
  if (cfg.subcommand == "construct") {
    j["scan_points"] = cfg.scan_points;
    j["h_samples"] = cfg.h_samples;
  }
  if (cfg.train_points) j["train_points"] = *cfg.train_points;
  if (cfg.validation_points) j["validation_points"] = *cfg.validation_points;
  if (!cfg.reports.empty()) j["reports"] = cfg.reports;
  return j.dump(2);
}

int cmd_construct(const RunConfig& cfg) {
  const RunDir dir(cfg);
  std::string name = cfg.target.empty() ? cfg.dataset : cfg.target;
  try {
    check_target_source(cfg);
    ScalarFunction f;
    Interval domain;
    if (!cfg.target.empty()) {
      const Benchmark b = benchmark(cfg.target);
      if (b.dim != 1) throw Error(ErrorCode::kPrecondition, "exact construction needs a one-dimensional target");
      f = [g = b.f](double x) { return g(std::span<const double>(&x, 1)); };
      domain = b.domain[0];
    } else {
      f = interpolant(load_dataset(cfg.dataset), domain);
    }
    CriticalScanOptions scan;
    scan.n_scan = cfg.scan_points;
    const CriticalSet cs = find_critical_sets(f, domain, scan);
    const auto values = cs.value_sequence();
    const ChandlerResult cr = chandler_polynomial(values);
    const PiecewiseHomeo h = exact_homeomorphism(f, cs, cr);
    const double comp = composition_error(f, h, cfg.h_samples);
    const double range = *std::max_element(values.begin(), values.end()) - *std::min_element(values.begin(), values.end());

    json chandler;
    chandler["degree"] = cr.p.degree();
    chandler["basis"] = "monomial";
    chandler["coefficients"] = std::vector<double>(cr.p.coeffs().begin(), cr.p.coeffs().end());
    chandler["values"] = values;
    chandler["nodes"] = cr.nodes;
    chandler["value_residual"] = cr.value_residual;
    chandler["derivative_residual"] = cr.derivative_residual;
    chandler["newton_iterations"] = cr.newton_iterations;
    dir.write("chandler.json", chandler.dump(2));

    std::ostringstream samples;
    samples.precision(17);
    samples << "x,h,f,p_of_h\n";
    const int n = std::max(cfg.h_samples, 2);
    std::vector<double> truth, pred;
    for (int i = 0; i < n; ++i) {
      const double x = i == n - 1 ? domain.hi : domain.lo + domain.width() * i / (n - 1);
      const double y = h(x);
      truth.push_back(f(x));
      pred.push_back(cr.p(y));
      samples << x << ',' << y << ',' << truth.back() << ',' << pred.back() << '\n';
    }
    const Metrics m = metrics(pred, truth);
    dir.write("h_samples.csv", samples.str());

    json report;
    report["target"] = name;
    report["mode"] = "exact";
    report["status"] = "ok";
    report["dim"] = 1;
    report["degree"] = cr.p.degree();
    report["n_basis"] = cr.p.degree() + 1;
    report["rmse"] = m.rmse;
    report["mae"] = m.mae;
    report["n_extremizers"] = cs.count();
    report["alternation_sign"] = cs.sign;
    json ext = json::array();
    for (const auto& e : cs.extremizers) {
      ext.push_back({{"lower", e.lower}, {"upper", e.upper}, {"value", e.value}, {"plateau", e.plateau},
                     {"kind", e.is_minimum ? "min" : "max"}});
    }
    report["extremizers"] = ext;
    report["composition_error"] = comp;
    report["composition_tolerance"] = 1e-8 * (1.0 + range);
    report["junction_gap"] = h.junction_gap();
    report["value_residual"] = cr.value_residual;
    report["derivative_residual"] = cr.derivative_residual;
    if (cs.count() == 1 && !cs.extremizers[0].plateau) {
      // Closed form sign(x - x0) sqrt|f - f(x0)| against the constructed map.
      const SingleExtremumMap closed = single_extremum_h(f, cs.extremizers[0].representative(), domain);
      double gap = 0.0;
      for (int i = 0; i < n; ++i) {
        const double x = i == n - 1 ? domain.hi : domain.lo + domain.width() * i / (n - 1);
        gap = std::max(gap, std::abs(closed.h(x) - (h(x) - cr.nodes[1])));
      }
      report["closed_form"] = {{"a0", closed.a0}, {"a2", closed.a2}, {"x0", closed.x0}, {"max_deviation", gap}};
    }
    dir.write("report.json", report.dump(2));
    std::cout << dir.path.string() << ": degree " << cr.p.degree() << ", composition error " << comp << '\n';
    return kExitOk;
  } catch (const Error& e) {
    dir.write("report.json", error_report(cfg, name, e).dump(2));
    std::cerr << "construct: " << e.reason() << ": " << e.what() << '\n';
    return kExitInput;
  }
}

int cmd_fit(const RunConfig& cfg) {
  const RunDir dir(cfg);
  std::string name = cfg.target.empty() ? cfg.dataset : cfg.target;
  try {
    const Problem prob = load_problem(cfg);
    name = prob.name;
    FitConfig fc;
    fc.degree = cfg.degree < 0 ? 2 : cfg.degree;
    fc.fixed_coeffs = cfg.fixed_coeffs;
    fc.steps = cfg.steps;
    fc.lr = cfg.lr;
    fc.lr_min = cfg.lr_min;
    fc.eval_every = cfg.eval_every;
    fc.seed = cfg.seed;
    fc.n_blocks = cfg.blocks;
    fc.width = cfg.width;
    fc.lipschitz = cfg.lipschitz;
    fc.power_iterations = cfg.power_iterations;
    fc.selection_points = cfg.selection_points;
    fc.init_gain = cfg.init_gain;
    FitResult result = train(prob.train, prob.validation, prob.domain, fc);
    result.report.target = name;

    json model;
    model["indices"] = result.indices;
    model["coeffs"] = std::vector<double>(result.coeffs.data(), result.coeffs.data() + result.coeffs.size());
    model["network"] = json::parse(result.net.to_json());
    dir.write("checkpoint.json", model.dump(1));
    const Eigen::VectorXd pred = result.predict(prob.validation.x);
    dir.write("residuals.csv", residual_table(prob.validation.x, prob.validation.y, pred));
    json report = json::parse(report_to_json(result.report));
    report["status"] = result.report.diverged ? "diverged" : "ok";
    dir.write("report.json", report.dump(2));
    std::cout << dir.path.string() << ": rmse " << result.report.validation.rmse << ", mae "
              << result.report.validation.mae << ", n_basis " << result.report.n_basis << '\n';
    if (result.report.diverged) {
      std::cerr << "fit: training diverged; reporting the last finite snapshot\n";
      return kExitOptimization;
    }
    return kExitOk;
  } catch (const Error& e) {
    dir.write("report.json", error_report(cfg, name, e).dump(2));
    std::cerr << "fit: " << e.reason() << ": " << e.what() << '\n';
    return exit_code_for(e);
  }
}

int cmd_baseline(const RunConfig& cfg) {
  const RunDir dir(cfg);
  std::string name = cfg.target.empty() ? cfg.dataset : cfg.target;
  try {
    if (cfg.degree < 0) throw Error(ErrorCode::kUsage, "baseline needs --degree");
    if (cfg.solver != "pinv" && cfg.solver != "qr") throw Error(ErrorCode::kUsage, "solver must be pinv or qr");
    const Problem prob = load_problem(cfg);
    name = prob.name;
    const auto solver = cfg.solver == "qr" ? LeastSquaresSolver::kOrthogonalQr : LeastSquaresSolver::kPseudoinverse;
    BaselineResult result = fit_baseline(prob.train, prob.validation, prob.domain, cfg.degree, solver);
    result.report.target = name;
    result.report.seed = cfg.seed;
    json model;
    model["basis"] = result.expansion.basis == Basis::kLegendre ? "legendre" : "mapped-monomial";
    json dom = json::array();
    for (const auto& iv : result.expansion.domain) dom.push_back({iv.lo, iv.hi});
    model["domain"] = dom;
    model["indices"] = result.expansion.indices;
    model["coeffs"] = std::vector<double>(result.expansion.coeffs.data(),
                                          result.expansion.coeffs.data() + result.expansion.coeffs.size());
    dir.write("model.json", model.dump(1));
    dir.write("residuals.csv",
              residual_table(prob.validation.x, prob.validation.y, result.expansion.evaluate(prob.validation.x)));
    json report = json::parse(report_to_json(result.report));
    report["status"] = "ok";
    dir.write("report.json", report.dump(2));
    std::cout << dir.path.string() << ": rmse " << result.report.validation.rmse << ", mae "
              << result.report.validation.mae << ", n_basis " << result.report.n_basis << '\n';
    return kExitOk;
  } catch (const Error& e) {
    dir.write("report.json", error_report(cfg, name, e).dump(2));
    std::cerr << "baseline: " << e.reason() << ": " << e.what() << '\n';
    return kExitInput;
  }
}

int cmd_report(const RunConfig& cfg) {
  try {
    if (cfg.reports.empty()) throw Error(ErrorCode::kUsage, "report needs at least one report.json");
    struct Row {
      std::string model;
      int dim;
      int degree;
      long n_basis;
      double rmse;
      double mae;
    };
    std::vector<Row> rows;
    for (const auto& path : cfg.reports) {
      const json j = read_json(path);
      try {
        if (j.value("status", "ok") == "error") throw Error(ErrorCode::kPrecondition, path + " records a failed run");
        const std::string mode = j.at("mode").get<std::string>();
        const std::string label = mode == "learned" ? "induced" : mode;
        rows.push_back({j.at("target").get<std::string>() + " " + label, j.at("dim").get<int>(), j.at("degree").get<int>(),
                        j.at("n_basis").get<long>(), j.at("rmse").get<double>(), j.at("mae").get<double>()});
      } catch (const json::exception& e) {
        throw ParseError(path + ": not a fit report (" + e.what() + ")", 0);
      }
    }
    const bool mixed = std::any_of(rows.begin(), rows.end(), [&](const Row& r) { return r.dim != rows.front().dim; });
    std::ostringstream md, csv;
    md << "| Model |" << (mixed ? " Dim |" : "") << " Degree | # Basis Functions | RMSE | MAE |\n";
    md << "|---|" << (mixed ? "---|" : "") << "---|---|---|---|\n";
    csv << "model," << (mixed ? "dim," : "") << "degree,n_basis,rmse,mae\n";
    csv.precision(17);
    for (const auto& r : rows) {
      md << "| " << r.model << " |" << (mixed ? " " + std::to_string(r.dim) + " |" : "") << ' ' << r.degree << " | "
         << r.n_basis << " | " << format_number(r.rmse) << " | " << format_number(r.mae) << " |\n";
      csv << r.model << ',' << (mixed ? std::to_string(r.dim) + "," : "") << r.degree << ',' << r.n_basis << ','
          << r.rmse << ',' << r.mae << '\n';
    }
    const RunDir dir(cfg);
    dir.write("table.md", md.str());
    dir.write("table.csv", csv.str());
    std::cout << md.str();
    return kExitOk;
  } catch (const Error& e) {
    std::cerr << "report: " << e.reason() << ": " << e.what() << '\n';
    return kExitInput;
  }
}

int run(int argc, const char* const* argv) {
  CLI::App app{"Polynomials composed with homeomorphisms: exact construction, learned fits and baselines"};
  app.require_subcommand(1);
  RunConfig cfg;
  std::string coeffs_text;

  auto add_common = [&](CLI::App* sub) {
    auto* src = sub->add_option("--target", cfg.target, "Benchmark target (f1, f2, f3, f4, pes)");
    auto* data = sub->add_option("--dataset", cfg.dataset, "CSV dataset with header x0[,x1...],value");
    src->excludes(data);
    sub->add_option("--out", cfg.out_dir, "Output directory (a suffix is added if it exists)");
    sub->add_option("--seed", cfg.seed, "Random seed");
  };
  auto add_grid = [&](CLI::App* sub) {
    sub->add_option("--validation", cfg.validation, "CSV validation data (with --dataset)");
    sub->add_option("--train-points", cfg.train_points, "Training points per axis")->check(CLI::Range(2, 100000));
    sub->add_option("--validation-points", cfg.validation_points, "Validation points per axis")->check(CLI::Range(2, 100000));
  };

  auto* construct = app.add_subcommand("construct", "Exact polynomial and homeomorphism for a 1D target");
  add_common(construct);
  construct->add_option("--scan-points", cfg.scan_points, "Critical-set scan resolution")->check(CLI::Range(3, 10000000));
  construct->add_option("--samples", cfg.h_samples, "Points in h_samples.csv")->check(CLI::Range(2, 10000000));

  auto* fit = app.add_subcommand("fit", "Learned homeomorphism with a polynomial head");
  add_common(fit);
  add_grid(fit);
  fit->add_option("--degree", cfg.degree, "Total degree of the polynomial")->check(CLI::NonNegativeNumber);
  fit->add_option("--fixed-coeffs", coeffs_text, "Comma-separated fixed coefficients");
  fit->add_option("--steps", cfg.steps, "Adam steps")->check(CLI::NonNegativeNumber);
  fit->add_option("--lr", cfg.lr, "Initial learning rate")->check(CLI::PositiveNumber);
  fit->add_option("--lr-min", cfg.lr_min, "Final learning rate of the cosine schedule")->check(CLI::PositiveNumber);
  fit->add_option("--blocks", cfg.blocks, "Residual blocks")->check(CLI::NonNegativeNumber);
  fit->add_option("--width", cfg.width, "Hidden width")->check(CLI::PositiveNumber);
  fit->add_option("--lipschitz", cfg.lipschitz, "Lipschitz budget per block")->check(CLI::Range(1e-6, 0.999999));
  fit->add_option("--power-iterations", cfg.power_iterations, "Power iterations per step")->check(CLI::PositiveNumber);
  fit->add_option("--eval-every", cfg.eval_every, "Snapshot selection interval")->check(CLI::PositiveNumber);
  fit->add_option("--init-gain", cfg.init_gain, "Scale of the initial last-layer weights (0 = identity start)")
      ->check(CLI::NonNegativeNumber);
  fit->add_option("--selection-points", cfg.selection_points, "Validation points used for snapshot selection (0 = all)")
      ->check(CLI::NonNegativeNumber);

  auto* baseline = app.add_subcommand("baseline", "Direct total-degree polynomial least squares");
  add_common(baseline);
  add_grid(baseline);
  baseline->add_option("--degree", cfg.degree, "Total degree")->required()->check(CLI::NonNegativeNumber);
  baseline->add_option("--solver", cfg.solver, "pinv (SVD pseudoinverse) or qr (orthogonal basis)")
      ->check(CLI::IsMember({"pinv", "qr"}));

  auto* report = app.add_subcommand("report", "Comparison table from report.json files");
  report->add_option("reports", cfg.reports, "report.json files")->required();
  report->add_option("--out", cfg.out_dir, "Output directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitInput;
  }

  try {
    if (!coeffs_text.empty()) {
      std::vector<double> c;
      std::stringstream ss(coeffs_text);
      std::string item;
      while (std::getline(ss, item, ',')) {
        std::size_t used = 0;
        c.push_back(std::stod(item, &used));
        if (used != item.size()) throw std::invalid_argument(item);
      }
      cfg.fixed_coeffs = c;
    }
  } catch (const std::exception&) {
    std::cerr << "fit: --fixed-coeffs must be a comma-separated list of numbers\n";
    return kExitInput;
  }

  try {
    if (construct->parsed()) {
      cfg.subcommand = "construct";
      cfg.mode = "exact";
      return cmd_construct(cfg);
    }
    if (fit->parsed()) {
      cfg.subcommand = "fit";
      cfg.mode = "learned";
      return cmd_fit(cfg);
    }
    if (baseline->parsed()) {
      cfg.subcommand = "baseline";
      cfg.mode = "baseline";
      return cmd_baseline(cfg);
    }
    cfg.subcommand = "report";
    cfg.mode = "report";
    if (cfg.out_dir == "runs/run") cfg.out_dir = "runs/report";
    return cmd_report(cfg);
  } catch (const Error& e) {
    std::cerr << cfg.subcommand << ": " << e.reason() << ": " << e.what() << '\n';
    return kExitInput;
  }
}

}  // namespace homeofit::cli
