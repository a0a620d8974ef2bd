#include <benchmark/benchmark.h>

#include <random>

#include "homeofit/construct.hpp"
#include "homeofit/critical.hpp"
#include "homeofit/fit.hpp"
#include "homeofit/invnet.hpp"
#include "homeofit/poly.hpp"
#include "homeofit/targets.hpp"

using namespace homeofit;

namespace {

std::vector<double> random_coeffs(int degree, std::uint64_t seed) {
  std::mt19937_64 gen(seed);
  std::normal_distribution<double> n;
  std::vector<double> c(static_cast<std::size_t>(degree + 1));
  for (double& v : c) v = n(gen);
  return c;
}

Eigen::MatrixXd grid_points(int dim, int n, double lo, double hi) {
  std::mt19937_64 gen(7);
  std::uniform_real_distribution<double> u(lo, hi);
  Eigen::MatrixXd x(dim, n);
  for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = u(gen);
  return x;
}

InvResNet make_net(int dim) {
  InvResNetConfig cfg;
  cfg.dim = dim;
  cfg.seed = 3;
  return InvResNet::init(cfg);
}

}  // namespace

static void BM_PolyEval(benchmark::State& state) {
  const int degree = static_cast<int>(state.range(0));
  const Polynomial p(Basis::kLegendre, random_coeffs(degree, 1), Interval{-1.0, 1.0});
  double x = -0.9;
  for (auto _ : state) {
    benchmark::DoNotOptimize(p(x));
    x = x > 0.9 ? -0.9 : x + 1e-3;
  }
}
BENCHMARK(BM_PolyEval)->Arg(2)->Arg(10)->Arg(40)->Arg(80);

static void BM_MonotoneInversion(benchmark::State& state) {
  const auto p = Polynomial::monomial({0.0, 1.0, 0.0, 0.3});
  double y = 0.1;
  for (auto _ : state) {
    benchmark::DoNotOptimize(invert_on_monotone_interval(p, {-2.0, 2.0}, y));
    y = y > 3.0 ? -3.0 : y + 0.01;
  }
}
BENCHMARK(BM_MonotoneInversion);

static void BM_Chandler(benchmark::State& state) {
  const int m = static_cast<int>(state.range(0));
  std::vector<double> values;
  for (int i = 0; i <= m + 1; ++i) values.push_back((i % 2 == 0 ? 0.0 : 1.0) + 0.1 * i);
  for (auto _ : state) benchmark::DoNotOptimize(chandler_polynomial(values));
}
BENCHMARK(BM_Chandler)->DenseRange(1, 4)->Unit(benchmark::kMicrosecond);

static void BM_ExactConstruction(benchmark::State& state) {
  for (auto _ : state) {
    const auto cs = find_critical_sets(f2, {-3.0, 3.0});
    const auto h = exact_homeomorphism(f2, cs, chandler_polynomial(cs.value_sequence()));
    benchmark::DoNotOptimize(composition_error(f2, h));
  }
}
BENCHMARK(BM_ExactConstruction)->Unit(benchmark::kMillisecond);

static void BM_NetForward(benchmark::State& state) {
  const int dim = static_cast<int>(state.range(0));
  const auto net = make_net(dim);
  const Eigen::MatrixXd x = grid_points(dim, static_cast<int>(state.range(1)), -1.0, 1.0);
  for (auto _ : state) benchmark::DoNotOptimize(net.forward(x));
  state.SetItemsProcessed(state.iterations() * x.cols());
}
BENCHMARK(BM_NetForward)->Args({1, 301})->Args({2, 400})->Args({3, 4096})->Unit(benchmark::kMicrosecond);

static void BM_NetForwardBackward(benchmark::State& state) {
  const int dim = static_cast<int>(state.range(0));
  const auto net = make_net(dim);
  const Eigen::MatrixXd x = grid_points(dim, static_cast<int>(state.range(1)), -1.0, 1.0);
  const Eigen::MatrixXd up = Eigen::MatrixXd::Ones(dim, x.cols());
  ForwardCache cache;
  for (auto _ : state) {
    (void)net.forward(x, cache);
    benchmark::DoNotOptimize(net.backward(cache, up));
  }
  state.SetItemsProcessed(state.iterations() * x.cols());
}
BENCHMARK(BM_NetForwardBackward)->Args({1, 301})->Args({2, 400})->Args({3, 4096})->Unit(benchmark::kMicrosecond);

static void BM_NetInverse(benchmark::State& state) {
  const auto net = make_net(1);
  const Eigen::MatrixXd q = net.forward(grid_points(1, 301, -1.0, 1.0));
  for (auto _ : state) benchmark::DoNotOptimize(net.inverse(q));
}
BENCHMARK(BM_NetInverse)->Unit(benchmark::kMicrosecond);

static void BM_DesignAndVarpro(benchmark::State& state) {
  const int dim = static_cast<int>(state.range(0)), degree = static_cast<int>(state.range(1));
  const auto indices = total_degree_indices(dim, degree);
  const Eigen::MatrixXd q = grid_points(dim, 4096, -1.0, 1.0);
  const Eigen::VectorXd y = q.colwise().squaredNorm().transpose();
  for (auto _ : state) benchmark::DoNotOptimize(varpro_coeffs(design_matrix(q, indices), y));
}
BENCHMARK(BM_DesignAndVarpro)->Args({1, 3})->Args({2, 2})->Args({3, 4})->Unit(benchmark::kMicrosecond);

static void BM_PesBaselineFit(benchmark::State& state) {
  const auto b = homeofit::benchmark("pes");
  GridSpec g = GridSpec::uniform(b.domain, static_cast<int>(state.range(0)));
  const Dataset d = make_dataset(b.f, g, b.cutoff, b.minimum);
  for (auto _ : state) {
    benchmark::DoNotOptimize(fit_baseline(d, d, b.domain, 8, LeastSquaresSolver::kPseudoinverse));
  }
}
BENCHMARK(BM_PesBaselineFit)->Arg(16)->Unit(benchmark::kMillisecond);
BENCHMARK_MAIN();
