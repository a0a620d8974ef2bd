#include <gtest/gtest.h>

#include <Eigen/SVD>
#include <cmath>
#include <random>

#include "homeofit/errors.hpp"
#include "homeofit/invnet.hpp"
#include "oracles.hpp"

using namespace homeofit;

namespace {

InvResNetConfig small_config(int dim, int blocks, int width, std::uint64_t seed = 1) {
  InvResNetConfig c;
  c.dim = dim;
  c.n_blocks = blocks;
  c.width = width;
  c.seed = seed;
  return c;
}

Eigen::MatrixXd random_points(std::mt19937_64& gen, int dim, int n, double lo = -1.0, double hi = 1.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  Eigen::MatrixXd x(dim, n);
  for (int j = 0; j < n; ++j) {
    for (int i = 0; i < dim; ++i) x(i, j) = u(gen);
  }
  return x;
}

double spectral_norm(const Eigen::MatrixXd& m) {
  return Eigen::JacobiSVD<Eigen::MatrixXd>(m).singularValues()(0);
}

/// Raw weight matrix of (block, layer) read straight from the flat layout.
Eigen::MatrixXd raw_weight(const InvResNet& net, int block, int layer) {
  const int d = net.dim(), w = net.width();
  const std::size_t per_block = static_cast<std::size_t>(w * d + w + w * w + w + d * w + d + 2);
  std::size_t off = per_block * static_cast<std::size_t>(block);
  const int rows[3] = {w, w, d}, cols[3] = {d, w, w};
  for (int l = 0; l < layer; ++l) off += static_cast<std::size_t>(rows[l] * cols[l] + rows[l]);
  Eigen::MatrixXd m(rows[layer], cols[layer]);
  for (int c = 0; c < cols[layer]; ++c) {
    for (int r = 0; r < rows[layer]; ++r) m(r, c) = net.params()[off + static_cast<std::size_t>(c * rows[layer] + r)];
  }
  return m;
}

}  // namespace

TEST(LipSwish, ValuesAndSlopeBound) {
  EXPECT_EQ(lipswish(0.0, 1.0), 0.0);
  EXPECT_NEAR(lipswish(2.0, 1.0), 2.0 / (1.0 + std::exp(-2.0)) / 1.1, 1e-15);
  for (double beta : {1e-3, 0.1, 1.0, 3.0, 10.0, 50.0}) {
    for (int k = -400; k < 400; ++k) {
      const double x = k / 40.0;
      const double slope = oracles::central_difference([&](double t) { return lipswish(t, beta); }, x, 1e-6);
      EXPECT_LE(std::abs(slope), 1.0 + 1e-6) << "beta " << beta << " x " << x;
    }
  }
}

TEST(InvResNet, RejectsInvalidConfiguration) {
  for (double c : {0.0, 1.0, 1.5, -0.3}) {
    auto cfg = small_config(1, 2, 4);
    cfg.lipschitz = c;
    EXPECT_THROW((void)InvResNet::init(cfg), Error) << c;
  }
  EXPECT_THROW((void)InvResNet::init(small_config(0, 2, 4)), Error);
  EXPECT_THROW((void)InvResNet::init(small_config(1, -1, 4)), Error);
  EXPECT_THROW((void)InvResNet::init(small_config(1, 2, 0)), Error);
  auto cfg = small_config(2, 2, 4);
  cfg.domain = {Interval{0.0, 1.0}};
  EXPECT_THROW((void)InvResNet::init(cfg), Error);
}

TEST(InvResNet, SameSeedSameParameters) {
  const auto a = InvResNet::init(small_config(2, 3, 5, 42));
  const auto b = InvResNet::init(small_config(2, 3, 5, 42));
  const auto c = InvResNet::init(small_config(2, 3, 5, 43));
  ASSERT_EQ(a.n_params(), b.n_params());
  EXPECT_TRUE(std::equal(a.params().begin(), a.params().end(), b.params().begin()));
  EXPECT_FALSE(std::equal(a.params().begin(), a.params().end(), c.params().begin()));
}

TEST(InvResNet, ParameterCountMatchesLayout) {
  const auto net = InvResNet::init(small_config(3, 4, 6));
  const std::size_t per_block = 6 * 3 + 6 + 6 * 6 + 6 + 3 * 6 + 3 + 2;
  EXPECT_EQ(net.n_params(), 4 * per_block + 2 * 3);
  EXPECT_EQ(net.log_scale_offset(), 4 * per_block);
  EXPECT_EQ(net.shift_offset(), 4 * per_block + 3);
}

TEST(InvResNet, ZeroWeightsGiveIdentityOnDomain) {
  auto cfg = small_config(2, 3, 4);
  cfg.domain = {Interval{-10.0, 10.0}, Interval{0.0, 2.0}};
  auto net = InvResNet::init(cfg);
  net.zero_weights();
  std::mt19937_64 gen(3);
  Eigen::MatrixXd x = random_points(gen, 2, 50);
  x.row(0) *= 10.0;
  x.row(1) = x.row(1).array() + 1.0;
  EXPECT_LE((net.forward(x) - x).cwiseAbs().maxCoeff(), 1e-13);
}

TEST(InvResNet, SpectralNormalizationMatchesSvd) {
  auto net = InvResNet::init(small_config(2, 3, 6, 9));
  // Inflate the raw weights so every layer is actually rescaled.
  std::vector<double> p(net.params().begin(), net.params().end());
  for (double& v : p) v *= 5.0;
  net.set_params(p);
  net.spectral_normalize(4);
  const double root = std::cbrt(net.lipschitz());
  for (int b = 0; b < 3; ++b) {
    for (int l = 0; l < 3; ++l) {
      const double exact = std::min(1.0, root / spectral_norm(raw_weight(net, b, l)));
      EXPECT_NEAR(net.layer_scale(b, l), exact, 0.01 * exact) << b << "," << l;
    }
  }
  net.normalize_to_convergence();
  for (int b = 0; b < 3; ++b) {
    for (int l = 0; l < 3; ++l) {
      EXPECT_NEAR(spectral_norm(net.layer_weight(b, l)), root, 1e-9);
    }
  }
}

TEST(InvResNet, DiagonalWeightScale) {
  auto net = InvResNet::init(small_config(2, 1, 2));
  net.zero_weights();
  auto p = net.mutable_params();
  p[0] = 2.0;  // V1 = diag(2, 1)
  p[3] = 1.0;
  net.normalize_to_convergence();
  EXPECT_NEAR(net.layer_scale(0, 0), std::cbrt(0.97) / 2.0, 1e-9);
  EXPECT_NEAR(net.layer_scale(0, 0), 0.495, 5e-4);
  EXPECT_EQ(net.layer_scale(0, 1), 1.0);
}

TEST(InvResNet, ResidualBranchesAreContractions) {
  auto net = InvResNet::init(small_config(3, 4, 8, 5));
  std::vector<double> p(net.params().begin(), net.params().end());
  for (double& v : p) v *= 3.0;
  net.set_params(p);
  net.normalize_to_convergence();
  std::mt19937_64 gen(8);
  for (int b = 0; b < 4; ++b) {
    double cert = 1.0;
    for (int l = 0; l < 3; ++l) cert *= spectral_norm(net.layer_weight(b, l));
    EXPECT_LE(cert, net.lipschitz() * (1.0 + 1e-9));
    const Eigen::MatrixXd a = random_points(gen, 3, 200, -3.0, 3.0);
    const Eigen::MatrixXd d = 1e-3 * random_points(gen, 3, 200);
    const Eigen::MatrixXd ga = net.residual(b, a), gb = net.residual(b, a + d);
    for (int j = 0; j < 200; ++j) {
      EXPECT_LE((gb.col(j) - ga.col(j)).norm(), net.lipschitz() * d.col(j).norm() * (1.0 + 1e-9));
    }
  }
}

TEST(InvResNet, InverseRoundtrip) {
  std::mt19937_64 gen(12);
  for (int dim : {1, 2, 3}) {
    auto cfg = small_config(dim, 15, 8, 100 + static_cast<std::uint64_t>(dim));
    for (int i = 0; i < dim; ++i) cfg.domain.push_back({-2.0, 5.0});
    auto net = InvResNet::init(cfg);
    std::vector<double> p(net.params().begin(), net.params().end());
    for (double& v : p) v *= 4.0;
    net.set_params(p);
    net.normalize_to_convergence();
    Eigen::MatrixXd x = random_points(gen, dim, 500, -2.0, 5.0);
    int iterations = 0;
    const Eigen::MatrixXd back = net.inverse(net.forward(x), 1e-10, &iterations);
    EXPECT_LE((back - x).cwiseAbs().maxCoeff(), 1e-6) << "dim " << dim;
    EXPECT_GT(iterations, 0);
    EXPECT_LE(iterations, 600 * 15);
  }
}

TEST(InvResNet, DefaultNetInvertsQuickly) {
  const auto net = InvResNet::init(small_config(1, 15, 8, 2));
  std::mt19937_64 gen(1);
  int iterations = 0;
  const Eigen::MatrixXd x = random_points(gen, 1, 100);
  (void)net.inverse(net.forward(x), 1e-10, &iterations);
  EXPECT_LE(iterations, 600);
}

TEST(InvResNet, OneDimensionalMapIsStrictlyIncreasing) {
  auto cfg = small_config(1, 15, 8, 77);
  cfg.domain = {Interval{-3.0, 3.0}};
  auto net = InvResNet::init(cfg);
  std::vector<double> p(net.params().begin(), net.params().end());
  for (double& v : p) v *= 10.0;
  net.set_params(p);
  Eigen::MatrixXd x(1, 1000);
  for (int j = 0; j < 1000; ++j) x(0, j) = -3.0 + 6.0 * j / 999.0;
  const Eigen::MatrixXd q = net.forward(x);
  for (int j = 0; j + 1 < 1000; ++j) EXPECT_LT(q(0, j), q(0, j + 1));
}

TEST(InvResNet, GradientMatchesFiniteDifferences) {
  auto cfg = small_config(2, 2, 4, 31);
  cfg.domain = {Interval{-1.0, 2.0}, Interval{0.0, 1.0}};
  auto net = InvResNet::init(cfg);
  // Small weights keep every normalization factor at 1, where it is truly constant.
  std::vector<double> p(net.params().begin(), net.params().end());
  std::mt19937_64 gen(4);
  std::uniform_real_distribution<double> u(-0.2, 0.2);
  for (double& v : p) v *= 0.2;
  for (std::size_t i = net.log_scale_offset(); i < p.size(); ++i) p[i] = u(gen);
  net.set_params(p);
  for (int b = 0; b < 2; ++b) {
    for (int l = 0; l < 3; ++l) ASSERT_EQ(net.layer_scale(b, l), 1.0);
  }
  Eigen::MatrixXd x = random_points(gen, 2, 7);
  x.row(0) = 1.5 * x.row(0).array() + 0.5;
  x.row(1) = 0.5 * x.row(1).array() + 0.5;
  const Eigen::MatrixXd up = random_points(gen, 2, 7);

  ForwardCache cache;
  (void)net.forward(x, cache);
  const auto grad = net.backward(cache, up);
  ASSERT_EQ(grad.size(), p.size());

  auto objective = [&](const std::vector<double>& v) {
    net.set_params(v);
    return (net.forward(x).array() * up.array()).sum();
  };
  const double h = 1e-6;
  for (std::size_t i = 0; i < p.size(); ++i) {
    auto plus = p, minus = p;
    plus[i] += h;
    minus[i] -= h;
    const double fd = (objective(plus) - objective(minus)) / (2.0 * h);
    EXPECT_NEAR(grad[i], fd, 1e-4 * std::max(1.0, std::abs(fd))) << "param " << i;
  }
}

TEST(InvResNet, GradientIsBitwiseRepeatable) {
  const auto net = InvResNet::init(small_config(2, 3, 8, 12));
  std::mt19937_64 gen(8);
  const Eigen::MatrixXd x = random_points(gen, 2, 301), up = random_points(gen, 2, 301);
  std::vector<double> first;
  std::vector<std::vector<double>> spacers;
  for (int t = 0; t < 8; ++t) {
    // Shift the heap so the gradient buffer lands at different alignments.
    spacers.emplace_back(static_cast<std::size_t>(t + 1), 0.0);
    const InvResNet copy = net;
    ForwardCache cache;
    (void)copy.forward(x, cache);
    const auto grad = copy.backward(cache, up);
    if (t == 0) first = grad;
    ASSERT_EQ(grad, first) << "repeat " << t;
  }
}

TEST(InvResNet, IdentityActivationChainRule) {
  auto cfg = small_config(1, 3, 3, 6);
  cfg.activation = Activation::kIdentity;
  auto net = InvResNet::init(cfg);
  std::vector<double> p(net.params().begin(), net.params().end());
  p[net.log_scale_offset()] = 0.3;
  p[net.shift_offset()] = -0.1;
  net.set_params(p);
  net.normalize_to_convergence();

  // Each block is z -> (1 + a_k) z + c_k with a_k = W3 W2 W1 and c_k = W3 (W2 b1 + b2) + b3.
  const std::size_t per_block = 3 + 3 + 9 + 3 + 3 + 1 + 2;
  std::vector<double> a(3), c(3);
  for (int k = 0; k < 3; ++k) {
    const std::size_t off = per_block * static_cast<std::size_t>(k);
    const Eigen::Map<const Eigen::VectorXd> b1(&p[off + 3], 3), b2(&p[off + 15], 3);
    const double b3 = p[off + 21];
    const Eigen::MatrixXd &w1 = net.layer_weight(k, 0), &w2 = net.layer_weight(k, 1), &w3 = net.layer_weight(k, 2);
    a[static_cast<std::size_t>(k)] = (w3 * w2 * w1)(0, 0);
    c[static_cast<std::size_t>(k)] = (w3 * (w2 * b1 + b2))(0, 0) + b3;
  }
  const double s = 0.3, t = -0.1;
  Eigen::MatrixXd x(1, 5);
  x << -0.9, -0.3, 0.0, 0.4, 0.8;
  ForwardCache cache;
  const Eigen::MatrixXd q = net.forward(x, cache);
  for (int j = 0; j < 5; ++j) {
    double z = x(0, j);
    for (int k = 0; k < 3; ++k) z = (1.0 + a[static_cast<std::size_t>(k)]) * z + c[static_cast<std::size_t>(k)];
    EXPECT_NEAR(q(0, j), std::exp(s) * z + t, 1e-12);
  }
  const Eigen::MatrixXd up = Eigen::MatrixXd::Ones(1, 5);
  const auto g = net.backward(cache, up);
  EXPECT_NEAR(g[net.shift_offset()], 5.0, 1e-12);
  // dq/db3 of block k is exp(s) * prod_{j > k} (1 + a_j).
  for (int k = 0; k < 3; ++k) {
    double chain = std::exp(s);
    for (int j = k + 1; j < 3; ++j) chain *= 1.0 + a[static_cast<std::size_t>(j)];
    EXPECT_NEAR(g[per_block * static_cast<std::size_t>(k) + 21], 5.0 * chain, 1e-12) << "block " << k;
  }
}

TEST(InvResNet, BackwardRejectsMissingOrStaleCache) {
  auto net = InvResNet::init(small_config(1, 2, 3));
  const Eigen::MatrixXd x = Eigen::MatrixXd::Zero(1, 4);
  ForwardCache empty;
  try {
    (void)net.backward(empty, x);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kUsage);
  }
  ForwardCache cache;
  (void)net.forward(x, cache);
  EXPECT_NO_THROW((void)net.backward(cache, x));
  net.mutable_params()[0] += 0.1;
  net.spectral_normalize();
  try {
    (void)net.backward(cache, x);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kUsage);
  }
}

TEST(InvResNet, CheckpointRoundtrip) {
  auto cfg = small_config(2, 3, 5, 8);
  cfg.domain = {Interval{-1.0, 3.0}, Interval{2.0, 4.0}};
  auto net = InvResNet::init(cfg);
  std::vector<double> p(net.params().begin(), net.params().end());
  for (double& v : p) v *= 2.5;
  net.set_params(p);
  const auto restored = InvResNet::from_json(net.to_json());
  EXPECT_TRUE(std::equal(net.params().begin(), net.params().end(), restored.params().begin()));
  std::mt19937_64 gen(2);
  Eigen::MatrixXd x = random_points(gen, 2, 30);
  x.row(0) = 2.0 * x.row(0).array() + 1.0;
  x.row(1) = x.row(1).array() + 3.0;
  EXPECT_EQ((net.forward(x) - restored.forward(x)).cwiseAbs().maxCoeff(), 0.0);
  EXPECT_THROW((void)InvResNet::from_json("{}"), ParseError);
  EXPECT_THROW((void)InvResNet::from_json("not json"), ParseError);
}
