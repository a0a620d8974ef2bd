#include <gtest/gtest.h>

#include <array>
#include <cmath>
#include <random>

#include "homeofit/construct.hpp"
#include "homeofit/errors.hpp"
#include "homeofit/targets.hpp"
#include "oracles.hpp"

using namespace homeofit;

namespace {

double max_abs(std::span<const double> v) {
  double m = 0.0;
  for (double x : v) m = std::max(m, std::abs(x));
  return m;
}

void expect_valid(const ChandlerResult& r, std::span<const double> values, double rel) {
  const double scale = 1.0 + max_abs(values);
  ASSERT_EQ(r.nodes.size(), values.size());
  EXPECT_EQ(r.p.degree(), static_cast<int>(values.size()) - 1);
  for (std::size_t i = 0; i + 1 < r.nodes.size(); ++i) EXPECT_LT(r.nodes[i], r.nodes[i + 1]);
  const Polynomial dp = derivative(r.p);
  for (std::size_t i = 0; i < values.size(); ++i) EXPECT_NEAR(r.p(r.nodes[i]), values[i], rel * scale);
  for (std::size_t j = 1; j + 1 < r.nodes.size(); ++j) EXPECT_NEAR(dp(r.nodes[j]), 0.0, rel * scale);
}

}  // namespace

TEST(Chandler, LinearCase) {
  const std::vector<double> v{3.0, -1.0};
  const auto r = chandler_polynomial(v);
  EXPECT_EQ(r.p.degree(), 1);
  EXPECT_NEAR(r.p(0.0), 3.0, 1e-14);
  EXPECT_NEAR(r.p(1.0), -1.0, 1e-14);
}

TEST(Chandler, QuadraticCase) {
  const std::vector<double> v{11.0, 2.0, 6.0};
  const auto r = chandler_polynomial(v);
  expect_valid(r, v, 1e-12);
  EXPECT_NEAR(r.nodes[0], -3.0, 1e-12);
  EXPECT_NEAR(r.nodes[2], 2.0, 1e-12);
  EXPECT_GT(r.p.coeffs().back(), 0.0);
  const std::vector<double> w{0.0, 1.0, 0.5};
  const auto q = chandler_polynomial(w);
  expect_valid(q, w, 1e-12);
  EXPECT_LT(q.p.coeffs().back(), 0.0);
}

TEST(Chandler, CubicKnownNodes) {
  const std::vector<double> v{0.0, 1.0, -1.0, 2.0};
  const auto r = chandler_polynomial(v);
  expect_valid(r, v, 1e-10);
  EXPECT_NEAR(r.nodes[0], -0.366025, 1e-5);
  EXPECT_NEAR(r.nodes[1], 0.0, 1e-14);
  EXPECT_NEAR(r.nodes[2], 1.0, 1e-14);
  EXPECT_NEAR(r.nodes[3], 1.597912, 1e-5);
}

TEST(Chandler, CubicAgreesWithBruteForceOracle) {
  std::mt19937_64 gen(99);
  for (int trial = 0; trial < 6; ++trial) {
    const auto seq = oracles::random_alternating(gen, 2, 0.3, 2.0);
    const auto r = chandler_polynomial(seq);
    expect_valid(r, seq, 1e-10);
    const std::array<double, 4> f{seq[0], seq[1], seq[2], seq[3]};
    const auto ref = oracles::brute_force_cubic_nodes(f, 200, 10);
    const double w = r.nodes[3] - r.nodes[0];
    EXPECT_NEAR((r.nodes[1] - r.nodes[0]) / w, ref[0], 1e-6) << "trial " << trial;
    EXPECT_NEAR((r.nodes[2] - r.nodes[0]) / w, ref[1], 1e-6) << "trial " << trial;
  }
}

TEST(Chandler, RandomSequencesSolveValueAndDerivativeConditions) {
  std::mt19937_64 gen(7);
  for (int trial = 0; trial < 60; ++trial) {
    const int m = 2 + trial % 6;
    const auto seq = oracles::random_alternating(gen, m);
    const auto r = chandler_polynomial(seq);
    expect_valid(r, seq, 1e-9);
    EXPECT_NEAR(r.nodes[1], 0.0, 1e-14);
    EXPECT_NEAR(r.nodes[static_cast<std::size_t>(m)], 1.0, 1e-14);
  }
}

TEST(Chandler, RejectsNonAlternatingInput) {
  const std::vector<double> v{0.0, 1.0, 2.0};
  try {
    (void)chandler_polynomial(v);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kNotAlternating);
  }
}

TEST(ExactHomeomorphism, CoshTargetMatchesSquareRoot) {
  const Interval dom{-10.0, 10.0};
  const auto cs = find_critical_sets(f1, dom);
  const auto cr = chandler_polynomial(cs.value_sequence());
  const auto h = exact_homeomorphism(f1, cs, cr);
  for (int k = 0; k <= 400; ++k) {
    const double x = dom.lo + dom.width() * k / 400.0;
    const double ref = (x < 0 ? -1.0 : 1.0) * std::sqrt(std::max(0.0, f1(x) - 2.0));
    EXPECT_NEAR(h(x), ref, 1e-8 * (1.0 + std::abs(ref))) << "x = " << x;
  }
  EXPECT_LE(composition_error(f1, h), 1e-8 * (1.0 + f1(10.0)));
}

TEST(ExactHomeomorphism, KinkedTargetComposesExactly) {
  const Interval dom{-3.0, 3.0};
  const auto cs = find_critical_sets(f2, dom);
  const auto cr = chandler_polynomial(cs.value_sequence());
  const auto h = exact_homeomorphism(f2, cs, cr);
  EXPECT_EQ(cr.p.degree(), 3);
  EXPECT_LE(composition_error(f2, h), 1e-8);
  EXPECT_LE(h.junction_gap(), 1e-8);
}

TEST(ExactHomeomorphism, ContinuousAndStrictlyIncreasing) {
  const std::vector<std::pair<ScalarFunction, Interval>> targets{
      {f1, {-10.0, 10.0}}, {f2, {-3.0, 3.0}}, {f3, {-4.0, 4.0}}};
  for (const auto& [f, dom] : targets) {
    const auto cs = find_critical_sets(f, dom);
    const auto h = exact_homeomorphism(f, cs, chandler_polynomial(cs.value_sequence()));
    constexpr int n = 1000;
    double prev = h(dom.lo), max_jump = 0.0;
    for (int k = 1; k <= n; ++k) {
      const double v = h(dom.lo + dom.width() * k / n);
      EXPECT_GT(v, prev);
      max_jump = std::max(max_jump, v - prev);
      prev = v;
    }
    // A continuous map on a fine grid has no step comparable to its range.
    EXPECT_LT(max_jump, 0.1 * (h(dom.hi) - h(dom.lo)));
  }
}

TEST(ExactHomeomorphism, RandomPiecewiseMonotoneTargets) {
  std::mt19937_64 gen(20240501);
  const Interval dom{-2.0, 2.0};
  for (int i = 0; i < 50; ++i) {
    const auto g = oracles::random_piecewise_monotone(gen, i % 5, dom.lo, dom.hi);
    const ScalarFunction f = g;
    const auto cs = find_critical_sets(f, dom);
    ASSERT_EQ(cs.count(), static_cast<std::size_t>(i % 5)) << "target " << i;
    const auto h = exact_homeomorphism(f, cs, chandler_polynomial(cs.value_sequence()));
    // Values at the extremizers must invert even though p hits them only up to its residual.
    EXPECT_LE(composition_error(f, h), 1e-8 * (1.0 + 4.0)) << "target " << i;
  }
}

TEST(ExactHomeomorphism, PlateauTargetWithEps) {
  for (Interval dom : {Interval{-4.0, 4.0}, Interval{-4.0, 1.0}}) {
    const auto cs = find_critical_sets(f3, dom);
    const auto cr = chandler_polynomial(cs.value_sequence());
    ExactOptions opt;
    opt.strictify_eps = 1e-6;
    const auto h = exact_homeomorphism(f3, cs, cr, opt);
    EXPECT_LE(composition_error(f3, h), 1e-5);
    double prev = h(dom.lo);
    for (int k = 1; k <= 1000; ++k) {
      const double v = h(dom.lo + dom.width() * k / 1000.0);
      EXPECT_GT(v, prev);
      prev = v;
    }
  }
}

TEST(ExactHomeomorphism, RangeMismatchIsReported) {
  const Interval dom{-3.0, 3.0};
  const auto cs = find_critical_sets(f2, dom);
  auto values = cs.value_sequence();
  values[1] -= 0.5;  // wrong critical value
  const auto cr = chandler_polynomial(values);
  try {
    (void)exact_homeomorphism(f2, cs, cr);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kRangeMismatch);
  }
}

TEST(Strictify, RampsConstantRuns) {
  const std::vector<Sample> s{{0, 1}, {1, 1}, {2, 1}, {3, 2}, {4, 3}, {5, 3}};
  const auto out = strictify(s, 0.1);
  ASSERT_EQ(out.size(), s.size());
  for (std::size_t i = 0; i + 1 < out.size(); ++i) EXPECT_LT(out[i].y, out[i + 1].y);
  for (std::size_t i = 0; i < out.size(); ++i) {
    EXPECT_EQ(out[i].x, s[i].x);
    EXPECT_LE(std::abs(out[i].y - s[i].y), 0.1);
  }
  EXPECT_EQ(out[0].y, 1.0);
  EXPECT_EQ(out[3].y, 2.0);
}

TEST(Strictify, HeightCappedByGapAndDecreasingDirection) {
  const std::vector<Sample> s{{0, 5}, {1, 5}, {2, 5}, {3, 4.99}};
  const auto out = strictify(s, 1.0);
  for (std::size_t i = 0; i + 1 < out.size(); ++i) EXPECT_GT(out[i].y, out[i + 1].y);
  EXPECT_GE(out[2].y, 5.0 - 0.005);
  const std::vector<Sample> strict{{0, 0}, {1, 1}, {2, 4}};
  const auto same = strictify(strict, 0.5);
  for (std::size_t i = 0; i < strict.size(); ++i) EXPECT_EQ(same[i].y, strict[i].y);
}

TEST(SingleExtremum, ClosedFormForCosh) {
  const auto m = single_extremum_h(f1, 0.0, {-10.0, 10.0});
  EXPECT_DOUBLE_EQ(m.a0, 2.0);
  for (double x : {-9.0, -1.0, -1e-3, 0.0, 0.5, 7.0}) {
    const double h = m.h(x);
    EXPECT_NEAR(m.a0 + m.a2 * h * h, f1(x), 1e-9 * f1(x));
    if (x != 0.0) {
      EXPECT_EQ(std::signbit(h), std::signbit(x));
    }
  }
}

TEST(SingleExtremum, RejectsTwoSidedRemainder) {
  try {
    (void)single_extremum_h(f2, 0.0, {-3.0, 3.0});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kNotSingleExtremum);
  }
}
