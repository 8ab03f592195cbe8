#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <span>
#include <vector>

#include "wsdl/core/csv.hpp"
#include "wsdl/core/error.hpp"
#include "wsdl/core/objective.hpp"
#include "wsdl/core/param_vector.hpp"
#include "wsdl/core/rng.hpp"
#include "wsdl/core/vector_ops.hpp"
#include "wsdl/models/model.hpp"

namespace {

using namespace wsdl;

// L(x) = ½‖x‖²
struct HalfSquaredNorm {
  std::size_t d;
  std::size_t dimension() const { return d; }
  double value(std::span<const double> x) const { return 0.5 * dot(x, x); }
  double value_and_gradient(std::span<const double> x, std::span<double> g) const {
    std::copy(x.begin(), x.end(), g.begin());
    return value(x);
  }
};

// Least squares on (x_i, y_i): L(w, b) = ½ mean((w·x_i + b − y_i)²)
struct LineFit {
  std::vector<double> xs, ys;
  std::size_t dimension() const { return 2; }
  double value(std::span<const double> p) const {
    std::vector<double> g(2);
    return value_and_gradient(p, g);
  }
  double value_and_gradient(std::span<const double> p, std::span<double> g) const {
    double l = 0.0;
    g[0] = g[1] = 0.0;
    const double n = static_cast<double>(xs.size());
    for (std::size_t i = 0; i < xs.size(); ++i) {
      const double r = p[0] * xs[i] + p[1] - ys[i];
      l += 0.5 * r * r / n;
      g[0] += r * xs[i] / n;
      g[1] += r / n;
    }
    return l;
  }
};

static_assert(Objective<HalfSquaredNorm>);
static_assert(Objective<LineFit>);
static_assert(Objective<BatchObjective>);

TEST(Rng, SameSeedGivesSameStream) {
  Rng a(42), b(42);
  for (int i = 0; i < 1000; ++i) ASSERT_EQ(a.next_u64(), b.next_u64()) << "draw " << i;
}

TEST(Rng, RestoredStateContinuesTheStream) {
  Rng a = seeded_stream(42);
  for (int i = 0; i < 500; ++i) a.next_u64();
  const RngState saved = a.state();
  std::vector<std::uint64_t> expected;
  for (int i = 0; i < 500; ++i) expected.push_back(a.next_u64());
  Rng b = Rng::restore(saved);
  for (int i = 0; i < 500; ++i) ASSERT_EQ(b.next_u64(), expected[static_cast<std::size_t>(i)]);
}

TEST(Rng, DifferentSeedsDiffer) {
  EXPECT_NE(Rng(1).next_u64(), Rng(2).next_u64());
  EXPECT_NE(Rng(1, "init").next_u64(), Rng(1, "data").next_u64());
}

TEST(Rng, DrawsHaveTheRightRangesAndMoments) {
  Rng r(7);
  double sum = 0.0, sq = 0.0;
  const int n = 200000;
  for (int i = 0; i < n; ++i) {
    const double u = r.uniform();
    ASSERT_GE(u, 0.0);
    ASSERT_LT(u, 1.0);
    ASSERT_LT(r.below(7), 7u);
    const double z = r.normal();
    sum += z;
    sq += z * z;
  }
  EXPECT_NEAR(sum / n, 0.0, 0.01);
  EXPECT_NEAR(sq / n, 1.0, 0.01);
}

TEST(CosineSimilarity, Examples) {
  const std::vector<double> a{1, 2, 3};
  EXPECT_DOUBLE_EQ(cosine_similarity(a, a), 1.0);
  EXPECT_DOUBLE_EQ(cosine_similarity(std::vector<double>{1, 0}, std::vector<double>{0, 1}), 0.0);
  EXPECT_DOUBLE_EQ(cosine_similarity(std::vector<double>{1, 0}, std::vector<double>{-1, 0}), -1.0);
}

TEST(CosineSimilarity, ZeroNormIsAnError) {
  EXPECT_THROW(cosine_similarity(std::vector<double>{0, 0}, std::vector<double>{1, 0}), NumericError);
  EXPECT_THROW(cosine_similarity(ParamVector(3), ParamVector::from_double(std::vector<double>{1, 2, 3})), NumericError);
}

TEST(CosineSimilarity, StaysInRange) {
  Rng r(3);
  for (int t = 0; t < 100; ++t) {
    std::vector<double> a(17), b(17);
    for (auto& e : a) e = r.normal();
    for (std::size_t i = 0; i < b.size(); ++i) b[i] = t % 2 ? a[i] * 3.0 : r.normal();
    const double c = cosine_similarity(a, b);
    EXPECT_GE(c, -1.0);
    EXPECT_LE(c, 1.0);
  }
}

TEST(VectorOps, LengthMismatchIsAShapeError) {
  EXPECT_THROW(dot(std::vector<double>{1, 2}, std::vector<double>{1}), ShapeError);
  EXPECT_THROW(cosine_similarity(std::vector<double>{1, 2}, std::vector<double>{1}), ShapeError);
}

TEST(VectorOps, ReductionsAreStableUnderReordering) {
  Rng r(11);
  const std::size_t n = 100000;
  std::vector<float> a(n), b(n);
  for (std::size_t i = 0; i < n; ++i) {
    a[i] = static_cast<float>(r.normal() * 1e3);
    b[i] = static_cast<float>(r.normal());
  }
  const double d1 = dot(std::span<const float>(a), std::span<const float>(b));
  const double n1 = norm(std::span<const float>(a));
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  std::shuffle(perm.begin(), perm.end(), std::mt19937_64(5));
  std::vector<float> pa(n), pb(n);
  for (std::size_t i = 0; i < n; ++i) {
    pa[i] = a[perm[i]];
    pb[i] = b[perm[i]];
  }
  const double d2 = dot(std::span<const float>(pa), std::span<const float>(pb));
  const double n2 = norm(std::span<const float>(pa));
  EXPECT_LT(std::abs(d1 - d2), 1e-6 * std::abs(d1));
  EXPECT_LT(std::abs(n1 - n2), 1e-6 * n1);
}

TEST(Objective, QuadraticValueAndGradient) {
  const HalfSquaredNorm f{2};
  const std::vector<double> x{3, 4};
  std::vector<double> g(2);
  EXPECT_DOUBLE_EQ(f.value_and_gradient(x, g), 12.5);
  EXPECT_EQ(g, (std::vector<double>{3, 4}));
}

TEST(Objective, LineFitGradientVanishesAtTheNormalEquationSolution) {
  // Through (1, 3) and (3, 7): slope 2, intercept 1 solves the normal equations exactly.
  const LineFit f{{1, 3}, {3, 7}};
  const std::vector<double> p{2, 1};
  std::vector<double> g(2);
  EXPECT_DOUBLE_EQ(f.value_and_gradient(p, g), 0.0);
  EXPECT_DOUBLE_EQ(g[0], 0.0);
  EXPECT_DOUBLE_EQ(g[1], 0.0);
  const std::vector<double> off{2.5, 1};
  f.value_and_gradient(off, g);
  EXPECT_GT(std::abs(g[0]), 0.0);
}

TEST(ParamVector, RoundTripAndFiniteness) {
  const std::vector<double> v{1.5, -2.25, 0.0};
  const ParamVector p = ParamVector::from_double(v);
  EXPECT_EQ(p.size(), 3u);
  EXPECT_EQ(p.to_double(), v);
  EXPECT_TRUE(p.all_finite());
  ParamVector q = p;
  q[1] = std::nanf("");
  EXPECT_FALSE(q.all_finite());
  q[1] = INFINITY;
  EXPECT_FALSE(q.all_finite());
  EXPECT_DOUBLE_EQ(norm(ParamVector::from_double(std::vector<double>{3, 4})), 5.0);
}

TEST(Csv, RealsRoundTrip) {
  Rng r(9);
  for (int i = 0; i < 1000; ++i) {
    const double x = r.normal() * std::pow(10.0, r.uniform(-20, 20));
    EXPECT_EQ(std::stod(format_real(x)), x);
  }
  EXPECT_EQ(format_optional(std::nullopt), "");
}

}  // namespace
