#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <vector>

#include "wsdl/core/error.hpp"
#include "wsdl/core/rng.hpp"
#include "wsdl/optim/adamw.hpp"
#include "wsdl/optim/schedule.hpp"

namespace {

using namespace wsdl;

const ScheduleSpec kWsd{ScheduleKind::wsd, 100, 800, 1000, 1.0};
const ScheduleSpec kCos{ScheduleKind::warmup_cosine, 100, 100, 1000, 1.0};

// Closed forms written out separately from the library.
double oracle_wsd(double t, double peak, double tw, double tc, double te) {
  if (t <= tw) return peak * t / tw;
  if (t <= tc) return peak;
  return peak * (te - t) / (te - tc);
}

double oracle_cosine(double t, double peak, double tw, double te) {
  if (t <= tw) return peak * t / tw;
  const double progress = (t - tw) / (te - tw);
  return peak * (std::cos(std::numbers::pi * progress) + 1.0) / 2.0;
}

TEST(Schedule, WsdExamples) {
  EXPECT_DOUBLE_EQ(lr_wsd(50, kWsd), 0.5);
  EXPECT_DOUBLE_EQ(lr_wsd(400, kWsd), 1.0);
  EXPECT_DOUBLE_EQ(lr_wsd(900, kWsd), 0.5);
  EXPECT_EQ(lr_wsd(1000, kWsd), 0.0);
}

TEST(Schedule, CosineExamples) {
  EXPECT_DOUBLE_EQ(lr_cosine(100, kCos), 1.0);
  EXPECT_NEAR(lr_cosine(550, kCos), 0.5, 1e-15);
  EXPECT_NEAR(lr_cosine(1000, kCos), 0.0, 1e-16);
}

TEST(Schedule, MatchesClosedFormsOnADenseGrid) {
  const ScheduleSpec w{ScheduleKind::wsd, 250, 6500, 10000, 3e-3};
  const ScheduleSpec c{ScheduleKind::warmup_cosine, 250, 250, 10000, 3e-3};
  for (int i = 0; i <= 10000; ++i) {
    const double t = static_cast<double>(i);
    ASSERT_LE(std::abs(lr_wsd(t, w) - oracle_wsd(t, 3e-3, 250, 6500, 10000)), 1e-12) << t;
    ASSERT_LE(std::abs(lr_cosine(t, c) - oracle_cosine(t, 3e-3, 250, 10000)), 1e-12) << t;
  }
}

TEST(Schedule, ContinuousAtPhaseBoundaries) {
  const double after_tw = std::nextafter(100.0, 200.0);
  EXPECT_EQ(lr_wsd(100, kWsd), 1.0);
  EXPECT_LE(std::abs(lr_wsd(after_tw, kWsd) - lr_wsd(100, kWsd)), 1e-15);
  EXPECT_LE(std::abs(lr_wsd(std::nextafter(800.0, 900.0), kWsd) - lr_wsd(800, kWsd)), 1e-12);
  EXPECT_LE(std::abs(lr_cosine(after_tw, kCos) - lr_cosine(100, kCos)), 1e-15);
}

TEST(Schedule, PlateauAndAffineDecay) {
  for (int t = 101; t <= 800; ++t) ASSERT_EQ(lr_wsd(t, kWsd), 1.0);
  for (int t = 801; t < 1000; ++t)
    ASSERT_NEAR(lr_wsd(t + 1, kWsd) - lr_wsd(t, kWsd), -1.0 / 200.0, 1e-12);
}

TEST(Schedule, NonIncreasingAfterWarmup) {
  for (const auto& s : {kWsd, kCos})
    for (int t = 100; t < 1000; ++t) ASSERT_LE(learning_rate(t + 1, s), learning_rate(t, s));
}

TEST(Schedule, ExhaustedAndInvalid) {
  EXPECT_THROW(lr_wsd(1001, kWsd), ConfigError);
  EXPECT_THROW(lr_cosine(1000.5, kCos), ConfigError);
  EXPECT_THROW(lr_wsd(-1, kWsd), ConfigError);
  EXPECT_THROW((ScheduleSpec{ScheduleKind::wsd, 0, 800, 1000, 1.0}.validate()), ConfigError);
  EXPECT_THROW((ScheduleSpec{ScheduleKind::wsd, 100, 1000, 1000, 1.0}.validate()), ConfigError);
  EXPECT_THROW((ScheduleSpec{ScheduleKind::wsd, 900, 800, 1000, 1.0}.validate()), ConfigError);
  EXPECT_THROW((ScheduleSpec{ScheduleKind::warmup_cosine, 1000, 0, 1000, 1.0}.validate()), ConfigError);
  EXPECT_NO_THROW(kWsd.validate());
}

TEST(Schedule, KindNames) {
  EXPECT_EQ(parse_schedule_kind("wsd"), ScheduleKind::wsd);
  EXPECT_EQ(parse_schedule_kind(to_string(ScheduleKind::warmup_cosine)), ScheduleKind::warmup_cosine);
  EXPECT_THROW(parse_schedule_kind("linear"), ConfigError);
}

ParamVector scalar(double x) { return ParamVector::from_double(std::vector<double>{x}); }

TEST(AdamW, FirstStepIsBiasCorrected) {
  ParamVector x = scalar(0.0);
  auto s = AdamWState::fresh(1, {});
  adamw_step(x, s, scalar(1.0), 0.1);
  EXPECT_FLOAT_EQ(x[0], static_cast<float>(-0.1 / (1.0 + 1e-8)));
  EXPECT_EQ(s.t, 1u);
}

TEST(AdamW, ZeroLearningRateStillUpdatesMoments) {
  ParamVector x = scalar(0.25);
  auto s = AdamWState::fresh(1, {});
  adamw_step(x, s, scalar(2.0), 0.0);
  EXPECT_EQ(x[0], 0.25f);
  EXPECT_FLOAT_EQ(s.m[0], 0.2f);
  EXPECT_FLOAT_EQ(s.v[0], static_cast<float>(0.001 * 4.0));
}

TEST(AdamW, DecoupledDecayWithZeroGradient) {
  ParamVector x = scalar(1.0);
  AdamWHyper h;
  h.weight_decay = 0.01;
  auto s = AdamWState::fresh(1, h);
  adamw_step(x, s, scalar(0.0), 0.1);
  EXPECT_FLOAT_EQ(x[0], 0.999f);
}

TEST(AdamW, MatchesAnIndependentRecurrence) {
  AdamWHyper h;
  h.weight_decay = 0.05;
  Rng r(2);
  std::vector<double> g(50);
  for (auto& e : g) e = r.normal();
  ParamVector x = scalar(0.3);
  auto s = AdamWState::fresh(1, h);
  double xo = 0.3, m = 0.0, v = 0.0;
  for (std::size_t t = 1; t <= g.size(); ++t) {
    adamw_step(x, s, scalar(g[t - 1]), 0.01);
    // Moments are stored rounded to float but used unrounded within the step.
    const double md = 0.9 * m + 0.1 * g[t - 1];
    const double vd = 0.999 * v + 0.001 * g[t - 1] * g[t - 1];
    m = static_cast<float>(md);
    v = static_cast<float>(vd);
    const double mhat = md / (1.0 - std::pow(0.9, t)), vhat = vd / (1.0 - std::pow(0.999, t));
    xo = static_cast<float>(xo - 0.01 * mhat / (std::sqrt(vhat) + 1e-8) - 0.01 * 0.05 * xo);
    ASSERT_EQ(x[0], static_cast<float>(xo)) << "step " << t;
    ASSERT_GE(s.v[0], 0.0f);
    ASSERT_EQ(s.t, t);
  }
}

TEST(AdamW, ConstantGradientMovesAgainstItsSign) {
  for (double g : {0.7, -0.7}) {
    ParamVector x = scalar(0.0);
    auto s = AdamWState::fresh(1, {});
    float prev = x[0];
    for (int i = 0; i < 100; ++i) {
      adamw_step(x, s, scalar(g), 1e-2);
      if (g > 0) ASSERT_LT(x[0], prev);
      else ASSERT_GT(x[0], prev);
      prev = x[0];
    }
  }
}

TEST(AdamW, NonFiniteGradientNamesTheStep) {
  ParamVector x = scalar(0.0);
  auto s = AdamWState::fresh(1, {});
  adamw_step(x, s, scalar(1.0), 0.1);
  adamw_step(x, s, scalar(1.0), 0.1);
  try {
    adamw_step(x, s, scalar(NAN), 0.1);
    FAIL();
  } catch (const NumericError& e) {
    EXPECT_EQ(e.step(), 2u);
  }
  EXPECT_THROW(adamw_step(x, s, ParamVector(2), 0.1), ShapeError);
}

}  // namespace
