#include <gtest/gtest.h>

#include <fstream>

#include "lcbf/cbf.hpp"
#include "lcbf/errors.hpp"
#include "support/oracles.hpp"
#include "support/suites.hpp"

namespace lcbf {
namespace {

using suites::vec2;

PolytopicCbf unit_square_cbf() {
  Mat A(4, 2);
  A << 1, 0, -1, 0, 0, 1, 0, -1;
  Vec b(4);
  b << 0, 1, 0, 1;
  return PolytopicCbf(A, b);
}

ControlAffineSystem driftless(double lo, double hi) {
  ControlAffineSystem s;
  s.name = "driftless";
  s.state_dim = 2;
  s.input_dim = 1;
  s.drift = [](const Vec&) -> Vec { return Vec::Zero(2); };
  s.actuation = [](const Vec&) -> Mat { return Mat::Zero(2, 1); };
  s.u_min = Vec::Constant(1, lo);
  s.u_max = Vec::Constant(1, hi);
  return s;
}

TEST(Cbf, Evaluation) {
  const PolytopicCbf identity(Mat::Identity(2, 2), Vec::Zero(2));
  EXPECT_EQ(eval_h(identity, vec2(0, 0)), Vec::Zero(2));
  const PolytopicCbf sq = unit_square_cbf();
  EXPECT_EQ(eval_h(sq, vec2(0.5, 0.5)), Vec::Constant(4, 0.5));
  EXPECT_DOUBLE_EQ(min_h(sq, vec2(0.25, 0.5)), 0.25);
  EXPECT_TRUE(in_safe_set(sq, vec2(0.5, 0.5)));
  EXPECT_FALSE(in_safe_set(sq, vec2(2, 2)));
}

TEST(Cbf, RejectsNonUnitRows) {
  Mat A(1, 2);
  A << 1, 1;
  EXPECT_THROW(PolytopicCbf(A, Vec::Zero(1)), ContractViolation);
  const PolytopicCbf c = PolytopicCbf::from_unnormalized(A, Vec::Constant(1, 2.0));
  EXPECT_NEAR(c.A().row(0).norm(), 1.0, 1e-15);
  EXPECT_NEAR(c.b()[0], 2.0 / std::sqrt(2.0), 1e-15);
}

TEST(Cbf, MembershipInvariantUnderRowScaling) {
  oracle::Rng rng(5);
  const PolytopicCbf base = oracle::random_cbf(rng, 5, 2, vec2(0, 0), 1.5);
  for (int r = 0; r < 5; ++r) {
    Mat A = base.A();
    Vec b = base.b();
    const double c = oracle::uniform(rng, 0.1, 10.0);
    A.row(r) *= c;
    b[r] *= c;
    const PolytopicCbf scaled = PolytopicCbf::from_unnormalized(A, b);
    for (int k = 0; k < 500; ++k) {
      const Vec x = oracle::uniform_vec(rng, 2, -2, 2);
      if (std::abs(min_h(base, x)) < 1e-9) continue;
      EXPECT_EQ(in_safe_set(base, x), in_safe_set(scaled, x));
    }
  }
}

TEST(Cbf, PublishedRowReadsAsPrinted) {
  // h1 = -0.75 x1 - 0.66 x2 - 1.68 before renormalization.
  std::ifstream in(std::string(LCBF_SOURCE_DIR) + "/configs/published_cbf.json");
  ASSERT_TRUE(in);
  const PolytopicCbf pub = cbf_from_json(nlohmann::json::parse(in));
  ASSERT_EQ(pub.rows(), 6);
  const double scale = std::hypot(0.75, 0.66);
  EXPECT_NEAR(eval_h(pub, vec2(0, 0))[0] * scale, -1.68, 1e-12);
  for (int i = 0; i < 6; ++i) EXPECT_NEAR(pub.A().row(i).norm(), 1.0, 1e-12);
}

TEST(Cbf, JsonRoundTrip) {
  oracle::Rng rng(9);
  const PolytopicCbf c = oracle::random_cbf(rng, 6, 2, vec2(1, 0), 2.0, 1.7);
  const PolytopicCbf back = cbf_from_json(nlohmann::json::parse(cbf_to_json(c).dump()));
  EXPECT_EQ(back.A(), c.A());
  EXPECT_EQ(back.b(), c.b());
  EXPECT_EQ(back.alpha_gain(), c.alpha_gain());
}

TEST(Stacked, LayoutWithPaperBounds) {
  const PolytopicCbf sq = unit_square_cbf();
  const ControlAffineSystem mg = moore_greitzer();
  const StackedConstraint sc = stacked(sq, mg, vec2(0.5, 0.5));
  ASSERT_EQ(sc.A_bar.rows(), 6);
  EXPECT_EQ(sc.barrier_rows, 4);
  EXPECT_EQ(sc.A_bar(4, 0), 1.0);
  EXPECT_EQ(sc.B_bar[4], 9.0);
  EXPECT_EQ(sc.A_bar(5, 0), -1.0);
  EXPECT_EQ(sc.B_bar[5], 9.0);
}

TEST(Stacked, AgreesWithDirectEvaluation) {
  const auto res = suites::stacking_suite();
  EXPECT_TRUE(res.passed()) << res.first_failure << " (" << res.failures << " failures)";
}

TEST(Admissible, DriftlessReturnsClampedZero) {
  const PolytopicCbf sq = unit_square_cbf();
  const auto u = admissible_input(sq, driftless(0.5, 2.0), vec2(0.5, 0.5));
  ASSERT_TRUE(u);
  EXPECT_EQ((*u)[0], 0.5);
  // Outside the set with g = 0 no input helps.
  EXPECT_FALSE(admissible_input(sq, driftless(-1, 1), vec2(2, 0.5)));
}

TEST(Admissible, SingletonInputSet) {
  ControlAffineSystem s = moore_greitzer();
  const PolytopicCbf sq = unit_square_cbf();
  const Vec x = vec2(0.5, 0.5);
  for (double u0 : {-9.0, -1.0, 0.0, 2.0, 9.0}) {
    s.set_input_bounds(Vec::Constant(1, u0), Vec::Constant(1, u0));
    const auto u = admissible_input(sq, s, x);
    EXPECT_EQ(u.has_value(), oracle::direct_barrier_ok(sq, s, x, Vec::Constant(1, u0), 1e-8));
    if (u) EXPECT_EQ((*u)[0], u0);
  }
}

TEST(Admissible, WitnessSatisfiesStack) {
  oracle::Rng rng(13);
  for (int t = 0; t < 2000; ++t) {
    const int m = 1 + t % 2;
    const ControlAffineSystem sys = oracle::random_affine_system(rng, 2, m, 2.0);
    const PolytopicCbf cbf = oracle::random_cbf(rng, 4, 2, vec2(0, 0), 1.5);
    const Vec x = oracle::uniform_vec(rng, 2, -1.5, 1.5);
    if (const auto u = admissible_input(cbf, sys, x)) {
      const StackedConstraint sc = stacked(cbf, sys, x);
      EXPECT_LE((sc.A_bar * *u - sc.B_bar).maxCoeff(), 1e-8);
    }
  }
}

TEST(Admissible, LinearProgramAgreesWithInterval) {
  const auto res = suites::lp_interval_suite();
  EXPECT_TRUE(res.passed()) << res.first_failure << " (" << res.failures << " failures)";
}

TEST(Admissible, MonotoneInGain) {
  const ControlAffineSystem mg = moore_greitzer();
  oracle::Rng rng(19);
  const PolytopicCbf base = oracle::random_cbf(rng, 6, 2, vec2(1, 0), 1.5);
  const std::vector<double> gains{0.25, 0.5, 1.0, 2.0, 4.0};
  for (int i = 0; i <= 40; ++i) {
    for (int j = 0; j <= 80; ++j) {
      const Vec x = vec2(-1 + 0.1 * i, -4 + 0.1 * j);
      if (min_h(base, x) < 0) continue;
      bool prev = false;
      for (double g : gains) {
        const bool ok = admissible_input(PolytopicCbf(base.A(), base.b(), g), mg, x).has_value();
        EXPECT_TRUE(ok || !prev) << x.transpose() << " gain " << g;
        prev = ok;
      }
    }
  }
}

TEST(MaxMinSlack, IntervalAndLinearProgramAgree) {
  oracle::Rng rng(29);
  for (int t = 0; t < 500; ++t) {
    const int L = 1 + static_cast<int>(rng() % 5);
    const Mat A = Mat::NullaryExpr(L, 1, [&] { return oracle::uniform(rng, -2, 2); });
    const Vec B = oracle::uniform_vec(rng, L, -1, 1);
    const Vec lo = Vec::Constant(1, -1), hi = Vec::Constant(1, 1);
    const SlackInput a = max_min_slack_input(A, B, lo, hi, Vec::Zero(1), SlackMethod::kInterval);
    const SlackInput b = max_min_slack_input(A, B, lo, hi, Vec::Zero(1), SlackMethod::kLinearProgram);
    EXPECT_NEAR(a.slack, b.slack, 1e-9) << "case " << t;
  }
}

}  // namespace
}  // namespace lcbf
