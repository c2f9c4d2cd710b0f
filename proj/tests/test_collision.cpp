#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "oracles.hpp"
#include "skm/collision.hpp"

using namespace skm;

namespace {

SupportVectorModel<2> two_sv() {
  SupportVectorModel<2> m;
  m.add(Label::Occupied, Point2(0, 0), 1.0);
  m.add(Label::Free, Point2(2, 0), 1.0);
  return m;
}

const BoundMode kSingle = BoundMode::exact(BoundKind::SingleJ);
const BoundMode kMinimax = BoundMode::exact(BoundKind::MinIMaxJ);

// First t on a grid of step dt where U_j >= 0 for the j the mode would use.
double first_violation(const oracle::Flat<2>& f, const Point2& s0, const Vector2& v, double t_max, double dt) {
  for (double t = 0.0; t <= t_max; t += dt)
    if (oracle::upper_nonneg_all_j(f, Point2(s0 + t * v))) return t;
  return kInf;
}

}  // namespace

TEST(UpperBound, EqualsScoreForSingleVectors) {
  const auto m = two_sv();
  for (double x = -2; x <= 4; x += 0.37) {
    const Point2 p(x, 0.3 * x);
    EXPECT_NEAR(upper_bound(p, m), m.exact_score(p), 1e-15);
  }
}

TEST(UpperBound, HandValue) {
  // e^{-0.625} - e^{-5.625} = 0.535261 - 0.003607
  EXPECT_NEAR(upper_bound(Point2(0.5, 0), two_sv()), 0.531655, 1e-6);
  EXPECT_NEAR(upper_bound(Point2(0.5, 0), two_sv()), std::exp(-0.625) - std::exp(-5.625), 1e-15);
}

TEST(UpperBound, DominatesScoreOnRandomModels) {
  std::mt19937_64 rng(41);
  std::uniform_int_distribution<int> n(5, 120);
  std::uniform_real_distribution<double> g(0.5, 5.0);
  for (int trial = 0; trial < 40; ++trial) {
    const auto m = oracle::random_model<2>(rng, static_cast<std::size_t>(n(rng)), g(rng), -3, 3);
    const auto flat = oracle::flatten(m);
    for (int i = 0; i < 200; ++i) {
      const auto x = oracle::uniform_point<2>(rng, -4, 4);
      const double f = oracle::score(flat, x);
      for (const auto& neg : flat.neg) ASSERT_GE(oracle::upper(flat, x, neg) + 1e-12, f);
      EXPECT_GE(upper_bound(x, m) + 1e-12, f);
    }
  }
}

TEST(RayFreeTime, TwoSvAnalytic) {
  const auto m = two_sv();
  const auto r = ray_free_time(Point2(3, 0), Vector2(-1, 0), m, kSingle);
  ASSERT_TRUE(r.ok());
  EXPECT_NEAR(r.value, 2.0, 1e-12);
  const auto flat = oracle::flatten(m);
  EXPECT_NEAR(first_violation(flat, Point2(3, 0), Vector2(-1, 0), 4.0, 1e-4), 2.0, 1e-3);
  // Perpendicular ray never approaches the positive side.
  const auto perp = ray_free_time(Point2(3, 0), Vector2(0, 1), m, kSingle);
  EXPECT_TRUE(std::isinf(perp.value));
}

TEST(RayFreeTime, StartInCollision) {
  const auto r = ray_free_time(Point2(0.2, 0), Vector2(1, 0), two_sv(), kMinimax);
  EXPECT_EQ(r.status, BoundStatus::StartInCollision);
  EXPECT_EQ(r.value, 0.0);
}

TEST(RayFreeTime, DegenerateModels) {
  SupportVectorModel<2> only_neg;
  only_neg.add(Label::Free, Point2(0, 0), 1.0);
  EXPECT_TRUE(std::isinf(ray_free_time(Point2(1, 0), Vector2(1, 0), only_neg, kMinimax).value));
  SupportVectorModel<2> only_pos;
  only_pos.add(Label::Occupied, Point2(0, 0), 1.0);
  EXPECT_EQ(ray_free_time(Point2(5, 0), Vector2(1, 0), only_pos, kMinimax).status, BoundStatus::NoNegatives);
  EXPECT_THROW(ray_free_time(Point2(5, 0), Vector2(0, 0), two_sv(), kMinimax), InvalidArgumentError);
}

TEST(RayFreeTime, SoundOnRandomModels) {
  std::mt19937_64 rng(43);
  std::uniform_real_distribution<double> g(0.5, 5.0);
  std::uniform_int_distribution<int> n(2, 60);
  int finite = 0;
  for (int trial = 0; trial < 500; ++trial) {
    const auto m = oracle::random_model<2>(rng, static_cast<std::size_t>(n(rng)), g(rng), -2, 2);
    const auto flat = oracle::flatten(m);
    const Point2 s0 = oracle::uniform_point<2>(rng, -3, 3);
    const Vector2 v = oracle::uniform_point<2>(rng, -1, 1);
    for (const auto& mode : {kSingle, kMinimax}) {
      const auto r = ray_free_time(s0, v, m, mode);
      if (!r.ok()) continue;
      const double t_end = std::isinf(r.value) ? 6.0 : r.value;
      if (std::isfinite(r.value)) ++finite;
      // Every sample strictly before t_u must be certified by some j.
      for (double t = 0.0; t < t_end; t += 1e-3)
        ASSERT_FALSE(oracle::upper_nonneg_all_j(flat, Point2(s0 + t * v))) << "trial " << trial << " t " << t;
    }
  }
  EXPECT_GT(finite, 100);
}

TEST(RayFreeTime, SingleJIsSoundForItsOwnJ) {
  std::mt19937_64 rng(47);
  for (int trial = 0; trial < 300; ++trial) {
    const auto m = oracle::random_model<2>(rng, 30, 2.5, -2, 2);
    const auto flat = oracle::flatten(m);
    const Point2 s0 = oracle::uniform_point<2>(rng, -3, 3);
    const Vector2 v = oracle::uniform_point<2>(rng, -1, 1);
    const auto r = ray_free_time(s0, v, m, kSingle);
    if (!r.ok()) continue;
    const auto& j = oracle::nearest(flat.neg, s0);
    const double t_end = std::min(r.value, 6.0);
    for (double t = 0.0; t < t_end; t += 1e-3) ASSERT_FALSE(oracle::upper_nonneg(flat, Point2(s0 + t * v), j));
  }
}

TEST(FreeBallRadius, TwoSvAnalytic) {
  const auto m = two_sv();
  const auto r = free_ball_radius(Point2(3, 0), m, kSingle);
  ASSERT_TRUE(r.ok());
  EXPECT_NEAR(r.value, 2.0, 1e-12);
  // Minimizing the ray bound over 360 unit directions recovers the ball radius.
  double best = kInf;
  for (int k = 0; k < 360; ++k) {
    const double a = 2.0 * std::numbers::pi * k / 360.0;
    best = std::min(best, ray_free_time(Point2(3, 0), Vector2(std::cos(a), std::sin(a)), m, kSingle).value);
  }
  EXPECT_NEAR(best, r.value, 1e-6);
  // U < 0 strictly inside the ball.
  const auto flat = oracle::flatten(m);
  for (int k = 0; k < 360; ++k) {
    const double a = 2.0 * std::numbers::pi * k / 360.0;
    for (double rho = 0.0; rho < 2.0 - 1e-9; rho += 0.05)
      ASSERT_FALSE(oracle::upper_nonneg(flat, Point2(Point2(3, 0) + rho * Vector2(std::cos(a), std::sin(a))),
                                        flat.neg[0]));
  }
}

TEST(FreeBallRadius, MinimaxDominatesSingleJ) {
  std::mt19937_64 rng(53);
  for (int trial = 0; trial < 500; ++trial) {
    const auto m = oracle::random_model<2>(rng, 40, 2.5, -2, 2);
    const Point2 s0 = oracle::uniform_point<2>(rng, -3, 3);
    const auto single = free_ball_radius(s0, m, kSingle);
    const auto star = free_ball_radius(s0, m, kMinimax);
    if (!single.ok()) continue;
    ASSERT_TRUE(star.ok());
    EXPECT_LE(single.value, star.value + 1e-12);
  }
}

TEST(FreeBallRadius, SoundOnRandomModels) {
  std::mt19937_64 rng(59);
  for (int trial = 0; trial < 200; ++trial) {
    const auto m = oracle::random_model<2>(rng, 25, 2.5, -2, 2);
    const auto flat = oracle::flatten(m);
    const Point2 s0 = oracle::uniform_point<2>(rng, -3, 3);
    const auto r = free_ball_radius(s0, m, kMinimax);
    if (!r.ok() || std::isinf(r.value)) continue;
    for (int k = 0; k < 64; ++k) {
      const double a = 2.0 * std::numbers::pi * k / 64.0;
      const Point2 p = s0 + r.value * (1.0 - 1e-9) * Vector2(std::cos(a), std::sin(a));
      ASSERT_FALSE(oracle::upper_nonneg_all_j(flat, p));
    }
  }
}

TEST(CheckSegment, TwoSvCases) {
  const auto m = two_sv();
  const auto perp = check_segment(Segment<2>{Point2(3, 0), Point2(3, 4)}, m, kMinimax);
  EXPECT_EQ(perp.verdict, Verdict::Free);
  EXPECT_TRUE(std::isinf(perp.from_a.value));
  EXPECT_TRUE(std::isinf(perp.from_b.value));

  const auto through = check_segment(Segment<2>{Point2(3, 0), Point2(-1, 0)}, m, kSingle);
  EXPECT_EQ(through.verdict, Verdict::Colliding);
  ASSERT_TRUE(through.from_a.ok());
  EXPECT_NEAR(through.from_a.value, 0.5, 1e-12);
  // The far endpoint (-1, 0) starts inside the inflated boundary.
  EXPECT_EQ(through.from_b.status, BoundStatus::StartInCollision);
  const auto flat = oracle::flatten(m);
  EXPECT_TRUE(oracle::upper_nonneg(flat, Point2(1, 0), flat.neg[0]));
}

TEST(CheckSegment, ThroughPositiveVectorIsColliding) {
  SupportVectorModel<2> m;
  m.add(Label::Occupied, Point2(0, 0), 1.0);
  m.add(Label::Free, Point2(2, 0), 1.0);
  m.add(Label::Free, Point2(-2, 0), 1.0);
  m.add(Label::Occupied, Point2(0, 5), 1.0);
  const auto r = check_segment(Segment<2>{Point2(0, 3), Point2(0, -3)}, m, kSingle);
  EXPECT_EQ(r.verdict, Verdict::Colliding);
}

TEST(CheckSegment, DegenerateInputs) {
  EXPECT_THROW(check_segment(Segment<2>{Point2(1, 1), Point2(1, 1)}, two_sv(), kMinimax), InvalidArgumentError);
  EXPECT_EQ(check_segment(Segment<2>{Point2(1, 1), Point2(2, 1)}, SupportVectorModel<2>{}, kMinimax).verdict,
            Verdict::Free);
  SupportVectorModel<2> only_pos;
  only_pos.add(Label::Occupied, Point2(0, 0), 1.0);
  EXPECT_EQ(check_segment(Segment<2>{Point2(10, 1), Point2(20, 1)}, only_pos, kMinimax).verdict,
            Verdict::Colliding);
}

TEST(CheckSegment, FreeImpliesOracleFree) {
  std::mt19937_64 rng(61);
  int free_count = 0;
  for (int trial = 0; trial < 2000; ++trial) {
    const auto m = oracle::random_model<2>(rng, 30, 2.5, -3, 3);
    const auto flat = oracle::flatten(m);
    const Segment<2> seg{oracle::uniform_point<2>(rng, -4, 4), oracle::uniform_point<2>(rng, -4, 4)};
    const auto r = check_segment(seg, m, kMinimax);
    if (r.verdict != Verdict::Free) continue;
    ++free_count;
    const double len = (seg.b - seg.a).norm();
    const int steps = static_cast<int>(std::ceil(len / 0.01));
    for (int i = 0; i <= steps; ++i) {
      const Point2 p = seg.a + (seg.b - seg.a) * (static_cast<double>(i) / steps);
      ASSERT_FALSE(oracle::upper_nonneg_all_j(flat, p)) << "trial " << trial;
      ASSERT_LT(oracle::score(flat, p), 0.0);
    }
  }
  EXPECT_GT(free_count, 50);
}

TEST(CheckSegment, KnnLimitedDefaultRunsOnLargeModel) {
  std::mt19937_64 rng(67);
  const auto m = oracle::random_model<2>(rng, 2000, 2.5, -20, 20);
  int free_count = 0;
  for (int i = 0; i < 200; ++i) {
    const Point2 a = oracle::uniform_point<2>(rng, -20, 20);
    const Point2 b = a + oracle::uniform_point<2>(rng, -1, 1);
    if (check_segment(Segment<2>{a, b}, m, BoundMode::segment_default()).verdict == Verdict::Free) ++free_count;
  }
  EXPECT_GT(free_count, 0);
}

TEST(CurveExit, Line) {
  const PolyCurve<2> c{{Vector2(0, 0), Vector2(1, 0)}, 5.0};
  EXPECT_NEAR(*curve_ball_exit_time(c, 0.0, 0.5), 0.5, 1e-15);
  EXPECT_NEAR(*curve_ball_exit_time(c, 1.0, 0.5), 1.5, 1e-15);
  EXPECT_FALSE(curve_ball_exit_time(c, 0.0, 10.0).has_value());
}

TEST(CurveExit, Parabola) {
  // t^2 + t^4 = 1  =>  t^2 = (sqrt(5) - 1) / 2
  const PolyCurve<2> c{{Vector2(0, 0), Vector2(1, 0), Vector2(0, 1)}, 2.0};
  const double want = std::sqrt((std::sqrt(5.0) - 1.0) / 2.0);
  const auto got = curve_ball_exit_time(c, 0.0, 1.0);
  ASSERT_TRUE(got.has_value());
  EXPECT_NEAR(*got, want, 1e-12);
  EXPECT_NEAR(*got, 0.78615, 1e-5);
  EXPECT_LE(*got, want);
  // Short horizon: no exit.
  const PolyCurve<2> short_c{{Vector2(0, 0), Vector2(1, 0), Vector2(0, 1)}, 0.5};
  EXPECT_FALSE(curve_ball_exit_time(short_c, 0.0, 1.0).has_value());
}

TEST(CurveExit, FromLaterTimeMatchesBruteForce) {
  std::mt19937_64 rng(71);
  for (int trial = 0; trial < 200; ++trial) {
    PolyCurve<2> c;
    for (int k = 0; k <= 3; ++k) c.coeffs.push_back(oracle::uniform_point<2>(rng, -2, 2));
    c.horizon = 2.0;
    const double tk = std::uniform_real_distribution<double>(0, 1.5)(rng);
    const double r = std::uniform_real_distribution<double>(0.05, 1.0)(rng);
    const auto got = curve_ball_exit_time(c, tk, r);
    // Brute force first exit.
    double brute = kInf;
    for (double t = tk; t <= c.horizon; t += 1e-5)
      if ((c(t) - c(tk)).norm() >= r) {
        brute = t;
        break;
      }
    if (!got) {
      EXPECT_TRUE(std::isinf(brute) || brute > c.horizon - 1e-4);
      continue;
    }
    EXPECT_LE(*got, brute + 1e-9);
    EXPECT_NEAR(*got, brute, 2e-5);
    // Never outside the ball before the returned time.
    for (double t = tk; t < *got; t += (*got - tk) / 200.0) ASSERT_LE((c(t) - c(tk)).norm(), r * (1 + 1e-12));
  }
}

TEST(CheckCurve, FarFromModelIsFreeQuickly) {
  auto m = two_sv();
  // min distance to any SV > 5 / sqrt(gamma)
  const PolyCurve<2> c{{Vector2(10, 0), Vector2(0, 1)}, 3.0};
  const auto r = check_curve(c, 0.2, m, BoundMode::curve_default());
  EXPECT_EQ(r.verdict, Verdict::Free);
  const double first = r.balls.front().radius;
  EXPECT_LE(r.balls.size(), static_cast<std::size_t>(std::ceil(3.0 / std::min(first, 3.0))) + 1);
}

TEST(CheckCurve, EndpointOnBoundaryIsColliding) {
  const auto m = two_sv();
  // Ends at (1, 0), where U = 0 by symmetry.
  const PolyCurve<2> c{{Vector2(3, 0), Vector2(-1, 0.5), Vector2(0, -0.25)}, 2.0};
  ASSERT_NEAR(c(2.0).x(), 1.0, 1e-12);
  ASSERT_NEAR(c(2.0).y(), 0.0, 1e-12);
  EXPECT_EQ(check_curve(c, 0.01, m, kMinimax).verdict, Verdict::Colliding);
}

TEST(CheckCurve, LargeEpsilonStopsAfterOneBall) {
  const auto m = two_sv();
  const PolyCurve<2> c{{Vector2(3, 0), Vector2(0, 1)}, 1.0};
  const auto r = check_curve(c, 2.5, m, kSingle);  // r_u(3,0) = 2 < 2.5
  EXPECT_EQ(r.verdict, Verdict::Colliding);
  EXPECT_EQ(r.balls.size(), 1u);
}

TEST(CheckCurve, FreeImpliesOracleFree) {
  std::mt19937_64 rng(73);
  int free_count = 0;
  for (int trial = 0; trial < 300; ++trial) {
    const auto m = oracle::random_model<2>(rng, 30, 2.5, -3, 3);
    const auto flat = oracle::flatten(m);
    PolyCurve<2> c{{oracle::uniform_point<2>(rng, -4, 4), oracle::uniform_point<2>(rng, -2, 2),
                    oracle::uniform_point<2>(rng, -1, 1)},
                   1.0};
    if (check_curve(c, 0.05, m, kMinimax).verdict != Verdict::Free) continue;
    ++free_count;
    for (double t = 0.0; t <= 1.0; t += 1e-3) ASSERT_FALSE(oracle::upper_nonneg_all_j(flat, c(t)));
  }
  EXPECT_GT(free_count, 10);
}

TEST(CheckCurve, InvalidInputs) {
  const auto m = two_sv();
  EXPECT_THROW(check_curve(PolyCurve<2>{{Vector2(0, 0)}, 1.0}, 0.2, m, kMinimax), InvalidArgumentError);
  EXPECT_THROW(check_curve(PolyCurve<2>{{Vector2(0, 0), Vector2(1, 0)}, 0.0}, 0.2, m, kMinimax),
               InvalidArgumentError);
  EXPECT_THROW(check_curve(PolyCurve<2>{{Vector2(5, 0), Vector2(1, 0)}, 1.0}, 0.0, m, kMinimax),
               InvalidArgumentError);
}
