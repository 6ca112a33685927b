#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "ddual/dynamics.hpp"

using namespace ddual;

namespace {

Point pt(std::initializer_list<double> xs) {
  Point p(static_cast<int>(xs.size()));
  int k = 0;
  for (double x : xs) p[k++] = x;
  return p;
}

ControlledSystem decay1d() {
  return autonomous(1, [](const Point& x) { return Point(-x); }, [](const Point&) { return -1.0; });
}

ControlledSystem linear2d(const Eigen::Matrix2d& A) {
  return autonomous(2, [A](const Point& x) { return Point(A * Eigen::Vector2d(x)); },
                    [A](const Point&) { return A.trace(); });
}

}  // namespace

TEST(Integrate, ZeroDriftIsConstant) {
  auto sys = autonomous(2, [](const Point& x) { return Point(Point::Zero(x.size())); });
  auto tr = integrate(sys, {}, pt({0.3, -1.0}), 1.0, 0.1);
  for (const auto& s : tr.states) EXPECT_EQ((s - pt({0.3, -1.0})).norm(), 0.0);
}

TEST(Integrate, SampleCountAndFinalTime) {
  auto sys = decay1d();
  auto tr = integrate(sys, {}, pt({1.0}), 1.0, 0.03);
  EXPECT_EQ(tr.size(), static_cast<std::size_t>(std::ceil(1.0 / 0.03)) + 1);
  EXPECT_EQ(tr.times.back(), 1.0);
  for (std::size_t i = 1; i < tr.size(); ++i) EXPECT_GT(tr.times[i], tr.times[i - 1]);
}

TEST(Integrate, ExponentialDecay) {
  auto tr = integrate(decay1d(), {}, pt({1.0}), 1.0, 1e-3);
  EXPECT_NEAR(tr.final_state()[0], std::exp(-1.0), 1e-6);
}

TEST(Integrate, FourthOrderConvergence) {
  auto err = [](double dt) { return std::abs(integrate(decay1d(), {}, pt({1.0}), 1.0, dt).final_state()[0] - std::exp(-1.0)); };
  const double r = err(0.1) / err(0.05);
  EXPECT_GT(r, 14.0);
  EXPECT_LT(r, 18.0);
}

TEST(Integrate, StopsOnGoalEntry) {
  auto sys = single_integrator(2, InputSet::ball(2, 0.5));
  sys.goal = Region::ball(pt({0.0, 0.0}), 0.1);
  Policy u = [](const Point& x) { return Point(-0.5 * x / x.norm()); };
  auto tr = integrate(sys, u, pt({1.0, 0.0}), 5.0, 1e-2);
  EXPECT_TRUE(tr.reached_goal);
  EXPECT_NEAR(tr.times.back(), 1.8, 1e-8);
  EXPECT_NEAR(tr.final_state().norm(), 0.1, 1e-8);
}

TEST(Integrate, NonFiniteStateThrows) {
  auto sys = autonomous(1, [](const Point& x) { return Point(x.array().square()); });
  EXPECT_THROW(integrate(sys, {}, pt({1.0}), 5.0, 0.01), NonFiniteState);
}

TEST(Integrate, RejectsBadStep) {
  EXPECT_THROW(integrate(decay1d(), {}, pt({1.0}), 1.0, 0.0), ConfigError);
  EXPECT_THROW(integrate(decay1d(), {}, pt({1.0}), -1.0, 0.1), ConfigError);
}

TEST(ReverseFlow, ZeroTimeIsIdentity) {
  EXPECT_EQ(reverse_flow(decay1d(), {}, pt({0.4}), 0.0, 0.01)[0], 0.4);
}

TEST(ReverseFlow, InvertsDecay) {
  EXPECT_NEAR(reverse_flow(decay1d(), {}, pt({std::exp(-1.0)}), 1.0, 1e-3)[0], 1.0, 1e-6);
}

TEST(ReverseFlow, ComposesWithForwardFlow) {
  Eigen::Matrix2d A;
  A << -0.3, 1.0, -1.0, -0.2;
  auto sys = linear2d(A);
  const Point x0 = pt({0.7, -0.4});
  const double dt = 1e-3;
  auto fwd = integrate(sys, {}, x0, 0.7, dt);
  EXPECT_NEAR((reverse_flow(sys, {}, fwd.final_state(), 0.7, dt) - x0).norm(), 0.0, 1e-6);
  auto far = integrate(sys, {}, x0, 3.0, 0.05);
  EXPECT_LT((reverse_flow(sys, {}, far.final_state(), 3.0, 0.05) - x0).norm(), 10 * 0.05);
}

TEST(Liouville, DecayConcentratesDensity) {
  ClosedLoop f(decay1d());
  auto tr = extended_liouville_integrate(f, {}, pt({1.0}), 1.0, 1.0, 1e-3);
  EXPECT_NEAR(tr.density.back(), std::exp(1.0), 1e-5);
}

TEST(Liouville, DivergenceFreeKeepsDensity) {
  Eigen::Matrix2d A;
  A << 0.0, 1.0, -1.0, 0.0;
  auto sys = linear2d(A);
  auto tr = extended_liouville_integrate(ClosedLoop(sys), {}, pt({1.0, 0.0}), 0.8, 2.0, 1e-2);
  for (double r : tr.density) EXPECT_NEAR(r, 0.8, 1e-12);
}

TEST(Liouville, SourceCancellingDivergence) {
  // φ = −ρ against ∇·f = −1 leaves ρ̇ = 0.
  DensitySource src = [](const Point&, double r) { return -r; };
  auto tr = extended_liouville_integrate(ClosedLoop(decay1d()), src, pt({1.0}), 1.3, 1.0, 1e-2);
  EXPECT_NEAR(tr.density.back(), 1.3, 1e-12);
}

TEST(Liouville, LinearSystemMatchesTraceFormula) {
  Eigen::Matrix2d A;
  A << -0.5, 0.3, 0.1, 0.2;
  auto tr = extended_liouville_integrate(ClosedLoop(linear2d(A)), {}, pt({0.2, 0.5}), 2.0, 1.5, 1e-3);
  const double expected = 2.0 * std::exp(-A.trace() * 1.5);
  EXPECT_NEAR(tr.density.back() / expected, 1.0, 1e-5);
}

TEST(Liouville, RejectsNegativeInitialDensity) {
  EXPECT_THROW(extended_liouville_integrate(ClosedLoop(decay1d()), {}, pt({1.0}), -1.0, 1.0, 0.1), ConfigError);
}

TEST(ClosedLoop, FiniteDifferenceDivergenceWithFeedback) {
  auto sys = single_integrator(2, InputSet::ball(2, 10.0));
  sys.domain_width = 4.0;
  Policy u = [](const Point& x) { return Point(pt({-x[0] * x[0], 3 * x[1]})); };
  ClosedLoop f(sys, u);
  const Point x = pt({0.4, -0.2});
  EXPECT_NEAR(f.divergence(x), -2 * 0.4 + 3.0, 1e-6);
  EXPECT_EQ(ClosedLoop(sys).divergence(x), 0.0);
}

TEST(InputSet, BallDiscretizationStaysInside) {
  auto U = InputSet::ball(2, 0.5);
  auto pts = U.discretize(5);
  ASSERT_FALSE(pts.empty());
  bool has_zero = false;
  for (const auto& u : pts) {
    EXPECT_LE(u.norm(), 0.5 * (1 + 1e-12));
    has_zero |= u.norm() == 0.0;
  }
  EXPECT_TRUE(has_zero);
  EXPECT_EQ(InputSet::none(2).discretize(5).size(), 1u);
}

TEST(InputSet, Projection) {
  EXPECT_NEAR(InputSet::ball(2, 0.5).project(pt({3.0, 4.0})).norm(), 0.5, 1e-15);
  auto B = InputSet::box(pt({-1.0, 0.0}), pt({1.0, 2.0}));
  EXPECT_EQ(B.project(pt({-3.0, 1.0})), pt({-1.0, 1.0}));
}

TEST(Region, MaskPinsNearestNodeForTinyGoal) {
  GridSpec g({-1.0, -1.0}, {1.0, 1.0}, {4, 4});
  auto r = Region::ball(pt({0.1, 0.1}), 0.01);
  auto strict = region_mask(g, r);
  EXPECT_EQ(std::count(strict.begin(), strict.end(), 1), 0);
  auto pinned = region_mask(g, r, true);
  EXPECT_EQ(std::count(pinned.begin(), pinned.end(), 1), 1);
  EXPECT_TRUE(pinned[g.flat(g.index_of(pt({0.0, 0.0})))]);
}

TEST(Region, HalfLineBox) {
  auto r = Region::box(pt({-kInf}), pt({0.1}));
  EXPECT_TRUE(r.contains(pt({-100.0})));
  EXPECT_TRUE(r.contains(pt({0.1})));
  EXPECT_FALSE(r.contains(pt({0.1000001})));
  EXPECT_EQ(r.centroid()[0], 0.1);
}

TEST(Trajectory, CsvHeader) {
  auto tr = extended_liouville_integrate(ClosedLoop(decay1d()), {}, pt({1.0}), 1.0, 0.1, 0.05);
  std::stringstream ss;
  write_csv(ss, tr);
  EXPECT_EQ(ss.str().substr(0, ss.str().find('\n')), "t,x0,rho");
}
