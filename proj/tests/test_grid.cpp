#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <sstream>

#include "ddual/grid.hpp"

using namespace ddual;

namespace {

GridSpec line(double lo, double hi, int cells) { return GridSpec({lo}, {hi}, {cells}); }

ScalarField field1d(const GridSpec& g, std::vector<double> v) {
  ScalarField f(g);
  f.values = std::move(v);
  return f;
}

MultiIndex at(int i) {
  MultiIndex m(1);
  m << i;
  return m;
}

Point pt(std::initializer_list<double> xs) {
  Point p(static_cast<int>(xs.size()));
  int k = 0;
  for (double x : xs) p[k++] = x;
  return p;
}

}  // namespace

TEST(GridSpec, RejectsBadShapes) {
  EXPECT_THROW(GridSpec({0.0}, {1.0}, {1}), ConfigError);
  EXPECT_THROW(GridSpec({1.0}, {1.0}, {4}), ConfigError);
  EXPECT_THROW(GridSpec({0.0, 0.0}, {1.0}, {4, 4}), ConfigError);
}

TEST(GridSpec, SpacingAndSize) {
  GridSpec g({-2.0, 0.0}, {2.0, 1.0}, {80, 10});
  EXPECT_DOUBLE_EQ(g.spacing(0), 0.05);
  EXPECT_DOUBLE_EQ(g.spacing(1), 0.1);
  EXPECT_EQ(g.size(), 81u * 11u);
  EXPECT_DOUBLE_EQ(g.cell_volume(), 0.005);
}

TEST(GridSpec, PointIndexRoundTrip) {
  GridSpec g({-2.0, -1.0, 0.0}, {2.0, 1.0, 3.0}, {8, 4, 6});
  for (std::size_t f = 0; f < g.size(); ++f) {
    const MultiIndex m = g.multi(f);
    EXPECT_EQ(g.flat(m), f);
    EXPECT_EQ(g.index_of(g.point(m)), m);
  }
  // Last dimension varies fastest.
  EXPECT_EQ(g.multi(1)[2], 1);
  EXPECT_EQ(g.point(g.size() - 1)[0], 2.0);
}

TEST(GridSpec, ClampsOutsideQueries) {
  GridSpec g({0.0, 0.0}, {1.0, 1.0}, {4, 4});
  EXPECT_EQ(g.index_of(pt({-5.0, 9.0})), g.multi(g.flat(g.index_of(pt({0.0, 1.0})))));
}

TEST(Upwind, DifferencesOnLinearRamp) {
  auto f = field1d(line(0, 2, 2), {0, 1, 2});
  auto d = upwind_differences(f, at(1));
  EXPECT_DOUBLE_EQ(d.backward[0], 1.0);
  EXPECT_DOUBLE_EQ(d.forward[0], 1.0);
}

TEST(Upwind, ConstantFieldHasZeroDifferences) {
  GridSpec g({0.0, 0.0}, {1.0, 2.0}, {3, 5});
  ScalarField f(g, 3.5);
  for (std::size_t i = 0; i < g.size(); ++i) {
    auto d = upwind_differences(f, g.multi(i));
    EXPECT_EQ(d.backward.cwiseAbs().maxCoeff(), 0.0);
    EXPECT_EQ(d.forward.cwiseAbs().maxCoeff(), 0.0);
  }
}

TEST(Upwind, MissingNeighbourGivesZero) {
  auto f = field1d(line(0, 2, 2), {5, 1, 2});
  EXPECT_EQ(upwind_differences(f, at(0)).backward[0], 0.0);
  EXPECT_EQ(upwind_differences(f, at(2)).forward[0], 0.0);
  EXPECT_DOUBLE_EQ(upwind_differences(f, at(0)).forward[0], -4.0);
}

TEST(Upwind, DirectionalSelectsBySign) {
  auto ramp = field1d(line(0, 2, 2), {0, 1, 2});
  EXPECT_DOUBLE_EQ(upwind_directional(ramp, pt({1.0}), at(1)), 1.0);
  auto bowl = field1d(line(0, 2, 2), {0, 1, 4});
  EXPECT_DOUBLE_EQ(upwind_directional(bowl, pt({-1.0}), at(1)), -3.0);
  // f > 0 reads the backward difference (1), f < 0 the forward one (3).
  EXPECT_DOUBLE_EQ(upwind_directional(bowl, pt({1.0}), at(1)), 1.0);
  EXPECT_EQ(upwind_directional(bowl, pt({0.0}), at(1)), 0.0);
}

TEST(Upwind, ValueSenseMirrorsTransportSense) {
  auto bowl = field1d(line(0, 2, 2), {0, 1, 4});
  EXPECT_DOUBLE_EQ(upwind_directional(bowl, pt({1.0}), at(1), UpwindSense::value), 3.0);
  EXPECT_DOUBLE_EQ(upwind_directional(bowl, pt({-1.0}), at(1), UpwindSense::value), -1.0);
}

TEST(Upwind, AffineFieldIsExactForAnySignPattern) {
  GridSpec g({-1.0, -1.0, 0.0}, {1.0, 2.0, 1.0}, {6, 9, 4});
  const Point a = pt({0.7, -1.3, 2.1});
  auto V = ScalarField::sample(g, [&](const Point& x) { return a.dot(x) + 0.4; });
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-2, 2);
  for (std::size_t i = 0; i < g.size(); ++i) {
    const MultiIndex m = g.multi(i);
    bool interior = true;
    for (int k = 0; k < 3; ++k) interior &= m[k] > 0 && m[k] < g.cells(k);
    if (!interior) continue;
    const Point f = pt({u(rng), u(rng), u(rng)});
    for (auto s : {UpwindSense::transport, UpwindSense::value})
      EXPECT_NEAR(upwind_directional(V, f, m, s), a.dot(f), 1e-12);
  }
}

TEST(Upwind, FirstOrderConvergenceOnQuadratic) {
  // Error of the one-sided difference of x^2+y^2 at interior points halves
  // with the spacing.
  auto err = [](int cells) {
    GridSpec g({-1.0, -1.0}, {1.0, 1.0}, {cells, cells});
    auto V = ScalarField::sample(g, [](const Point& x) { return x.squaredNorm(); });
    double e = 0.0;
    for (std::size_t i = 0; i < g.size(); ++i) {
      const MultiIndex m = g.multi(i);
      if (m[0] == 0 || m[1] == 0 || m[0] == cells || m[1] == cells) continue;
      const Point grad = 2 * g.point(i);
      const Point f = pt({1.0, -1.0});
      e = std::max(e, std::abs(upwind_directional(V, f, m) - grad.dot(f)));
    }
    return e;
  };
  const double e1 = err(10), e2 = err(20), e3 = err(40);
  EXPECT_NEAR(e1 / e2, 2.0, 0.05);
  EXPECT_NEAR(e2 / e3, 2.0, 0.05);
}

TEST(Upwind, JumpsFollowVelocitySign) {
  GridSpec g({0.0, 0.0}, {1.0, 1.0}, {4, 4});
  const std::size_t c = g.flat(g.index_of(pt({0.5, 0.5})));
  Jump js[kMaxDim];
  const int n = upwind_jumps(g, c, g.multi(c), pt({0.5, -0.25}), js);
  ASSERT_EQ(n, 2);
  EXPECT_EQ(js[0].to, c + g.stride(0));
  EXPECT_DOUBLE_EQ(js[0].rate, 2.0);
  EXPECT_EQ(js[1].to, c - g.stride(1));
  EXPECT_DOUBLE_EQ(js[1].rate, 1.0);
  // Outward velocity at the boundary has no target.
  EXPECT_EQ(upwind_jumps(g, 0, g.multi(0), pt({-1.0, -1.0}), js), 0);
}

TEST(Interpolate, ReproducesNodesAndLines) {
  auto f = field1d(line(0, 1, 2), {0, 0.5, 1});
  EXPECT_DOUBLE_EQ(interpolate(f, pt({0.25})), 0.25);
  EXPECT_DOUBLE_EQ(interpolate(f, pt({1.0})), 1.0);
  EXPECT_DOUBLE_EQ(interpolate(f, pt({-3.0})), 0.0);
  EXPECT_DOUBLE_EQ(interpolate(f, pt({7.0})), 1.0);
  ScalarField c(GridSpec({0.0, 0.0}, {1.0, 1.0}, {3, 3}), -2.5);
  EXPECT_DOUBLE_EQ(interpolate(c, pt({0.31, 0.77})), -2.5);
}

TEST(Interpolate, ExactForMultilinearAndMonotone) {
  GridSpec g({0.0, -1.0}, {2.0, 1.0}, {4, 5});
  auto bil = [](const Point& x) { return 1.0 + 2 * x[0] - x[1] + 0.5 * x[0] * x[1]; };
  auto V = ScalarField::sample(g, bil);
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> ux(0, 2), uy(-1, 1), w(-1, 1);
  for (int t = 0; t < 200; ++t) {
    const Point x = pt({ux(rng), uy(rng)});
    EXPECT_NEAR(interpolate(V, x), bil(x), 1e-12);
  }
  ScalarField R(g);
  for (auto& v : R.values) v = w(rng);
  for (int t = 0; t < 500; ++t) {
    const Point x = pt({ux(rng), uy(rng)});
    const MultiIndex lo = g.index_of(x);
    double mn = 1e9, mx = -1e9;
    for (int a = -1; a <= 1; ++a)
      for (int b = -1; b <= 1; ++b) {
        MultiIndex m = lo;
        m[0] += a, m[1] += b;
        if (!g.contains(m)) continue;
        mn = std::min(mn, R.at(m));
        mx = std::max(mx, R.at(m));
      }
    const double v = interpolate(R, x);
    EXPECT_GE(v, mn - 1e-15);
    EXPECT_LE(v, mx + 1e-15);
  }
}

TEST(Csv, ScalarRoundTripIsExact) {
  GridSpec g({-2.0, 0.5}, {2.0, 1.5}, {4, 3});
  auto V = ScalarField::sample(g, [](const Point& x) { return std::sin(x[0]) / 3.0 + x[1]; });
  std::stringstream ss;
  write_csv(ss, V);
  const std::string text = ss.str();
  EXPECT_EQ(text.substr(0, text.find('\n')), "i0,i1,x0,x1,value");
  auto back = read_scalar_csv(ss);
  EXPECT_TRUE(back.grid == g);
  EXPECT_EQ(back.values, V.values);
}

TEST(Csv, VectorRoundTripIsExact) {
  GridSpec g({0.0}, {1.0}, {5});
  VectorField u(g, 2);
  for (std::size_t i = 0; i < g.size(); ++i) u.set(i, pt({0.1 * i, -1.0 / (i + 1)}));
  std::stringstream ss;
  write_csv(ss, u);
  EXPECT_EQ(ss.str().substr(0, ss.str().find('\n')), "i0,x0,u0,u1");
  auto back = read_vector_csv(ss);
  EXPECT_EQ(back.components, 2);
  EXPECT_EQ(back.values, u.values);
}
