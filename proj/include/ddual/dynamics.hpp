#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <functional>
#include <limits>
#include <memory>
#include <vector>

#include "ddual/errors.hpp"
#include "ddual/grid.hpp"

namespace ddual {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

// Closed geometric region. Box bounds may be infinite.
struct Region {
  enum class Kind { empty, box, ball, custom };
  Kind kind = Kind::empty;
  Point lo, hi;        // box
  Point center;        // ball
  double radius = 0.0;
  std::function<bool(const Point&)> predicate;  // custom
  Point custom_centroid;

  static Region empty() { return {}; }
  static Region box(Point lo, Point hi) {
    Region r;
    r.kind = Kind::box;
    r.lo = std::move(lo);
    r.hi = std::move(hi);
    return r;
  }
  static Region ball(Point c, double radius) {
    Region r;
    r.kind = Kind::ball;
    r.center = std::move(c);
    r.radius = radius;
    return r;
  }
  static Region custom(std::function<bool(const Point&)> pred, Point centroid) {
    Region r;
    r.kind = Kind::custom;
    r.predicate = std::move(pred);
    r.custom_centroid = std::move(centroid);
    return r;
  }

  bool is_empty() const { return kind == Kind::empty; }

  bool contains(const Point& x) const {
    switch (kind) {
      case Kind::empty:
        return false;
      case Kind::box:
        for (int k = 0; k < x.size(); ++k) {
          if (x[k] < lo[k] - 1e-12 * (1.0 + std::abs(lo[k]))) return false;
          if (x[k] > hi[k] + 1e-12 * (1.0 + std::abs(hi[k]))) return false;
        }
        return true;
      case Kind::ball:
        return (x - center).norm() <= radius + 1e-12 * (1.0 + radius);
      case Kind::custom:
        return predicate(x);
    }
    return false;
  }

  Point centroid() const {
    switch (kind) {
      case Kind::box: {
        Point c(lo.size());
        for (int k = 0; k < lo.size(); ++k) {
          if (std::isfinite(lo[k]) && std::isfinite(hi[k])) c[k] = 0.5 * (lo[k] + hi[k]);
          else if (std::isfinite(lo[k])) c[k] = lo[k];
          else if (std::isfinite(hi[k])) c[k] = hi[k];
          else c[k] = 0.0;
        }
        return c;
      }
      case Kind::ball:
        return center;
      case Kind::custom:
        return custom_centroid;
      default:
        return Point();
    }
  }
};

// Admissible input or disturbance set.
struct InputSet {
  enum class Kind { none, ball, box, finite };
  Kind kind = Kind::none;
  int dim = 0;
  double radius = 0.0;
  Point lo, hi;
  std::vector<Point> points;

  static InputSet none(int dim = 0) {
    InputSet s;
    s.dim = dim;
    return s;
  }
  static InputSet ball(int dim, double radius) {
    InputSet s;
    s.kind = Kind::ball;
    s.dim = dim;
    s.radius = radius;
    return s;
  }
  static InputSet box(Point lo, Point hi) {
    InputSet s;
    s.kind = Kind::box;
    s.dim = static_cast<int>(lo.size());
    s.lo = std::move(lo);
    s.hi = std::move(hi);
    return s;
  }
  static InputSet finite(std::vector<Point> pts) {
    InputSet s;
    s.kind = Kind::finite;
    s.dim = pts.empty() ? 0 : static_cast<int>(pts.front().size());
    s.points = std::move(pts);
    return s;
  }

  // Degenerate sets collapse to the single point 0.
  bool trivial() const { return kind == Kind::none || (kind == Kind::ball && radius == 0.0); }

  // Radius of the smallest origin-centered ball containing the set.
  double size_radius() const {
    switch (kind) {
      case Kind::ball:
        return radius;
      case Kind::box:
        return std::max(lo.cwiseAbs().maxCoeff(), hi.cwiseAbs().maxCoeff());
      case Kind::finite: {
        double r = 0.0;
        for (const auto& p : points) r = std::max(r, p.norm());
        return r;
      }
      default:
        return 0.0;
    }
  }

  Point zero() const { return Point::Zero(dim); }

  Point project(const Point& v) const {
    switch (kind) {
      case Kind::ball: {
        const double nv = v.norm();
        return nv > radius ? Point(v * (radius / nv)) : v;
      }
      case Kind::box:
        return v.cwiseMax(lo).cwiseMin(hi);
      default:
        return v;
    }
  }

  // Finite discretization: per-axis tensor grid (ball: points inside plus a
  // boundary ring in 2D), or the explicit point list.
  std::vector<Point> discretize(int per_axis) const {
    std::vector<Point> out;
    if (trivial() || dim == 0) {
      out.push_back(zero());
      return out;
    }
    if (kind == Kind::finite) return points;
    Point a(dim), b(dim);
    for (int k = 0; k < dim; ++k) {
      a[k] = kind == Kind::ball ? -radius : lo[k];
      b[k] = kind == Kind::ball ? radius : hi[k];
    }
    per_axis = std::max(2, per_axis);
    long total = 1;
    for (int k = 0; k < dim; ++k) total *= per_axis;
    for (long c = 0; c < total; ++c) {
      Point u(dim);
      long r = c;
      for (int k = dim - 1; k >= 0; --k) {
        const int i = static_cast<int>(r % per_axis);
        r /= per_axis;
        u[k] = a[k] + (b[k] - a[k]) * i / (per_axis - 1);
      }
      if (kind == Kind::ball && u.norm() > radius * (1 + 1e-12)) continue;
      out.push_back(u);
    }
    if (kind == Kind::ball && dim == 2) {
      const int ring = 4 * per_axis;
      for (int i = 0; i < ring; ++i) {
        const double th = 2.0 * M_PI * i / ring;
        Point u(2);
        u << radius * std::cos(th), radius * std::sin(th);
        out.push_back(u);
      }
    }
    return out;
  }
};

// Grid nodes inside a region. With pin_nearest, a non-empty region that
// captures no node marks the node nearest its centroid.
inline std::vector<char> region_mask(const GridSpec& g, const Region& r, bool pin_nearest = false) {
  std::vector<char> mask(g.size(), 0);
  if (r.is_empty()) return mask;
  bool any = false;
  for (std::size_t i = 0; i < g.size(); ++i)
    if (r.contains(g.point(i))) mask[i] = 1, any = true;
  if (!any && pin_nearest) mask[g.flat(g.index_of(r.centroid()))] = 1;
  return mask;
}

using Policy = std::function<Point(const Point&)>;

struct ControlledSystem {
  int n = 1;  // state dimension
  int m = 0;  // input dimension
  int p = 0;  // disturbance dimension

  std::function<Point(const Point& x, const Point& u, const Point& d)> drift;
  // Analytic div_x F; optional.
  std::function<double(const Point& x, const Point& u, const Point& d)> divergence;
  // Optional affine structure F = F(x,0,d) + B(x)u and F = F(x,u,0) + E(x)d.
  std::function<Eigen::MatrixXd(const Point& x)> input_matrix;
  std::function<Eigen::MatrixXd(const Point& x)> disturbance_matrix;

  InputSet inputs;
  InputSet disturbances;
  Region goal;
  Region danger;

  std::function<double(const Point& x, const Point& u)> running_cost;
  bool cost_depends_on_input = false;
  std::function<double(const Point& x)> terminal_cost;

  int input_points_per_axis = 11;
  double domain_width = 1.0;  // scales finite-difference steps

  Point zero_input() const { return Point::Zero(m); }
  Point zero_disturbance() const { return Point::Zero(p); }
  double cost(const Point& x, const Point& u) const { return running_cost ? running_cost(x, u) : 0.0; }
  double terminal(const Point& x) const { return terminal_cost ? terminal_cost(x) : 0.0; }
  bool input_affine() const { return static_cast<bool>(input_matrix); }
  bool disturbance_affine() const { return static_cast<bool>(disturbance_matrix); }
};

// ẋ = u with a ball or other input set; divergence 0.
inline ControlledSystem single_integrator(int n, InputSet inputs) {
  ControlledSystem s;
  s.n = n;
  s.m = n;
  s.inputs = std::move(inputs);
  s.drift = [](const Point& x, const Point& u, const Point& d) {
    Point f = u;
    if (d.size() == f.size()) f += d;
    return f;
  };
  s.divergence = [](const Point&, const Point&, const Point&) { return 0.0; };
  s.input_matrix = [n](const Point&) { return Eigen::MatrixXd::Identity(n, n); };
  s.running_cost = [](const Point&, const Point&) { return 1.0; };
  s.terminal_cost = [](const Point&) { return 0.0; };
  return s;
}

// Autonomous ẋ = f(x) with a known divergence.
inline ControlledSystem autonomous(int n, std::function<Point(const Point&)> f,
                                   std::function<double(const Point&)> div = {}) {
  ControlledSystem s;
  s.n = n;
  s.drift = [f](const Point& x, const Point&, const Point&) { return f(x); };
  if (div) s.divergence = [div](const Point& x, const Point&, const Point&) { return div(x); };
  s.running_cost = [](const Point&, const Point&) { return 1.0; };
  return s;
}

// Closed-loop vector field x ↦ F(x, u(x), d(x)).
class ClosedLoop {
 public:
  ClosedLoop(const ControlledSystem& sys, Policy control = {}, Policy disturbance = {})
      : sys_(std::make_shared<const ControlledSystem>(sys)), u_(std::move(control)), d_(std::move(disturbance)) {}

  const ControlledSystem& system() const { return *sys_; }

  Point input(const Point& x) const { return u_ ? u_(x) : sys_->zero_input(); }
  Point disturbance(const Point& x) const { return d_ ? d_(x) : sys_->zero_disturbance(); }

  Point operator()(const Point& x) const { return sys_->drift(x, input(x), disturbance(x)); }

  // Analytic divergence only when no feedback enters the field; otherwise
  // central differences of the closed-loop map.
  double divergence(const Point& x) const {
    const bool feedback = (sys_->m > 0 && u_) || (sys_->p > 0 && d_);
    if (sys_->divergence && !feedback) return sys_->divergence(x, input(x), disturbance(x));
    const double h = 1e-5 * sys_->domain_width;
    double div = 0.0;
    for (int k = 0; k < x.size(); ++k) {
      Point a = x, b = x;
      a[k] += h;
      b[k] -= h;
      div += ((*this)(a)[k] - (*this)(b)[k]) / (2 * h);
    }
    return div;
  }

 private:
  std::shared_ptr<const ControlledSystem> sys_;
  Policy u_, d_;
};

struct Trajectory {
  std::vector<double> times;
  std::vector<Point> states;
  std::vector<double> density;  // empty unless integrated with density
  bool reached_goal = false;

  std::size_t size() const { return times.size(); }
  const Point& final_state() const { return states.back(); }
};

template <class Vec, class F>
Vec rk4_step(const F& f, const Vec& y, double h) {
  const Vec k1 = f(y);
  const Vec k2 = f(Vec(y + 0.5 * h * k1));
  const Vec k3 = f(Vec(y + 0.5 * h * k2));
  const Vec k4 = f(Vec(y + h * k3));
  return y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

inline void check_finite(const Eigen::Ref<const Eigen::VectorXd>& y, double t) {
  if (!y.allFinite()) throw NonFiniteState("non-finite state at t=" + format_real(t));
}

struct IntegrateOptions {
  bool stop_at_goal = true;
  double event_resolution = 1e-9;
};

namespace detail {

inline int step_count(double t_end, double dt) {
  if (!(dt > 0)) throw ConfigError("dt must be positive");
  if (!(t_end >= 0)) throw ConfigError("t_end must be non-negative");
  return t_end == 0 ? 0 : static_cast<int>(std::ceil(t_end / dt - 1e-12));
}

// Shared driver over an extended state y = [x; extra...]. `in_goal` tests the
// x part; on entry the step is bisected to the requested time resolution.
template <class F>
Trajectory drive(const F& rhs, Eigen::VectorXd y, int n, double t_end, double dt, const Region* goal,
                 double resolution, bool with_density) {
  Trajectory tr;
  const int steps = step_count(t_end, dt);
  const double h = steps ? t_end / steps : 0.0;
  auto record = [&](double t, const Eigen::VectorXd& s) {
    tr.times.push_back(t);
    tr.states.push_back(Point(s.head(n)));
    if (with_density) tr.density.push_back(s[n]);
  };
  check_finite(y, 0.0);
  record(0.0, y);
  if (goal && goal->contains(Point(y.head(n)))) {
    tr.reached_goal = true;
    return tr;
  }
  for (int i = 0; i < steps; ++i) {
    const double t = i * h;
    Eigen::VectorXd next = rk4_step(rhs, y, h);
    check_finite(next, t + h);
    if (goal && goal->contains(Point(next.head(n)))) {
      double a = 0.0, b = h;
      Eigen::VectorXd yb = next;
      while (b - a > resolution) {
        const double mid = 0.5 * (a + b);
        Eigen::VectorXd ym = rk4_step(rhs, y, mid);
        if (goal->contains(Point(ym.head(n)))) {
          b = mid;
          yb = ym;
        } else {
          a = mid;
        }
      }
      record(t + b, yb);
      tr.reached_goal = true;
      return tr;
    }
    y = next;
    record(i + 1 == steps ? t_end : t + h, y);
  }
  return tr;
}

}  // namespace detail

inline Trajectory integrate(const ClosedLoop& f, const Point& x0, double t_end, double dt,
                            const IntegrateOptions& opt = {}) {
  const int n = static_cast<int>(x0.size());
  auto rhs = [&](const Eigen::VectorXd& y) -> Eigen::VectorXd { return f(Point(y)); };
  const Region* goal = opt.stop_at_goal && !f.system().goal.is_empty() ? &f.system().goal : nullptr;
  return detail::drive(rhs, Eigen::VectorXd(x0), n, t_end, dt, goal, opt.event_resolution, false);
}

inline Trajectory integrate(const ControlledSystem& sys, const Policy& control, const Point& x0, double t_end,
                            double dt, const IntegrateOptions& opt = {}) {
  return integrate(ClosedLoop(sys, control), x0, t_end, dt, opt);
}

// Φ_f(x, −t): integrates the negated closed-loop drift, ignoring the goal.
inline Point reverse_flow(const ClosedLoop& f, const Point& x, double t, double dt) {
  const int n = static_cast<int>(x.size());
  auto rhs = [&](const Eigen::VectorXd& y) -> Eigen::VectorXd { return -Eigen::VectorXd(f(Point(y))); };
  return detail::drive(rhs, Eigen::VectorXd(x), n, t, dt, nullptr, 0.0, false).final_state();
}

inline Point reverse_flow(const ControlledSystem& sys, const Policy& control, const Point& x, double t, double dt) {
  return reverse_flow(ClosedLoop(sys, control), x, t, dt);
}

// Source term φ(x, ρ) of the Liouville ODE.
using DensitySource = std::function<double(const Point& x, double rho)>;

struct LiouvilleOptions {
  bool stop_at_goal = false;
  double event_resolution = 1e-9;
};

// [ẋ; ρ̇] = [f; φ(x,ρ) − (∇·f)ρ]
inline Trajectory extended_liouville_integrate(const ClosedLoop& f, const DensitySource& source, const Point& x0,
                                               double rho0, double t_end, double dt,
                                               const LiouvilleOptions& opt = {}) {
  if (!(rho0 >= 0)) throw ConfigError("initial density must be non-negative");
  const int n = static_cast<int>(x0.size());
  auto rhs = [&](const Eigen::VectorXd& y) -> Eigen::VectorXd {
    const Point x(y.head(n));
    Eigen::VectorXd dy(n + 1);
    dy.head(n) = f(x);
    const double phi = source ? source(x, y[n]) : 0.0;
    dy[n] = phi - f.divergence(x) * y[n];
    return dy;
  };
  Eigen::VectorXd y(n + 1);
  y.head(n) = x0;
  y[n] = rho0;
  const Region* goal = opt.stop_at_goal && !f.system().goal.is_empty() ? &f.system().goal : nullptr;
  return detail::drive(rhs, y, n, t_end, dt, goal, opt.event_resolution, true);
}

inline void write_csv(std::ostream& os, const Trajectory& tr) {
  const int n = tr.states.empty() ? 0 : static_cast<int>(tr.states.front().size());
  os << 't';
  for (int k = 0; k < n; ++k) os << ",x" << k;
  if (!tr.density.empty()) os << ",rho";
  os << '\n';
  for (std::size_t i = 0; i < tr.size(); ++i) {
    os << format_real(tr.times[i]);
    for (int k = 0; k < n; ++k) os << ',' << format_real(tr.states[i][k]);
    if (!tr.density.empty()) os << ',' << format_real(tr.density[i]);
    os << '\n';
  }
}

}  // namespace ddual
