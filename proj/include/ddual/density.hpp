#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <random>
#include <string>
#include <unordered_map>
#include <vector>

#include "ddual/dynamics.hpp"
#include "ddual/grid.hpp"

namespace ddual {

enum class SinkMode { goal, discount, none };

struct SupplyFunction {
  std::function<double(const Point&)> positive;  // φ+
  std::optional<ScalarField> gridded;            // overrides `positive` when set
  SinkMode sink = SinkMode::goal;
  double kappa = 0.0;
  std::function<double(const Point&)> initial;  // ρ0

  double phi_plus(const Point& x) const {
    if (gridded) return interpolate(*gridded, x);
    return positive ? positive(x) : 0.0;
  }
  double rho0(const Point& x) const { return initial ? initial(x) : 0.0; }

  ScalarField on_grid(const GridSpec& g) const {
    if (gridded && gridded->grid == g) return *gridded;
    return ScalarField::sample(g, [&](const Point& x) { return phi_plus(x); });
  }
  // Φ+ by midpoint quadrature on the grid nodes.
  double total_rate(const GridSpec& g) const { return on_grid(g).integral(); }
};

struct DensityField {
  ScalarField rho;
  std::string policy_id;
  double supply_rate = 0.0;  // ∫φ+
  double sink_rate = 0.0;    // −∫φ− (absorbed into X_g or discounted)
  double residual = 0.0;     // ∞-norm of the discrete balance
  int sweeps = 0;
};

// ---- pointwise evaluation along characteristics ------------------------------

namespace detail {

inline double characteristic_density(const ClosedLoop& f, const SupplyFunction& supply,
                                     const std::function<double(const Point&)>& rho_init, double t, const Point& x,
                                     double dt) {
  if (!(t >= 0)) throw ConfigError("time must be non-negative");
  const Region& goal = f.system().goal;
  const bool absorb = supply.sink == SinkMode::goal && !goal.is_empty();
  if (t == 0) return absorb && goal.contains(x) ? 0.0 : rho_init(x);
  const Point x0 = reverse_flow(f, x, t, dt);
  const double kappa = supply.sink == SinkMode::discount ? supply.kappa : 0.0;
  DensitySource src = [&](const Point& y, double r) { return supply.phi_plus(y) - kappa * r; };
  Trajectory tr = extended_liouville_integrate(f, src, x0, rho_init(x0), t, dt);
  if (!absorb) return tr.density.back();
  // The goal is a sink: density resets to zero at the last visit.
  std::size_t last = tr.size();
  for (std::size_t i = 0; i < tr.size(); ++i)
    if (goal.contains(tr.states[i])) last = i;
  if (last == tr.size()) return tr.density.back();
  if (last + 1 == tr.size()) return 0.0;
  const double rest = t - tr.times[last];
  Trajectory tail = extended_liouville_integrate(f, src, tr.states[last], 0.0, rest, dt);
  return tail.density.back();
}

}  // namespace detail

// ρ(t, x) by the two-step procedure: reverse flow to x0, then forward
// integration of the extended Liouville ODE from ρ0(x0).
inline double density_at(const ClosedLoop& f, const SupplyFunction& supply, double t, const Point& x,
                         double dt = 1e-3) {
  return detail::characteristic_density(f, supply, [&](const Point& y) { return supply.rho0(y); }, t, x, dt);
}

// Per-node two-step evaluation starting from a gridded density.
inline DensityField propagate_density(const ClosedLoop& f, const SupplyFunction& supply, const ScalarField& rho_init,
                                      double t_end, double dt) {
  DensityField out{ScalarField(rho_init.grid), "propagated"};
  if (t_end == 0) {
    out.rho = rho_init;
    return out;
  }
  auto init = [&](const Point& y) { return interpolate(rho_init, y); };
  const GridSpec& g = rho_init.grid;
  parallel_for(g.size(), [&](std::size_t i) {
    out.rho.values[i] = detail::characteristic_density(f, supply, init, t_end, g.point(i), dt);
  });
  out.supply_rate = supply.total_rate(g);
  return out;
}

// ---- stationary solve on the grid -------------------------------------------

struct FdmOptions {
  double damping = 0.9;
  double tolerance = 1e-8;  // relative to max(1, ‖φ+‖∞)
  int max_sweeps = 2'000'000;
  std::string policy_id = "closed-loop";
};

// Donor-cell balance at node I (outside the goal):
//   ρ_I (Σ out-rates + κ) = φ+_I + Σ_K ρ_K q_{K→I}
// with ρ = 0 on goal nodes. Rates come from upwind_jumps, so the operator is
// the exact adjoint of the value-sense HJB stencil.
inline DensityField stationary_density_fdm(const VectorField& velocity, const SupplyFunction& supply,
                                           const std::vector<char>& goal_mask, const FdmOptions& opt = {}) {
  const GridSpec& g = velocity.grid;
  const std::size_t N = g.size();
  const double kappa = supply.sink == SinkMode::discount ? supply.kappa : 0.0;
  const ScalarField phi = supply.on_grid(g);
  const bool goal_mode = supply.sink == SinkMode::goal;

  std::vector<double> out_rate(N, 0.0);
  std::vector<std::vector<Jump>> incoming(N);
  std::vector<std::vector<Jump>> outgoing(N);
  for (std::size_t i = 0; i < N; ++i) {
    if (goal_mode && goal_mask[i]) continue;
    Jump js[kMaxDim];
    const int c = upwind_jumps(g, i, g.multi(i), velocity.get(i), js);
    for (int j = 0; j < c; ++j) {
      out_rate[i] += js[j].rate;
      outgoing[i].push_back(js[j]);
      incoming[js[j].to].push_back({i, js[j].rate});
    }
  }

  // States fed by supply must drain somewhere.
  std::vector<char> drains(N, 0);
  {
    std::vector<std::size_t> stack;
    for (std::size_t i = 0; i < N; ++i)
      if ((goal_mode && goal_mask[i]) || kappa > 0) drains[i] = 1, stack.push_back(i);
    while (!stack.empty()) {
      const std::size_t j = stack.back();
      stack.pop_back();
      for (const Jump& e : incoming[j])
        if (!drains[e.to]) drains[e.to] = 1, stack.push_back(e.to);
    }
    std::vector<char> fed(N, 0);
    for (std::size_t i = 0; i < N; ++i)
      if (phi[i] > 0 && !(goal_mode && goal_mask[i])) fed[i] = 1, stack.push_back(i);
    while (!stack.empty()) {
      const std::size_t j = stack.back();
      stack.pop_back();
      if (!drains[j])
        throw SingularTransport("supplied state at " + format_real(g.point(j)[0]) +
                                " never reaches a sink under the closed loop");
      for (const Jump& e : outgoing[j])
        if (!fed[e.to] && !(goal_mode && goal_mask[e.to])) fed[e.to] = 1, stack.push_back(e.to);
    }
  }

  DensityField res{ScalarField(g), opt.policy_id};
  std::vector<double>& rho = res.rho.values;
  std::vector<double> next(N, 0.0);
  const double tol = opt.tolerance * std::max(1.0, phi.max_abs());
  auto balance = [&](std::size_t i, const std::vector<double>& r) {
    double in = phi[i];
    for (const Jump& e : incoming[i]) in += r[e.to] * e.rate;
    return in;
  };
  for (int sweep = 1; sweep <= opt.max_sweeps; ++sweep) {
    parallel_for(N, [&](std::size_t i) {
      if (goal_mode && goal_mask[i]) {
        next[i] = 0.0;
        return;
      }
      const double d = out_rate[i] + kappa;
      const double in = balance(i, rho);
      next[i] = d > 0 ? (1 - opt.damping) * rho[i] + opt.damping * in / d : (in > 0 ? kInf : 0.0);
    });
    rho.swap(next);
    double r = 0.0;
    for (std::size_t i = 0; i < N; ++i) {
      if (goal_mode && goal_mask[i]) continue;
      r = std::max(r, std::abs(balance(i, rho) - (out_rate[i] + kappa) * rho[i]));
    }
    if (!std::isfinite(r)) throw SingularTransport("stationary density diverged");
    res.sweeps = sweep;
    res.residual = r;
    if (r <= tol) break;
  }
  if (res.residual > tol) throw NoConvergence("stationary density: residual " + format_real(res.residual));

  const double vol = g.cell_volume();
  double absorbed = 0.0;
  for (std::size_t i = 0; i < N; ++i) {
    if (goal_mode && goal_mask[i]) {
      absorbed += std::max(0.0, phi[i]);  // supplied inside X_g, absorbed at once
      continue;
    }
    absorbed += kappa * rho[i];
    if (goal_mode)
      for (const Jump& e : outgoing[i])
        if (goal_mask[e.to]) absorbed += rho[i] * e.rate;
  }
  res.supply_rate = phi.integral();
  res.sink_rate = absorbed * vol;
  return res;
}

inline VectorField closed_loop_velocity(const GridSpec& g, const ClosedLoop& f) {
  VectorField v(g, g.dim());
  parallel_for(g.size(), [&](std::size_t i) { v.set(i, f(g.point(i))); });
  return v;
}

inline DensityField stationary_density_fdm(const GridSpec& g, const ClosedLoop& f, const SupplyFunction& supply,
                                           const FdmOptions& opt = {}) {
  const auto goal = region_mask(g, f.system().goal, true);
  return stationary_density_fdm(closed_loop_velocity(g, f), supply, goal, opt);
}

// ∫(φ+ + φ−) over the grid: supply minus what the sinks absorb.
inline double mass_balance(const SupplyFunction& supply, const DensityField& d) {
  if (supply.sink == SinkMode::discount && d.sink_rate == 0.0)
    return supply.total_rate(d.rho.grid) - supply.kappa * d.rho.integral();
  return supply.total_rate(d.rho.grid) - d.sink_rate;
}

// ---- kernel density estimate -------------------------------------------------

inline double epanechnikov(double s, double h) {
  if (std::abs(s) > h) return 0.0;
  return 0.75 / h * (1.0 - (s * s) / (h * h));
}

inline double epanechnikov(const Point& s, const Point& h) {
  double k = 1.0;
  for (int i = 0; i < s.size() && k != 0.0; ++i) k *= epanechnikov(s[i], h[i]);
  return k;
}

struct KdeOptions {
  int trials = 10000;
  double step = 0.01;   // t_s
  int horizon = 1000;   // M
  Point bandwidth;      // empty means 2Δx per dimension
  std::uint64_t seed = 0;
  int substeps = 4;     // RK4 steps per sampling interval
};

// Sum of product kernels over stored samples, bucketed by bandwidth-sized cells.
class KdeEstimate {
 public:
  KdeEstimate(std::vector<Point> samples, double mass, Point h, std::vector<int> trial, std::vector<int> step)
      : samples_(std::move(samples)), trial_(std::move(trial)), step_(std::move(step)), mass_(mass), h_(std::move(h)) {
    for (std::size_t i = 0; i < samples_.size(); ++i) buckets_[key(cell_of(samples_[i]))].push_back(i);
  }

  double operator()(const Point& x) const {
    const MultiIndex c = cell_of(x);
    const int n = static_cast<int>(x.size());
    double acc = 0.0;
    for (int nb = 0; nb < ipow3(n); ++nb) {
      MultiIndex d = c;
      int r = nb;
      for (int k = 0; k < n; ++k) {
        d[k] += r % 3 - 1;
        r /= 3;
      }
      auto it = buckets_.find(key(d));
      if (it == buckets_.end()) continue;
      for (std::size_t i : it->second) acc += epanechnikov(Point(x - samples_[i]), h_);
    }
    return acc * mass_;
  }

  ScalarField on_grid(const GridSpec& g) const {
    ScalarField s(g);
    parallel_for(g.size(), [&](std::size_t i) { s.values[i] = (*this)(g.point(i)); });
    return s;
  }

  double sample_mass() const { return mass_; }
  const Point& bandwidth() const { return h_; }
  std::size_t sample_count() const { return samples_.size(); }

  void write_samples(std::ostream& os) const {
    const int n = samples_.empty() ? 0 : static_cast<int>(samples_.front().size());
    os << "trial,step";
    for (int k = 0; k < n; ++k) os << ",x" << k;
    os << ",mass\n";
    for (std::size_t i = 0; i < samples_.size(); ++i) {
      os << trial_[i] << ',' << step_[i];
      for (int k = 0; k < n; ++k) os << ',' << format_real(samples_[i][k]);
      os << ',' << format_real(mass_) << '\n';
    }
  }

 private:
  static int ipow3(int n) {
    int r = 1;
    while (n--) r *= 3;
    return r;
  }
  MultiIndex cell_of(const Point& x) const {
    MultiIndex c(x.size());
    for (int k = 0; k < x.size(); ++k) c[k] = static_cast<int>(std::floor(x[k] / h_[k]));
    return c;
  }
  static std::int64_t key(const MultiIndex& c) {
    std::int64_t k = 0;
    for (int i = 0; i < c.size(); ++i) k = k * 2000003 + (c[i] + 1000000);
    return k;
  }

  std::vector<Point> samples_;
  std::vector<int> trial_, step_;
  double mass_;
  Point h_;
  std::unordered_map<std::int64_t, std::vector<std::size_t>> buckets_;
};

// Monte-Carlo estimate: N trials drawn from φ+ (inverse CDF on the gridded
// supply, uniform jitter within a cell), sampled every t_s for M steps; each
// sample outside X_g carries mass t_s Φ+ / N.
inline KdeEstimate density_kde(const GridSpec& g, const ClosedLoop& f, const SupplyFunction& supply,
                               const KdeOptions& opt) {
  if (opt.trials < 1) throw ConfigError("kde: trials must be >= 1");
  if (!(opt.step > 0) || opt.horizon < 1) throw ConfigError("kde: step and horizon must be positive");
  Point h = opt.bandwidth;
  if (h.size() == 0) {
    h.resize(g.dim());
    for (int k = 0; k < g.dim(); ++k) h[k] = 2 * g.spacing(k);
  }
  for (int k = 0; k < h.size(); ++k)
    if (!(h[k] > 0)) throw ConfigError("kde: bandwidth must be positive");

  const ScalarField phi = supply.on_grid(g);
  const double total = phi.integral();
  std::vector<double> cdf(g.size());
  double acc = 0.0;
  for (std::size_t i = 0; i < g.size(); ++i) cdf[i] = (acc += std::max(0.0, phi[i]));
  const double mass = opt.step * total / opt.trials;

  std::vector<Point> samples;
  std::vector<int> trial_of, step_of;
  if (acc <= 0) return KdeEstimate({}, mass, h, {}, {});

  const Region& goal = f.system().goal;
  const bool absorb = supply.sink == SinkMode::goal && !goal.is_empty();
  std::mt19937_64 rng(opt.seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const double sub = opt.step / std::max(1, opt.substeps);
  auto rhs = [&](const Eigen::VectorXd& y) -> Eigen::VectorXd { return f(Point(y)); };

  for (int tr = 0; tr < opt.trials; ++tr) {
    const double u = unit(rng) * acc;
    const std::size_t node = std::min<std::size_t>(std::upper_bound(cdf.begin(), cdf.end(), u) - cdf.begin(),
                                                   g.size() - 1);
    Point x = g.point(node);
    for (int k = 0; k < g.dim(); ++k) x[k] += (unit(rng) - 0.5) * g.spacing(k);
    x = g.clamp(x);
    bool done = false;
    for (int j = 0; j < opt.horizon; ++j) {
      if (absorb && goal.contains(x)) {
        done = true;
        break;
      }
      samples.push_back(x);
      trial_of.push_back(tr);
      step_of.push_back(j);
      Eigen::VectorXd y(x);
      for (int s = 0; s < std::max(1, opt.substeps); ++s) y = rk4_step(rhs, y, sub);
      check_finite(y, (j + 1) * opt.step);
      x = Point(y);
    }
    if (absorb && !done && !goal.contains(x))
      throw HorizonTooShort("kde: trial " + std::to_string(tr) + " did not reach the goal within M*t_s");
  }
  return KdeEstimate(std::move(samples), mass, h, std::move(trial_of), std::move(step_of));
}

}  // namespace ddual
