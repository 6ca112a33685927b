#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <optional>
#include <vector>

#include "ddual/dynamics.hpp"
#include "ddual/grid.hpp"

namespace ddual {

struct HjbOptions {
  int max_outer = 500;
  double policy_tol = 1e-4;    // ε_u relative to the input-set radius
  double residual_tol = 1e-8;  // relative to max(1, ‖C‖∞)
  double damping = 0.9;
  int max_sweeps = 200000;     // per linear solve
  int warmup_sweeps = 20000;
  int warmup_patience = 200;   // sweeps without progress before policy iteration takes over
  int ring_samples = 64;
};

struct HjbProblem {
  const ControlledSystem* system = nullptr;
  GridSpec grid;
  std::optional<ScalarField> sigma;        // extra running cost on X_d
  double kappa = 0.0;                      // discount rate; 0 = goal mode
  std::optional<VectorField> disturbance;  // frozen d(x) at grid nodes
  bool worst_case_disturbance = false;     // min over u of max over d instead
  std::optional<ScalarField> warm_start;
  HjbOptions options;
};

struct ValueField {
  ScalarField V;
  VectorField policy;    // action per node
  VectorField velocity;  // closed-loop F at each node
  std::vector<char> goal;
  int iterations = 0;
  int sweeps = 0;
  double residual = 0.0;
  double policy_change = 0.0;
  bool converged = false;
};

namespace detail {

struct Candidate {
  Point action;
  Point velocity;
  double cost;
};

inline double upwind_objective(const Candidate& c, const UpwindDifferences& d) {
  double s = c.cost;
  for (int k = 0; k < c.velocity.size(); ++k) {
    const double f = c.velocity[k];
    s += std::max(0.0, f) * d.forward[k] + std::min(0.0, f) * d.backward[k];
  }
  return s;
}

using CandidateFn = std::function<void(std::size_t node, const Point& x, const UpwindDifferences& d,
                                       std::vector<Candidate>& out)>;

struct ChainProblem {
  GridSpec grid;
  std::vector<char> terminal;
  std::vector<double> terminal_value;
  CandidateFn candidates;
  bool maximize = false;
  double kappa = 0.0;
  int action_dim = 0;
  double policy_tol = 0.0;  // absolute
  double residual_tol = 0.0;  // absolute
  double initial_value = 0.0;
  bool require_reachability = true;
  const ScalarField* warm_start = nullptr;
  HjbOptions options;
};

struct NodeAction {
  Point action;
  double cost = 0.0;
  Jump jumps[kMaxDim];
  int count = 0;
  double out = 0.0;
};

inline void assign(const GridSpec& g, std::size_t i, const MultiIndex& idx, const Candidate& c, NodeAction& a,
                   VectorField& vel) {
  a.action = c.action;
  a.cost = c.cost;
  a.count = upwind_jumps(g, i, idx, c.velocity, a.jumps);
  a.out = 0.0;
  for (int j = 0; j < a.count; ++j) a.out += a.jumps[j].rate;
  vel.set(i, c.velocity);
}

// Node value implied by one action with neighbours fixed. Infinite when the
// action stalls on positive cost.
inline double local_root(const Candidate& c, const GridSpec& g, std::size_t i, const MultiIndex& idx,
                         const std::vector<double>& V, double kappa, bool& stalled) {
  Jump js[kMaxDim];
  const int n = upwind_jumps(g, i, idx, c.velocity, js);
  double num = c.cost, den = kappa;
  for (int j = 0; j < n; ++j) {
    num += js[j].rate * V[js[j].to];
    den += js[j].rate;
  }
  stalled = den <= 0;
  if (stalled) return c.cost > 0 ? kInf : (c.cost < 0 ? -kInf : 0.0);
  return num / den;
}

inline ValueField solve_chain(const ChainProblem& P) {
  const GridSpec& g = P.grid;
  const std::size_t N = g.size();
  const double sign = P.maximize ? -1.0 : 1.0;
  const auto& opt = P.options;

  ValueField out;
  out.goal = P.terminal;
  out.V = P.warm_start ? *P.warm_start : ScalarField(g, P.initial_value);
  out.policy = VectorField(g, P.action_dim);
  out.velocity = VectorField(g, g.dim());
  std::vector<double>& V = out.V.values;
  for (std::size_t i = 0; i < N; ++i)
    if (P.terminal[i]) V[i] = P.terminal_value[i];

  std::vector<NodeAction> act(N);
  std::vector<MultiIndex> idx(N);
  std::vector<Point> xs(N);
  for (std::size_t i = 0; i < N; ++i) idx[i] = g.multi(i), xs[i] = g.point(i);

  // Warm-up: Jacobi value iteration with the exact local solve per candidate.
  {
    std::vector<double> next(V);
    std::vector<Candidate> cand;
    const double tol = std::max(P.residual_tol, 1e-10);
    // Min-max candidates can leave the update in a small limit cycle; hand
    // over to policy iteration once the change stops shrinking.
    double floor = kInf;
    int stalled_sweeps = 0;
    for (int sweep = 0; sweep < opt.warmup_sweeps; ++sweep) {
      double change = 0.0;
      for (std::size_t i = 0; i < N; ++i) {
        if (P.terminal[i]) continue;
        cand.clear();
        P.candidates(i, xs[i], upwind_differences(out.V, idx[i]), cand);
        double best = V[i];
        bool have = false;
        for (const auto& c : cand) {
          bool stalled;
          const double r = local_root(c, g, i, idx[i], V, P.kappa, stalled);
          if (stalled && c.cost == 0.0 && !P.maximize) continue;
          if (!have || sign * r < sign * best) best = r, have = true;
        }
        if (!have || !std::isfinite(best)) {
          next[i] = V[i];
          continue;
        }
        next[i] = (1 - opt.damping) * V[i] + opt.damping * best;
        const double scale = std::max(1.0, std::abs(next[i]));
        change = std::max(change, std::abs(next[i] - V[i]) / scale);
      }
      V.swap(next);
      if (change <= tol) break;
      if (change < 0.99 * floor) {
        floor = change;
        stalled_sweeps = 0;
      } else if (++stalled_sweeps >= opt.warmup_patience) {
        break;
      }
    }
  }

  std::vector<Candidate> cand;
  std::vector<double> next(N);
  std::vector<char> has_action(N, 0);
  for (int outer = 1; outer <= opt.max_outer; ++outer) {
    // Policy extraction: exact discrete objective, zero action first, keep
    // the previous action unless strictly beaten.
    double change = 0.0;
    for (std::size_t i = 0; i < N; ++i) {
      if (P.terminal[i]) continue;
      cand.clear();
      const UpwindDifferences d = upwind_differences(out.V, idx[i]);
      P.candidates(i, xs[i], d, cand);
      std::size_t bi = 0;
      double best = sign * upwind_objective(cand[0], d);
      for (std::size_t c = 1; c < cand.size(); ++c) {
        const double o = sign * upwind_objective(cand[c], d);
        if (o < best - 1e-12 * (1.0 + std::abs(best))) best = o, bi = c;
      }
      if (has_action[i]) {
        const Candidate prev{act[i].action, out.velocity.get(i), act[i].cost};
        const double po = sign * upwind_objective(prev, d);
        if (po <= best + 1e-10 * (1.0 + std::abs(best))) continue;
        change = std::max(change, (cand[bi].action - act[i].action).cwiseAbs().maxCoeff());
      } else {
        change = kInf;
      }
      assign(g, i, idx[i], cand[bi], act[i], out.velocity);
      out.policy.set(i, cand[bi].action);
      has_action[i] = 1;
    }
    if (outer == 1 && P.action_dim == 0) change = 0.0;

    // Policy evaluation by damped Jacobi; stalled nodes keep their value.
    double residual = 0.0;
    int sweeps = 0;
    for (; sweeps < opt.max_sweeps; ++sweeps) {
      parallel_for(N, [&](std::size_t i) {
        const NodeAction& a = act[i];
        const double den = a.out + P.kappa;
        if (P.terminal[i] || den <= 0) {
          next[i] = (P.terminal[i] || a.cost != 0.0) ? V[i] : 0.0;
          return;
        }
        double num = a.cost;
        for (int j = 0; j < a.count; ++j) num += a.jumps[j].rate * V[a.jumps[j].to];
        next[i] = (1 - opt.damping) * V[i] + opt.damping * num / den;
      });
      V.swap(next);
      residual = 0.0;
      for (std::size_t i = 0; i < N; ++i) {
        const NodeAction& a = act[i];
        if (P.terminal[i] || a.out + P.kappa <= 0) continue;
        double r = a.cost - P.kappa * V[i];
        for (int j = 0; j < a.count; ++j) r += a.jumps[j].rate * (V[a.jumps[j].to] - V[i]);
        residual = std::max(residual, std::abs(r));
      }
      if (!std::isfinite(residual)) throw NoConvergence("hjb: policy evaluation diverged");
      if (residual <= P.residual_tol) break;
    }
    out.sweeps += sweeps;
    out.iterations = outer;
    out.residual = residual;
    out.policy_change = change;
    if (change <= P.policy_tol && residual <= P.residual_tol) {
      out.converged = true;
      break;
    }
  }
  if (!out.converged)
    throw NoConvergence("hjb: no convergence after " + std::to_string(out.iterations) +
                        " policy iterations (change " + format_real(out.policy_change) + ", residual " +
                        format_real(out.residual) + ")");

  // Goal nodes carry the mean action of their non-goal neighbours so that
  // interpolated feedback keeps pointing into X_g.
  for (std::size_t i = 0; i < N; ++i) {
    if (!P.terminal[i] || P.action_dim == 0) continue;
    Point acc = Point::Zero(P.action_dim);
    int count = 0;
    for (int k = 0; k < g.dim(); ++k)
      for (int s : {-1, 1}) {
        MultiIndex m = idx[i];
        m[k] += s;
        if (!g.contains(m)) continue;
        const std::size_t j = g.flat(m);
        if (P.terminal[j]) continue;
        acc += out.policy.get(j);
        ++count;
      }
    if (count) out.policy.set(i, Point(acc / count));
  }

  if (P.require_reachability && P.kappa == 0.0) {
    std::vector<std::vector<std::size_t>> incoming(N);
    for (std::size_t i = 0; i < N; ++i)
      for (int j = 0; j < act[i].count; ++j) incoming[act[i].jumps[j].to].push_back(i);
    std::vector<char> ok(P.terminal.begin(), P.terminal.end());
    std::vector<std::size_t> stack;
    for (std::size_t i = 0; i < N; ++i)
      if (ok[i]) stack.push_back(i);
    while (!stack.empty()) {
      const std::size_t j = stack.back();
      stack.pop_back();
      for (std::size_t k : incoming[j])
        if (!ok[k]) ok[k] = 1, stack.push_back(k);
    }
    for (std::size_t i = 0; i < N; ++i)
      if (!ok[i]) {
        std::string where;
        for (int k = 0; k < g.dim(); ++k) where += (k ? "," : "") + format_real(xs[i][k]);
        throw UnreachableGoal("hjb: grid point (" + where + ") cannot reach the goal");
      }
  }
  return out;
}

// Candidate actions over a ball for F = F0 + u (identity input matrix):
// closed forms on every face F_Z = 0 of the sign partition, plus the
// action cancelling F0 when admissible.
inline void identity_ball_candidates(const Point& F0, double r, const UpwindDifferences& d, bool maximize,
                                     std::vector<Point>& out) {
  const int n = static_cast<int>(F0.size());
  for (int zmask = 0; zmask < (1 << n); ++zmask) {
    Point u = Point::Zero(n);
    double used = 0.0;
    for (int k = 0; k < n; ++k)
      if (zmask & (1 << k)) u[k] = -F0[k], used += F0[k] * F0[k];
    if (used > r * r * (1 + 1e-12)) continue;
    const double rr = std::sqrt(std::max(0.0, r * r - used));
    if (zmask == (1 << n) - 1) {
      out.push_back(u);
      continue;
    }
    for (int s = 0; s < (1 << n); ++s) {
      if (s & zmask) continue;
      Point p = Point::Zero(n);
      for (int k = 0; k < n; ++k) {
        if (zmask & (1 << k)) continue;
        p[k] = (s & (1 << k)) ? d.forward[k] : d.backward[k];
      }
      const double np = p.norm();
      if (np == 0.0 || rr == 0.0) continue;
      Point w = u;
      for (int k = 0; k < n; ++k)
        if (!(zmask & (1 << k))) w[k] += (maximize ? rr : -rr) * p[k] / np;
      out.push_back(w);
    }
  }
}

// Orthant closed forms for a general input matrix B over a ball.
inline void matrix_ball_candidates(const Eigen::MatrixXd& B, double r, const UpwindDifferences& d, bool maximize,
                                   std::vector<Point>& out) {
  const int n = static_cast<int>(B.rows());
  for (int s = 0; s < (1 << n); ++s) {
    Eigen::VectorXd p(n);
    for (int k = 0; k < n; ++k) p[k] = (s & (1 << k)) ? d.forward[k] : d.backward[k];
    const Eigen::VectorXd gvec = B.transpose() * p;
    const double ng = gvec.norm();
    if (ng == 0.0) continue;
    out.push_back(Point((maximize ? r : -r) * gvec / ng));
  }
}

inline bool is_identity(const Eigen::MatrixXd& B) {
  return B.rows() == B.cols() && (B - Eigen::MatrixXd::Identity(B.rows(), B.cols())).cwiseAbs().maxCoeff() == 0.0;
}

}  // namespace detail

namespace detail {

// Candidate generator for the control problem at frozen disturbance.
// Disturbance maximizing the discrete Hamiltonian for a fixed control.
inline Point worst_local_disturbance(const ControlledSystem& sys, const Point& x, const Point& u,
                                     const UpwindDifferences& d, int ring) {
  const InputSet& D = sys.disturbances;
  Point best = sys.zero_disturbance();
  if (D.trivial()) return best;
  std::vector<Point> ds;
  if (sys.disturbance_affine() && D.kind == InputSet::Kind::ball) {
    const Eigen::MatrixXd E = sys.disturbance_matrix(x);
    if (is_identity(E)) {
      identity_ball_candidates(sys.drift(x, u, sys.zero_disturbance()), D.radius, d, true, ds);
    } else {
      matrix_ball_candidates(E, D.radius, d, true, ds);
      if (sys.p == 2)
        for (int k = 0; k < ring; ++k) {
          Point w(2);
          w << D.radius * std::cos(2 * M_PI * k / ring), D.radius * std::sin(2 * M_PI * k / ring);
          ds.push_back(w);
        }
    }
  } else {
    ds = D.discretize(sys.input_points_per_axis);
  }
  Candidate c{u, sys.drift(x, u, best), 0.0};
  double top = upwind_objective(c, d);
  for (const auto& w : ds) {
    c.velocity = sys.drift(x, u, w);
    const double o = upwind_objective(c, d);
    if (o > top + 1e-12 * (1.0 + std::abs(top))) top = o, best = w;
  }
  return best;
}

// argmax of the discrete Hamiltonian over v = base + w, ‖w‖ ≤ r, by the same
// face enumeration as identity_ball_candidates; no allocation.
inline Point worst_identity_ball(const Point& base, double r, const UpwindDifferences& d) {
  const int n = static_cast<int>(base.size());
  Candidate c{Point(), base, 0.0};
  Point best = Point::Zero(n);
  double top = upwind_objective(c, d);
  auto consider = [&](const Point& w) {
    c.velocity = base + w;
    const double o = upwind_objective(c, d);
    if (o > top + 1e-12 * (1.0 + std::abs(top))) top = o, best = w;
  };
  for (int zmask = 0; zmask < (1 << n); ++zmask) {
    Point w = Point::Zero(n);
    double used = 0.0;
    for (int k = 0; k < n; ++k)
      if (zmask & (1 << k)) w[k] = -base[k], used += base[k] * base[k];
    if (used > r * r * (1 + 1e-12)) continue;
    const double rr = std::sqrt(std::max(0.0, r * r - used));
    if (zmask == (1 << n) - 1) {
      consider(w);
      continue;
    }
    for (int sg = 0; sg < (1 << n); ++sg) {
      if (sg & zmask) continue;
      Point q = Point::Zero(n);
      for (int k = 0; k < n; ++k)
        if (!(zmask & (1 << k))) q[k] = (sg & (1 << k)) ? d.forward[k] : d.backward[k];
      const double nq = q.norm();
      if (nq == 0.0 || rr == 0.0) continue;
      consider(Point(w + rr * q / nq));
    }
  }
  return best;
}

// Candidate generator for the control problem. The disturbance is either
// frozen at the given field or, with worst_case set, chosen per candidate
// to maximize the discrete Hamiltonian.
inline CandidateFn control_candidates(const ControlledSystem& sys, const GridSpec& g,
                                      const std::vector<double>* sigma, const std::vector<char>& danger,
                                      const VectorField* dist, int ring, bool worst_case = false) {
  const InputSet& U = sys.inputs;
  const bool closed_form = sys.input_affine() && U.kind == InputSet::Kind::ball && !sys.cost_depends_on_input;
  std::vector<Point> fixed;
  if (!closed_form) fixed = U.discretize(sys.input_points_per_axis);
  return [&sys, sigma, &danger, dist, closed_form, fixed, ring, worst_case](std::size_t i, const Point& x,
                                                                             const UpwindDifferences& d,
                                                                             std::vector<Candidate>& out) {
    const Point dv = dist ? dist->get(i) : sys.zero_disturbance();
    const double extra = (sigma && danger[i]) ? (*sigma)[i] : 0.0;
    // F = F(x,0,0) + B u + d when both input matrices are the identity.
    bool fast = false;
    Point F00;
    if (worst_case && closed_form && sys.disturbance_affine() && sys.disturbances.kind == InputSet::Kind::ball &&
        !sys.disturbances.trivial()) {
      fast = is_identity(sys.input_matrix(x)) && is_identity(sys.disturbance_matrix(x));
      if (fast) F00 = sys.drift(x, sys.zero_input(), sys.zero_disturbance());
    }
    auto push = [&](const Point& u) {
      if (fast) {
        const Point base = F00 + u;
        out.push_back({u, Point(base + worst_identity_ball(base, sys.disturbances.radius, d)), sys.cost(x, u) + extra});
        return;
      }
      const Point w = worst_case ? worst_local_disturbance(sys, x, u, d, ring) : dv;
      out.push_back({u, sys.drift(x, u, w), sys.cost(x, u) + extra});
    };
    push(sys.zero_input());
    if (!closed_form) {
      for (const auto& u : fixed) push(u);
      return;
    }
    const double r = sys.inputs.radius;
    const Eigen::MatrixXd B = sys.input_matrix(x);
    std::vector<Point> us;
    if (detail::is_identity(B)) {
      detail::identity_ball_candidates(sys.drift(x, sys.zero_input(), dv), r, d, false, us);
      if (worst_case && sys.m == 2)
        for (int k = 0; k < ring; ++k) {
          Point u(2);
          u << r * std::cos(2 * M_PI * k / ring), r * std::sin(2 * M_PI * k / ring);
          us.push_back(u);
        }
    } else {
      detail::matrix_ball_candidates(B, r, d, false, us);
      if (((dist && dv.size() && dv.norm() > 0) || worst_case) && sys.m == 2)
        for (int k = 0; k < ring; ++k) {
          Point u(2);
          u << r * std::cos(2 * M_PI * k / ring), r * std::sin(2 * M_PI * k / ring);
          us.push_back(u);
        }
    }
    for (const auto& u : us) push(u);
  };
}

}  // namespace detail

inline std::vector<char> goal_nodes(const GridSpec& g, const ControlledSystem& sys) {
  return region_mask(g, sys.goal, true);
}

inline ValueField solve_stationary_hjb(const HjbProblem& prob) {
  if (!prob.system) throw ConfigError("hjb: problem has no system");
  const ControlledSystem& sys = *prob.system;
  const GridSpec& g = prob.grid;
  const auto danger = region_mask(g, sys.danger);
  if (prob.sigma) {
    if (!(prob.sigma->grid == g)) throw ConfigError("hjb: sigma lives on a different grid");
    for (double s : prob.sigma->values)
      if (s < 0) throw ConfigError("hjb: sigma must be non-negative");
  }

  detail::ChainProblem P;
  P.grid = g;
  P.kappa = prob.kappa;
  P.terminal = prob.kappa > 0 && sys.goal.is_empty() ? std::vector<char>(g.size(), 0) : goal_nodes(g, sys);
  P.terminal_value.assign(g.size(), 0.0);
  double cmax = 0.0;
  for (std::size_t i = 0; i < g.size(); ++i) {
    const Point x = g.point(i);
    if (P.terminal[i]) P.terminal_value[i] = sys.terminal(x);
    cmax = std::max(cmax, std::abs(sys.cost(x, sys.zero_input())));
  }
  const double smax = prob.sigma ? prob.sigma->max_abs() : 0.0;
  P.action_dim = sys.m;
  P.policy_tol = prob.options.policy_tol * std::max(sys.inputs.size_radius(), 1e-300);
  P.residual_tol = prob.options.residual_tol * std::max(1.0, cmax);
  P.initial_value = prob.kappa > 0 ? 0.0 : 1e6 * std::max(1.0, cmax + smax);
  P.options = prob.options;
  P.warm_start = prob.warm_start ? &*prob.warm_start : nullptr;
  P.candidates = detail::control_candidates(sys, g, prob.sigma ? &prob.sigma->values : nullptr, danger,
                                            prob.disturbance ? &*prob.disturbance : nullptr,
                                            prob.options.ring_samples, prob.worst_case_disturbance);
  return detail::solve_chain(P);
}

// Per-node argmin of the discrete Hamiltonian for a given value field.
inline VectorField extract_policy(const ScalarField& V, const ControlledSystem& sys,
                                  const VectorField* disturbance = nullptr, const ScalarField* sigma = nullptr,
                                  int ring_samples = 64) {
  const GridSpec& g = V.grid;
  const auto danger = region_mask(g, sys.danger);
  auto gen = detail::control_candidates(sys, g, sigma ? &sigma->values : nullptr, danger, disturbance, ring_samples);
  VectorField pol(g, sys.m);
  std::vector<detail::Candidate> cand;
  for (std::size_t i = 0; i < g.size(); ++i) {
    const MultiIndex idx = g.multi(i);
    const UpwindDifferences d = upwind_differences(V, idx);
    cand.clear();
    gen(i, g.point(i), d, cand);
    std::size_t bi = 0;
    double best = detail::upwind_objective(cand[0], d);
    for (std::size_t c = 1; c < cand.size(); ++c) {
      const double o = detail::upwind_objective(cand[c], d);
      if (o < best - 1e-12 * (1.0 + std::abs(best))) best = o, bi = c;
    }
    pol.set(i, cand[bi].action);
  }
  return pol;
}

struct WorstDisturbance {
  VectorField disturbance;  // d*(x) at grid nodes
  ValueField value;         // V_d: worst-case occupation time of X_d
};

// max over d of the time spent in X_d before reaching X_g, with the control
// frozen at the given gridded policy.
inline WorstDisturbance solve_worst_disturbance(const ControlledSystem& sys, const VectorField& control,
                                                const HjbOptions& options = {}) {
  const GridSpec& g = control.grid;
  const auto danger = region_mask(g, sys.danger);
  const InputSet& D = sys.disturbances;

  detail::ChainProblem P;
  P.grid = g;
  P.maximize = true;
  P.terminal = goal_nodes(g, sys);
  P.terminal_value.assign(g.size(), 0.0);
  P.action_dim = sys.p;
  P.policy_tol = options.policy_tol * std::max(D.size_radius(), 1e-300);
  P.residual_tol = options.residual_tol;
  P.initial_value = 0.0;
  P.require_reachability = false;
  P.options = options;

  const bool closed_form = sys.disturbance_affine() && D.kind == InputSet::Kind::ball;
  std::vector<Point> fixed;
  if (!closed_form) fixed = D.discretize(sys.input_points_per_axis);
  const int ring = options.ring_samples;
  P.candidates = [&sys, &control, &danger, closed_form, fixed, ring, &D](std::size_t i, const Point& x,
                                                                        const UpwindDifferences& d,
                                                                        std::vector<detail::Candidate>& out) {
    const Point u = control.get(i);
    const double c = danger[i] ? 1.0 : 0.0;
    auto push = [&](const Point& dv) { out.push_back({dv, sys.drift(x, u, dv), c}); };
    push(sys.zero_disturbance());
    if (D.trivial()) return;
    if (!closed_form) {
      for (const auto& dv : fixed) push(dv);
      return;
    }
    const Eigen::MatrixXd E = sys.disturbance_matrix(x);
    std::vector<Point> ds;
    if (detail::is_identity(E)) {
      detail::identity_ball_candidates(sys.drift(x, u, sys.zero_disturbance()), D.radius, d, true, ds);
    } else {
      detail::matrix_ball_candidates(E, D.radius, d, true, ds);
      if (sys.p == 2)
        for (int k = 0; k < ring; ++k) {
          Point w(2);
          w << D.radius * std::cos(2 * M_PI * k / ring), D.radius * std::sin(2 * M_PI * k / ring);
          ds.push_back(w);
        }
    }
    for (const auto& dv : ds) push(dv);
  };
  WorstDisturbance w;
  w.value = detail::solve_chain(P);
  w.disturbance = w.value.policy;
  return w;
}

// Gridded policy as a state feedback (multilinear interpolation).
inline Policy grid_policy(const VectorField& field) {
  return [field](const Point& x) { return interpolate(field, x); };
}

}  // namespace ddual
