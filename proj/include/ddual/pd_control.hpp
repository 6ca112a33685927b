#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <optional>
#include <vector>

#include "ddual/density.hpp"
#include "ddual/hjb.hpp"

namespace ddual {

// Disturbance seen by the robust primal step: the pointwise worst case
// (min–max Hamiltonian) or the previous iterate's d* held fixed.
enum class RobustPrimal { worst_case, frozen };

struct ConstrainedControlProblem {
  ControlledSystem system;
  GridSpec grid;
  SupplyFunction supply;
  double rho_max = 0.0;
  double slack = 1e-6;            // feasibility slack, relative to max ρ_s
  std::optional<double> alpha;    // dual step; default C scale / initial max ρ_s on X_d
  double epsilon = 1e-6;          // complementary-slackness tolerance
  int max_iterations = 100;
  bool grow_step = true;          // double α while the violation stalls
  RobustPrimal robust_primal = RobustPrimal::worst_case;
  HjbOptions hjb;
  FdmOptions fdm;
};

struct PrimalDualReport {
  VectorField policy;
  DensityField density;
  ValueField value;
  ScalarField sigma;
  std::optional<WorstDisturbance> disturbance;
  int iterations = 0;
  bool converged = false;
  double alpha = 0.0;
  double J_p = 0.0;  // ⟨φ+, V⟩
  double J_d = 0.0;  // ⟨ρ_s, C_u + σ𝟙_{X_d}⟩
  std::vector<double> max_violation;
  std::vector<double> slackness;
  std::vector<double> objective;
};

using IterationHook = std::function<void(int iteration, const PrimalDualReport& state)>;

namespace detail {

struct ConstraintStats {
  double violation = 0.0;   // max(0, max_{X_d}(ρ_s − ρ^max))
  double peak = 0.0;        // max_{X_d} ρ_s
  double slackness = 0.0;   // ⟨σ, max(0, ρ_s − ρ^max)𝟙_{X_d}⟩
};

inline ConstraintStats constraint_stats(const ScalarField& rho, const ScalarField& sigma,
                                        const std::vector<char>& danger, double rho_max) {
  ConstraintStats s;
  const double vol = rho.grid.cell_volume();
  for (std::size_t i = 0; i < rho.size(); ++i) {
    if (!danger[i]) continue;
    const double excess = rho[i] - rho_max;
    s.peak = std::max(s.peak, rho[i]);
    s.violation = std::max(s.violation, excess);
    s.slackness += sigma[i] * std::max(0.0, excess) * vol;
  }
  return s;
}

inline double inner(const ScalarField& a, const ScalarField& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s * a.grid.cell_volume();
}

inline void fill_objectives(PrimalDualReport& r, const ControlledSystem& sys, const ScalarField& phi,
                            const std::vector<char>& danger) {
  const GridSpec& g = r.value.V.grid;
  r.J_p = inner(phi, r.value.V);
  double jd = 0.0;
  for (std::size_t i = 0; i < g.size(); ++i) {
    if (r.density.rho[i] == 0.0) continue;
    const double c = sys.cost(g.point(i), r.policy.get(i)) + (danger[i] ? r.sigma[i] : 0.0);
    jd += r.density.rho[i] * c;
  }
  r.J_d = jd * g.cell_volume();
}

inline bool oscillates(const std::vector<double>& j) {
  const std::size_t n = j.size();
  if (n < 3) return false;
  return (j[n - 1] - j[n - 2]) * (j[n - 2] - j[n - 3]) < 0;
}

// Halve α when J_p oscillates; double it when the violation fails to halve.
inline void adapt_step(PrimalDualReport& r, bool grow) {
  if (oscillates(r.objective)) {
    r.alpha *= 0.5;
    return;
  }
  const auto& v = r.max_violation;
  const std::size_t n = v.size();
  if (grow && n >= 2 && v[n - 1] > 0 && v[n - 1] > 0.5 * v[n - 2]) r.alpha *= 2.0;
}

inline double cost_scale(const ControlledSystem& sys, const GridSpec& g) {
  double c = 0.0;
  for (std::size_t i = 0; i < g.size(); ++i) c = std::max(c, std::abs(sys.cost(g.point(i), sys.zero_input())));
  return c > 0 ? c : 1.0;
}

}  // namespace detail

// Nominal loop: perturbed HJB, stationary density under u*, projected ascent
// σ ← max(0, σ + α(ρ_s − ρ^max)𝟙_{X_d}).
inline PrimalDualReport run_primal_dual(const ConstrainedControlProblem& prob, const IterationHook& hook = {}) {
  const GridSpec& g = prob.grid;
  const ControlledSystem& sys = prob.system;
  const auto danger = region_mask(g, sys.danger);
  const ScalarField phi = prob.supply.on_grid(g);
  const double cscale = detail::cost_scale(sys, g);

  PrimalDualReport r;
  r.sigma = ScalarField(g);
  r.alpha = prob.alpha.value_or(0.0);
  std::optional<ScalarField> warm;
  for (int j = 1; j <= prob.max_iterations; ++j) {
    HjbProblem hp;
    hp.system = &sys;
    hp.grid = g;
    hp.sigma = r.sigma;
    hp.options = prob.hjb;
    hp.warm_start = warm;
    r.value = solve_stationary_hjb(hp);
    r.policy = r.value.policy;
    FdmOptions fo = prob.fdm;
    fo.policy_id = "u*[" + std::to_string(j) + "]";
    r.density = stationary_density_fdm(r.value.velocity, prob.supply, r.value.goal, fo);
    detail::fill_objectives(r, sys, phi, danger);

    auto st = detail::constraint_stats(r.density.rho, r.sigma, danger, prob.rho_max);
    if (j == 1 && !prob.alpha) r.alpha = st.peak > 0 ? cscale / st.peak : cscale;
    r.objective.push_back(r.J_p);
    r.max_violation.push_back(st.violation);
    detail::adapt_step(r, prob.grow_step);

    for (std::size_t i = 0; i < g.size(); ++i)
      if (danger[i]) r.sigma[i] = std::max(0.0, r.sigma[i] + r.alpha * (r.density.rho[i] - prob.rho_max));
    st = detail::constraint_stats(r.density.rho, r.sigma, danger, prob.rho_max);
    r.slackness.push_back(st.slackness);
    r.iterations = j;
    if (hook) hook(j, r);

    const double bound = prob.rho_max + prob.slack * r.density.rho.max();
    if (st.slackness <= prob.epsilon && st.peak <= bound) {
      r.converged = true;
      break;
    }
    warm = r.value.V;
  }
  return r;
}

// Robust loop: HJB against the disturbance, then d*[u*], then ρ_s under
// (u*, d*), then σ ← max(0, σ + α ρ_s 𝟙_{X_d}).
inline PrimalDualReport run_robust_primal_dual(const ConstrainedControlProblem& prob, const IterationHook& hook = {}) {
  const GridSpec& g = prob.grid;
  const ControlledSystem& sys = prob.system;
  if (sys.p == 0) throw ConfigError("robust primal-dual: system has no disturbance input");
  const auto danger = region_mask(g, sys.danger);
  const ScalarField phi = prob.supply.on_grid(g);
  const double cscale = detail::cost_scale(sys, g);

  PrimalDualReport r;
  r.sigma = ScalarField(g);
  r.alpha = prob.alpha.value_or(0.0);
  VectorField d(g, sys.p);
  std::optional<ScalarField> warm;
  for (int j = 1; j <= prob.max_iterations; ++j) {
    HjbProblem hp;
    hp.system = &sys;
    hp.grid = g;
    hp.sigma = r.sigma;
    if (prob.robust_primal == RobustPrimal::frozen) hp.disturbance = d;
    hp.worst_case_disturbance = prob.robust_primal == RobustPrimal::worst_case;
    hp.options = prob.hjb;
    hp.warm_start = warm;
    r.value = solve_stationary_hjb(hp);
    r.policy = r.value.policy;
    r.disturbance = solve_worst_disturbance(sys, r.policy, prob.hjb);
    FdmOptions fo = prob.fdm;
    fo.policy_id = "(u*,d*)[" + std::to_string(j) + "]";
    r.density = stationary_density_fdm(r.disturbance->value.velocity, prob.supply, r.value.goal, fo);
    detail::fill_objectives(r, sys, phi, danger);

    auto st = detail::constraint_stats(r.density.rho, r.sigma, danger, prob.rho_max);
    if (j == 1 && !prob.alpha) r.alpha = st.peak > 0 ? cscale / st.peak : cscale;
    r.objective.push_back(r.J_p);
    r.max_violation.push_back(st.violation);
    detail::adapt_step(r, prob.grow_step);

    for (std::size_t i = 0; i < g.size(); ++i)
      if (danger[i]) r.sigma[i] = std::max(0.0, r.sigma[i] + r.alpha * r.density.rho[i]);
    st = detail::constraint_stats(r.density.rho, r.sigma, danger, prob.rho_max);
    r.slackness.push_back(st.slackness);
    r.iterations = j;
    if (hook) hook(j, r);

    const double bound = prob.rho_max + prob.slack * r.density.rho.max();
    if (st.slackness <= prob.epsilon && st.peak <= bound) {
      r.converged = true;
      break;
    }
    d = r.disturbance->disturbance;
    warm = r.value.V;
  }
  return r;
}

}  // namespace ddual
