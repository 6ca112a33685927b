// Acceptance run: one PASS/FAIL line per criterion.
//   acceptance            all criteria
//   acceptance 1 4 9      a subset

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "ddual/scenarios.hpp"

using namespace ddual;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, double a, double b = 0, double c = 0, double d = 0) {
  char buf[256];
  std::snprintf(buf, sizeof buf, f, a, b, c, d);
  return buf;
}

Point pt(std::initializer_list<double> xs) {
  Point p(static_cast<int>(xs.size()));
  int k = 0;
  for (double x : xs) p[k++] = x;
  return p;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// Densities produced by converged runs, collected for the mass-balance check.
struct MassRecord {
  std::string name;
  double imbalance;
  double supply;
};
std::vector<MassRecord> g_mass;

void record_mass(const std::string& name, const SupplyFunction& supply, const DensityField& d) {
  g_mass.push_back({name, std::abs(mass_balance(supply, d)), supply.total_rate(d.rho.grid)});
}

// ---- 1 -------------------------------------------------------------------------

Outcome mdp_duality() {
  std::mt19937_64 rng(101);
  std::uniform_int_distribution<int> n(2, 10), m(1, 4);
  std::uniform_real_distribution<double> U(0.0, 1.0);
  double worst = 0.0;
  for (int t = 0; t < 50; ++t) {
    const MdpModel model = random_model(rng, n(rng), m(rng), t % 2 ? 0.9 : 0.5);
    StochasticPolicy pi = StochasticPolicy::Zero(model.N, model.M);
    for (int s = 0; s < model.N; ++s) {
      for (int a = 0; a < model.M; ++a) pi(s, a) = model.is_available(s, a) ? U(rng) : 0.0;
      pi.row(s) /= pi.row(s).sum();
    }
    Eigen::VectorXd sigma(model.N);
    for (int s = 0; s < model.N; ++s) sigma[s] = t % 3 ? U(rng) : 0.0;
    const DualityCheck d = duality_check(model, pi, sigma);
    worst = std::max(worst, std::abs(d.gap()) / std::max(1.0, std::abs(d.J_p)));
  }
  return {worst <= 1e-8, fmt("max |J_p - J_d| / max(1,|J_p|) = %.2e over 50 models", worst)};
}

// ---- 2 -------------------------------------------------------------------------

Outcome constrained_vs_oracle() {
  std::mt19937_64 rng(202);
  std::uniform_int_distribution<int> n(2, 5), m(2, 3);
  int done = 0, skipped = 0;
  double worst_rel = 0.0, worst_viol = 0.0;
  while (done < 25) {
    const MdpModel model = random_model(rng, n(rng), m(rng), 0.9);
    // Cap the most occupied state at 80% of its unconstrained density.
    const auto vi = value_iteration(model);
    const Eigen::VectorXd free = stationary_density(model, vi.policy);
    Eigen::Index top;
    free.maxCoeff(&top);
    Eigen::VectorXd cap = Eigen::VectorXd::Constant(model.N, kNoCap);
    cap[top] = 0.8 * free[top];
    OracleResult o;
    try {
      o = oracle_constrained_mdp(model, cap);
    } catch (const Infeasible&) {
      ++skipped;
      continue;
    }
    ConstrainedMdpProblem p;
    p.models = {model};
    p.rho_max = cap;
    const MultiMdpReport r = run_constrained_mdp(p);
    worst_rel = std::max(worst_rel, std::abs(r.objective - o.objective) / std::max(1e-12, std::abs(o.objective)));
    worst_viol = std::max(worst_viol, r.max_violation);
    ++done;
  }
  return {worst_rel <= 0.01 && worst_viol <= 1e-6,
          fmt("max relative objective error %.2e, max violation %.2e (25 instances, %.0f infeasible skipped)",
              worst_rel, worst_viol, skipped)};
}

// ---- 3 -------------------------------------------------------------------------

Outcome traffic() {
  const TrafficConfig cfg = traffic_config(read_json_file(DDUAL_SCENARIO_DIR "/traffic7.json"));
  const TrafficScenario sc = traffic7(cfg);
  const MultiMdpReport r = run_multi_mdp(sc.problem);
  const int hub = cfg.cap_region - 1;
  const double cap = sc.problem.rho_max[hub];
  const double cost = -r.objective;

  bool deterministic = true;
  for (std::size_t k = 0; k < sc.unconstrained.size(); ++k)
    for (int s = 0; s < cfg.regions; ++s)
      if (s != static_cast<int>(k) && sc.unconstrained[k].row(s).maxCoeff() < 1.0 - 1e-9) deterministic = false;

  // Stochastic routing among rows that can send traffic into the capped region.
  bool stochastic = false;
  for (std::size_t k = 0; k < r.policies.size(); ++k)
    for (int s = 0; s < cfg.regions; ++s)
      if (s != static_cast<int>(k) && sc.problem.models[k].is_available(s, hub) &&
          r.policies[k].row(s).maxCoeff() < 1.0 - 1e-3)
        stochastic = true;

  const double rel = std::abs(r.cumulative[hub] - cap) / cap;
  const bool ok = r.converged && cost > sc.unconstrained_cost && rel <= 0.02 && deterministic && stochastic;
  return {ok, fmt("cost %.4f -> %.4f, region density %.4f vs cap %.4f", sc.unconstrained_cost, cost,
                  r.cumulative[hub], cap) +
                  (deterministic ? ", unconstrained deterministic" : ", unconstrained NOT deterministic") +
                  (stochastic ? ", constrained routing stochastic" : ", constrained routing deterministic")};
}

// ---- 4 -------------------------------------------------------------------------

Outcome min_time_1d() {
  ControlledSystem sys = single_integrator(1, InputSet::ball(1, 1.0));
  sys.goal = Region::box(pt({-0.1}), pt({0.1}));
  HjbProblem p;
  p.system = &sys;
  p.grid = GridSpec({-2.0}, {2.0}, {200});
  const ValueField v = solve_stationary_hjb(p);
  double err = 0.0;
  for (std::size_t i = 0; i < p.grid.size(); ++i) {
    if (v.goal[i]) continue;
    err = std::max(err, std::abs(v.V[i] - (std::abs(p.grid.point(i)[0]) - 0.1)));
  }
  return {v.converged && err <= 0.04, fmt("max |V - (|x| - 0.1)| = %.2e (bound 0.04)", err)};
}

// ---- 5, 6 --------------------------------------------------------------------------

double danger_peak(const ScalarField& rho, const Region& danger) {
  const auto mask = region_mask(rho.grid, danger);
  double peak = 0.0;
  for (std::size_t i = 0; i < mask.size(); ++i)
    if (mask[i]) peak = std::max(peak, rho[i]);
  return peak;
}

Outcome robot_nominal() {
  const RobotNavConfig cfg = robot_nav_config(read_json_file(DDUAL_SCENARIO_DIR "/robot_nav.json"));
  const ConstrainedControlProblem P = robot_nav(cfg);
  const PrimalDualReport r = run_primal_dual(P);
  const double peak = danger_peak(r.density.rho, P.system.danger);
  const double top = r.density.rho.max();
  const double slack = r.slackness.empty() ? kInf : r.slackness.back();
  if (r.converged) record_mass("robot_nav", P.supply, r.density);
  const bool ok = r.converged && r.iterations <= 20 && peak <= 1e-6 * top && slack <= P.epsilon;
  return {ok, fmt("%.0f iterations, max rho on X_d %.2e (bound %.2e), slackness %.2e", r.iterations, peak, 1e-6 * top,
                  slack)};
}

Outcome robot_robust() {
  const RobotNavConfig cfg = robot_nav_config(read_json_file(DDUAL_SCENARIO_DIR "/robot_nav_disturbed.json"));
  const ConstrainedControlProblem P = robot_nav_disturbed(cfg);
  const PrimalDualReport r = run_robust_primal_dual(P);
  const double peak = danger_peak(r.density.rho, P.system.danger);
  const double top = r.density.rho.max();
  if (r.converged) record_mass("robot_nav_disturbed", P.supply, r.density);

  // Worst-case occupation of X_d under the returned controller, outside closure(X_d).
  const WorstDisturbance w = solve_worst_disturbance(P.system, r.policy, P.hjb);
  const Point c = detail::to_point(cfg.danger_center);
  const double h = P.grid.spacing(0);
  int positive = 0;
  double worst = 0.0;
  for (std::size_t i = 0; i < P.grid.size(); ++i) {
    if ((P.grid.point(i) - c).norm() <= cfg.danger_radius + 1e-9 * h) continue;
    if (w.value.V[i] > 0) {
      ++positive;
      worst = std::max(worst, w.value.V[i]);
    }
  }
  const bool ok = r.converged && peak <= 1e-6 * top && positive == 0;
  return {ok, std::string(r.converged ? "converged" : "NOT converged") +
                  fmt(" after %.0f iterations, max rho on X_d %.2e (bound %.2e)", r.iterations, peak, 1e-6 * top) +
                  fmt(", V_d > 0 at %.0f nodes outside X_d (max %.2e)", positive, worst)};
}

// ---- 7 -------------------------------------------------------------------------

Outcome density_cross_validation() {
  // (a) ẋ = −x: ρ(t,x) = ρ0(x e^t) e^t.
  ControlledSystem contract =
      autonomous(1, [](const Point& x) { return Point(-x); }, [](const Point&) { return -1.0; });
  SupplyFunction s;
  s.sink = SinkMode::none;
  s.initial = [](const Point& x) { return std::exp(-x[0] * x[0]); };
  double ode = 0.0;
  for (double t : {0.25, 0.5, 1.0, 2.0})
    for (double x : {-0.2, -0.05, 0.0, 0.1, 0.3}) {
      const double xe = x * std::exp(t);
      const double want = std::exp(-xe * xe) * std::exp(t);
      ode = std::max(ode, std::abs(density_at(ClosedLoop(contract), s, t, pt({x})) - want) / want);
    }

  // (b) KDE against FDM on the constant-drift scenario.
  const DriftScenario d = constant_drift_1d(drift_config(read_json_file(DDUAL_SCENARIO_DIR "/constant_drift_1d.json")));
  const ClosedLoop f(d.system);
  const DensityField fdm = stationary_density_fdm(d.grid, f, d.supply);
  record_mass("constant_drift_1d", d.supply, fdm);
  const KdeEstimate kde = density_kde(d.grid, f, d.supply, d.kde);
  const double top = fdm.rho.max();
  double dev = 0.0;
  for (std::size_t i = 0; i < d.grid.size(); ++i)
    if (fdm.rho[i] >= 0.25 * top) dev = std::max(dev, std::abs(kde(d.grid.point(i)) - fdm.rho[i]) / fdm.rho[i]);
  return {ode <= 1e-5 && dev <= 0.15,
          fmt("(a) ODE relative error %.2e, (b) KDE vs FDM relative deviation %.3f on %.0f trials", ode, dev,
              d.kde.trials)};
}

// ---- 8 -------------------------------------------------------------------------

Outcome mass_balance_check() {
  if (g_mass.empty()) {
    // Run standalone: use the constant-drift density.
    const DriftScenario d = constant_drift_1d(DriftConfig{});
    record_mass("constant_drift_1d", d.supply, stationary_density_fdm(d.grid, ClosedLoop(d.system), d.supply));
  }
  double worst = 0.0;
  std::string names;
  for (const auto& m : g_mass) {
    worst = std::max(worst, m.imbalance / m.supply);
    names += (names.empty() ? "" : ", ") + m.name;
  }
  return {worst <= 1e-6, fmt("max |int phi| / Phi+ = %.2e over ", worst) + names};
}

// ---- 9 -------------------------------------------------------------------------

// Nested grid search on the 2-simplex for the nearest point to v.
Eigen::VectorXd brute_force_projection(const Eigen::VectorXd& v) {
  double step = 0.01, a0 = 0.0, a1 = 1.0, b0 = 0.0, b1 = 1.0;
  Eigen::VectorXd best(3);
  for (int level = 0; level < 7; ++level) {
    double bd = kInf;
    for (double a = a0; a <= a1 + 1e-15; a += step)
      for (double b = b0; b <= b1 + 1e-15; b += step) {
        const double c = 1.0 - a - b;
        if (a < 0 || b < 0 || c < -1e-15) continue;
        Eigen::VectorXd p(3);
        p << a, b, std::max(0.0, c);
        const double dist = (p - v).squaredNorm();
        if (dist < bd) bd = dist, best = p;
      }
    a0 = std::max(0.0, best[0] - step), a1 = std::min(1.0, best[0] + step);
    b0 = std::max(0.0, best[1] - step), b1 = std::min(1.0, best[1] + step);
    step /= 10;
  }
  return best;
}

Outcome simplex_projection() {
  std::mt19937_64 rng(909);
  std::uniform_real_distribution<double> U(-2.0, 2.0);
  std::uniform_int_distribution<int> M(1, 8);
  double feas = 0.0, idem = 0.0, brute = 0.0;
  for (int t = 0; t < 1000; ++t) {
    const int m = t < 200 ? 3 : M(rng);
    Eigen::VectorXd v(m);
    for (int k = 0; k < m; ++k) v[k] = U(rng);
    const Eigen::VectorXd p = project_simplex(v);
    feas = std::max({feas, std::abs(p.sum() - 1.0), std::max(0.0, -p.minCoeff())});
    idem = std::max(idem, (project_simplex(p) - p).cwiseAbs().maxCoeff());
    if (t < 200) brute = std::max(brute, (brute_force_projection(v) - p).cwiseAbs().maxCoeff());
  }
  return {feas <= 1e-12 && idem <= 1e-12 && brute <= 1e-6,
          fmt("feasibility %.1e, idempotence %.1e, grid-search gap %.1e (M=3, 200 rows)", feas, idem, brute)};
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria = {
      {"mdp duality", mdp_duality},
      {"constrained mdp vs lp oracle", constrained_vs_oracle},
      {"traffic scenario", traffic},
      {"1d minimum-time hjb", min_time_1d},
      {"robot navigation", robot_nominal},
      {"robust robot navigation", robot_robust},
      {"density cross-validation", density_cross_validation},
      {"mass balance", mass_balance_check},
      {"simplex projection", simplex_projection},
  };
  std::set<int> wanted;
  for (int a = 1; a < argc; ++a) wanted.insert(std::atoi(argv[a]));

  int failed = 0;
  for (std::size_t k = 0; k < criteria.size(); ++k) {
    const int id = static_cast<int>(k) + 1;
    if (!wanted.empty() && !wanted.count(id)) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = criteria[k].second();
    } catch (const std::exception& e) {
      o = {false, std::string("threw: ") + e.what()};
    }
    std::printf("%s %d %s: %s [%.1fs]\n", o.pass ? "PASS" : "FAIL", id, criteria[k].first, o.detail.c_str(),
                seconds_since(t0));
    std::fflush(stdout);
    failed += o.pass ? 0 : 1;
  }
  return failed == 0 ? 0 : 1;
}
