// ddual: command-line front end for the density/value solvers.
//
//   ddual solve-control --scenario robot_nav --out runs/r1
//   ddual solve-control --scenario robot_nav_disturbed --robust --out runs/r2
//   ddual solve-mdp --scenario traffic7 --out runs/t1
//   ddual solve-mdp --check-duality --seed 3
//   ddual density --method kde --scenario constant_drift_1d --compare fdm kde
//   ddual verify
//
// Exit codes: 0 success, 1 input error, 2 no convergence.

#include <CLI11.hpp>

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "ddual/scenarios.hpp"

#ifndef DDUAL_SCENARIO_DIR
#define DDUAL_SCENARIO_DIR "scenarios"
#endif

namespace fs = std::filesystem;
using nlohmann::json;
using namespace ddual;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitInput = 1;
constexpr int kExitNoConvergence = 2;

struct Common {
  std::string config;
  std::string scenario;
  std::string out = ".";
  std::optional<std::uint64_t> seed;
  int threads = 1;
};

struct Run {
  std::string command;
  Common common;
  std::chrono::steady_clock::time_point start = std::chrono::steady_clock::now();
  std::vector<std::string> artifacts;
  json headline = json::object();
  bool converged = true;

  fs::path path(const std::string& name) {
    artifacts.push_back(name);
    return fs::path(common.out) / name;
  }

  void write_json(const std::string& name, const json& j) {
    std::ofstream os(path(name));
    if (!os) throw ConfigError("cannot write " + name);
    os << j.dump(2) << '\n';
  }

  template <class Field>
  void write_field(const std::string& name, const Field& f) {
    write_csv_file(path(name).string(), f);
  }

  // Written last, through a rename, so a manifest on disk always describes a finished run.
  void finish() {
    const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    json m = {{"command", command},
              {"config", common.config},
              {"scenario", common.scenario},
              {"seed", common.seed ? json(*common.seed) : json(nullptr)},
              {"output_directory", common.out},
              {"wall_clock_seconds", wall},
              {"artifacts", artifacts},
              {"converged", converged},
              {"headline", headline}};
    const fs::path tmp = fs::path(common.out) / "manifest.json.tmp";
    {
      std::ofstream os(tmp);
      if (!os) throw ConfigError("cannot write manifest.json");
      os << m.dump(2) << '\n';
    }
    fs::rename(tmp, fs::path(common.out) / "manifest.json");
  }
};

json vec_json(const std::vector<double>& v) { return json(v); }

// Scenario JSON from --config, else the shipped file for --scenario, else the built-in defaults.
json load_config(const Common& c, const std::string& fallback) {
  if (!c.config.empty()) return read_json_file(c.config);
  const std::string id = c.scenario.empty() ? fallback : c.scenario;
  const fs::path shipped = fs::path(DDUAL_SCENARIO_DIR) / (id + ".json");
  if (fs::exists(shipped)) return read_json_file(shipped.string());
  return json{{"scenario", id}};
}

void prepare(Run& run) {
  thread_budget() = run.common.threads;
  fs::create_directories(run.common.out);
}

// ---- solve-control -----------------------------------------------------------------

struct ControlFlags {
  bool robust = false;
  std::optional<int> max_iterations;
  std::optional<double> rho_max;
  std::optional<double> epsilon;
};

int cmd_solve_control(Run& run, const ControlFlags& f) {
  json cfg = load_config(run.common, f.robust ? "robot_nav_disturbed" : "robot_nav");
  const std::string id = scenario_id(cfg);
  if (id != "robot_nav" && id != "robot_nav_disturbed")
    throw ConfigError("solve-control: scenario '" + id + "' is not a control scenario");
  run.common.scenario = id;
  RobotNavConfig rc = robot_nav_config(cfg);
  if (f.max_iterations) rc.max_iterations = *f.max_iterations;
  if (f.rho_max) rc.rho_max = *f.rho_max;
  if (f.epsilon) rc.epsilon = *f.epsilon;
  if (run.common.seed) rc.seed = *run.common.seed;
  const bool robust = f.robust || id == "robot_nav_disturbed";
  const ConstrainedControlProblem P = robust ? robot_nav_disturbed(rc) : robot_nav(rc);
  prepare(run);

  auto hook = [](int j, const PrimalDualReport& r) {
    std::fprintf(stderr, "iteration %d: violation %.3g slackness %.3g J_p %.6g\n", j, r.max_violation.back(),
                 r.slackness.back(), r.J_p);
  };
  const PrimalDualReport r = robust ? run_robust_primal_dual(P, hook) : run_primal_dual(P, hook);

  run.write_field("V.csv", r.value.V);
  run.write_field("policy.csv", r.policy);
  run.write_field("rho.csv", r.density.rho);
  run.write_field("sigma.csv", r.sigma);
  if (r.disturbance) {
    VectorField d = r.disturbance->disturbance;
    std::ofstream os(run.path("d_star.csv"));
    write_csv(os, d, "d");
  }

  const double mass = mass_balance(P.supply, r.density);
  json report = {{"scenario", id},
                 {"robust", robust},
                 {"converged", r.converged},
                 {"iterations", r.iterations},
                 {"alpha", r.alpha},
                 {"J_p", r.J_p},
                 {"J_d", r.J_d},
                 {"gap", r.J_p - r.J_d},
                 {"max_violation", r.max_violation.empty() ? 0.0 : r.max_violation.back()},
                 {"mass_balance", mass},
                 {"supply_rate", r.density.supply_rate},
                 {"trace",
                  {{"max_violation", vec_json(r.max_violation)},
                   {"slackness", vec_json(r.slackness)},
                   {"objective", vec_json(r.objective)}}},
                 {"config", to_json(rc)}};
  run.write_json("report.json", report);
  run.converged = r.converged;
  run.headline = {{"J_p", r.J_p},
                  {"J_d", r.J_d},
                  {"gap", r.J_p - r.J_d},
                  {"iterations", r.iterations},
                  {"max_violation", report["max_violation"]}};
  std::printf("converged %s after %d iterations, J_p %.6g, max violation %.3g\n", r.converged ? "yes" : "no",
              r.iterations, r.J_p, report["max_violation"].get<double>());
  run.finish();
  return r.converged ? kExitOk : kExitNoConvergence;
}

// ---- solve-mdp --------------------------------------------------------------------

struct MdpFlags {
  bool unconstrained = false;
  bool check_duality = false;
  std::string method;
  int states = 6;
  int actions = 3;
  double gamma = 0.9;
};

// {"mdps":[...], "rho_max":[...], "alpha":…, "beta":…, "eps":…}
ConstrainedMdpProblem problem_from_json(const json& j) {
  const detail::ConfigReader r(j, "mdp problem");
  ConstrainedMdpProblem p;
  const auto& arr = j.at("mdps");
  if (!arr.is_array() || arr.empty()) throw ConfigError("mdp problem: field 'mdps' must be a non-empty array");
  for (const auto& m : arr) p.models.push_back(mdp_from_json(m));
  const int N = p.models.front().N;
  p.rho_max = Eigen::VectorXd::Constant(N, kNoCap);
  if (r.has("rho_max")) {
    const auto& caps = j.at("rho_max");
    if (!caps.is_array() || static_cast<int>(caps.size()) != N)
      throw ConfigError("mdp problem: field 'rho_max' needs one entry per state");
    for (int s = 0; s < N; ++s) p.rho_max[s] = caps[s].is_null() ? kNoCap : caps[s].get<double>();
  }
  if (r.has("alpha")) p.alpha = r.get<double>("alpha");
  if (r.has("beta")) p.beta = r.get<double>("beta");
  p.epsilon = r.get("eps", p.epsilon);
  const std::string method = r.get<std::string>("method", "augmented");
  if (method != "augmented" && method != "plain")
    throw ConfigError("mdp problem: field 'method' must be \"augmented\" or \"plain\"");
  p.method = method == "plain" ? MdpMethod::plain : MdpMethod::augmented;
  return p;
}

json caps_json(const Eigen::VectorXd& caps) {
  json a = json::array();
  for (int s = 0; s < caps.size(); ++s) a.push_back(std::isfinite(caps[s]) ? json(caps[s]) : json(nullptr));
  return a;
}

int check_duality(Run& run, const MdpFlags& f) {
  std::vector<MdpModel> models;
  std::vector<StochasticPolicy> policies;
  if (run.common.config.empty() && run.common.scenario.empty()) {
    std::mt19937_64 rng(run.common.seed.value_or(0));
    models.push_back(random_model(rng, f.states, f.actions, f.gamma));
    std::uniform_real_distribution<double> U(0.0, 1.0);
    StochasticPolicy pi = StochasticPolicy::Zero(f.states, f.actions);
    for (int s = 0; s < f.states; ++s) {
      Eigen::VectorXd w(f.actions);
      std::vector<char> mask = detail::mask_of(models[0], s);
      for (int a = 0; a < f.actions; ++a) w[a] = mask[a] ? U(rng) : 0.0;
      pi.row(s) = (w / w.sum()).transpose();
    }
    policies.push_back(pi);
  } else {
    json cfg = load_config(run.common, "traffic7");
    if (cfg.contains("mdps")) {
      models = problem_from_json(cfg).models;
    } else {
      if (scenario_id(cfg) != "traffic7") throw ConfigError("solve-mdp: unknown scenario '" + scenario_id(cfg) + "'");
      models = traffic_models(traffic_config(cfg));
    }
    for (const auto& m : models) policies.push_back(uniform_policy(m));
  }
  prepare(run);
  double worst = 0.0;
  json rows = json::array();
  for (std::size_t k = 0; k < models.size(); ++k) {
    const DualityCheck d = duality_check(models[k], policies[k]);
    std::printf("mdp %zu: J_p %.12g J_d %.12g gap %.3e\n", k, d.J_p, d.J_d, d.gap());
    worst = std::max(worst, std::abs(d.gap()) / std::max(1.0, std::abs(d.J_p)));
    rows.push_back({{"J_p", d.J_p}, {"J_d", d.J_d}, {"gap", d.gap()}});
  }
  run.write_json("duality.json", rows);
  run.headline = {{"max_relative_gap", worst}};
  run.finish();
  return kExitOk;
}

int cmd_solve_mdp(Run& run, const MdpFlags& f) {
  if (f.check_duality) return check_duality(run, f);
  json cfg = load_config(run.common, "traffic7");
  ConstrainedMdpProblem P;
  std::optional<TrafficScenario> traffic;
  if (cfg.contains("mdps")) {
    P = problem_from_json(cfg);
    run.common.scenario = "custom";
  } else {
    const std::string id = scenario_id(cfg);
    if (id != "traffic7") throw ConfigError("solve-mdp: scenario '" + id + "' is not an MDP scenario");
    TrafficConfig tc = traffic_config(cfg);
    if (run.common.seed) tc.seed = *run.common.seed;
    traffic = traffic7(tc);
    P = traffic->problem;
    run.common.scenario = id;
  }
  if (!f.method.empty()) {
    if (f.method != "augmented" && f.method != "plain")
      throw ConfigError("--method must be \"augmented\" or \"plain\"");
    P.method = f.method == "plain" ? MdpMethod::plain : MdpMethod::augmented;
  }
  if (f.unconstrained) P.rho_max.setConstant(kNoCap);
  prepare(run);

  const int K = static_cast<int>(P.models.size());
  MultiMdpReport r;
  if (f.unconstrained) {
    // Independent per-destination value iteration.
    r.cumulative = Eigen::VectorXd::Zero(P.models.front().N);
    for (const auto& m : P.models) {
      const auto vi = value_iteration(m);
      r.policies.push_back(vi.policy);
      r.densities.push_back(stationary_density(m, vi.policy));
      r.values.push_back(vi.V);
      r.cumulative += r.densities.back();
      r.objective += detail::masked_supply(m).dot(vi.V);
    }
    r.sigma = Eigen::VectorXd::Zero(r.cumulative.size());
    r.converged = true;
  } else {
    r = run_multi_mdp(P);
  }

  for (int k = 0; k < K; ++k) {
    const std::string tag = std::to_string(k + 1);
    run.write_json("policy_" + tag + ".json", to_json(r.policies[k]));
    run.write_json("density_" + tag + ".json", to_json(r.densities[k]));
    run.write_json("value_" + tag + ".json", to_json(r.values[k]));
  }
  run.write_json("cumulative_density.json", to_json(r.cumulative));

  json trace = json::array();
  for (const auto& t : r.trace)
    trace.push_back({{"objective", t.objective}, {"max_violation", t.max_violation}, {"policy_change", t.policy_change}});
  json report = {{"scenario", run.common.scenario},
                 {"unconstrained", f.unconstrained},
                 {"converged", r.converged},
                 {"iterations", r.iterations},
                 {"evaluations", r.evaluations},
                 {"objective", r.objective},
                 {"cost", -r.objective},
                 {"max_violation", r.max_violation},
                 {"rho_max", caps_json(P.rho_max)},
                 {"cumulative", to_json(r.cumulative)},
                 {"sigma", to_json(r.sigma)},
                 {"trace", trace}};
  if (traffic) report["unconstrained_cost"] = traffic->unconstrained_cost;
  run.write_json("report.json", report);
  run.converged = r.converged;
  run.headline = {{"objective", r.objective}, {"iterations", r.iterations}, {"max_violation", r.max_violation}};
  std::printf("converged %s after %d iterations, objective %.10g, max violation %.3g\n", r.converged ? "yes" : "no",
              r.iterations, r.objective, r.max_violation);
  run.finish();
  return r.converged ? kExitOk : kExitNoConvergence;
}

// ---- density ----------------------------------------------------------------------

struct DensityFlags {
  std::string method = "fdm";
  std::vector<std::string> compare;
  std::optional<int> trials;
  double time = 20.0;
  double dt = 1e-3;
};

struct DensitySetup {
  GridSpec grid;
  std::optional<ClosedLoop> loop;
  std::optional<VectorField> velocity;  // gridded closed loop, when available
  std::vector<char> goal;
  SupplyFunction supply;
  KdeOptions kde;
};

DensitySetup density_setup(Run& run, const DensityFlags& f) {
  json cfg = load_config(run.common, "constant_drift_1d");
  const std::string id = scenario_id(cfg);
  run.common.scenario = id;
  DensitySetup s;
  if (id == "constant_drift_1d") {
    DriftConfig dc = drift_config(cfg);
    if (run.common.seed) dc.seed = *run.common.seed;
    if (f.trials) dc.trials = *f.trials;
    DriftScenario d = constant_drift_1d(dc);
    s.grid = d.grid;
    s.loop.emplace(d.system);
    s.goal = region_mask(d.grid, d.system.goal, true);
    s.supply = d.supply;
    s.kde = d.kde;
  } else if (id == "robot_nav" || id == "robot_nav_disturbed") {
    // Density under the unconstrained minimum-time controller.
    RobotNavConfig rc = robot_nav_config(cfg);
    rc.disturbance_fraction = 0.0;
    if (run.common.seed) rc.seed = *run.common.seed;
    const ConstrainedControlProblem P = robot_nav(rc);
    HjbProblem hp;
    hp.system = &P.system;
    hp.grid = P.grid;
    const ValueField v = solve_stationary_hjb(hp);
    s.grid = P.grid;
    s.loop.emplace(P.system, grid_policy(v.policy));
    s.velocity = v.velocity;
    s.goal = v.goal;
    s.supply = P.supply;
    s.kde.seed = rc.seed;
    if (f.trials) s.kde.trials = *f.trials;
  } else {
    throw ConfigError("density: unknown scenario '" + id + "'");
  }
  return s;
}

ScalarField compute_density(Run& run, const DensitySetup& s, const std::string& method, const DensityFlags& f) {
  if (method == "fdm") {
    const DensityField d = s.velocity ? stationary_density_fdm(*s.velocity, s.supply, s.goal)
                                      : stationary_density_fdm(s.grid, *s.loop, s.supply);
    run.write_field("rho_fdm.csv", d.rho);
    run.headline["fdm_mass_balance"] = mass_balance(s.supply, d);
    return d.rho;
  }
  if (method == "kde") {
    const KdeEstimate k = density_kde(s.grid, *s.loop, s.supply, s.kde);
    const ScalarField rho = k.on_grid(s.grid);
    run.write_field("rho_kde.csv", rho);
    std::ofstream os(run.path("kde_samples.csv"));
    k.write_samples(os);
    return rho;
  }
  if (method == "ode") {
    // Pointwise characteristic evaluation at a long horizon.
    ScalarField rho(s.grid);
    parallel_for(s.grid.size(), [&](std::size_t i) {
      rho.values[i] = density_at(*s.loop, s.supply, f.time, s.grid.point(i), f.dt);
    });
    run.write_field("rho_ode.csv", rho);
    return rho;
  }
  throw ConfigError("--method must be one of ode, fdm, kde");
}

int cmd_density(Run& run, const DensityFlags& f) {
  const DensitySetup s = density_setup(run, f);
  prepare(run);
  if (f.compare.empty()) {
    const ScalarField rho = compute_density(run, s, f.method, f);
    run.headline["max_density"] = rho.max();
    run.headline["integral"] = rho.integral();
    std::printf("%s density: max %.6g, integral %.6g\n", f.method.c_str(), rho.max(), rho.integral());
    run.finish();
    return kExitOk;
  }
  if (f.compare.size() != 2) throw ConfigError("--compare takes exactly two methods");
  const ScalarField a = compute_density(run, s, f.compare[0], f);
  const ScalarField b = compute_density(run, s, f.compare[1], f);
  // Relative deviation where the reference is at least a quarter of its peak.
  const double peak = a.max();
  double dev = 0.0;
  for (std::size_t i = 0; i < a.values.size(); ++i)
    if (a[i] >= 0.25 * peak && a[i] > 0) dev = std::max(dev, std::abs(b[i] - a[i]) / a[i]);
  run.headline["max_relative_deviation"] = dev;
  std::printf("max relative deviation of %s from %s over rho >= 0.25 max: %.4f\n", f.compare[1].c_str(),
              f.compare[0].c_str(), dev);
  run.finish();
  return kExitOk;
}

// ---- verify -----------------------------------------------------------------------

int cmd_verify(Run& run) {
  prepare(run);
  std::mt19937_64 rng(run.common.seed.value_or(1));
  std::uniform_real_distribution<double> U(0.0, 1.0);
  int failed = 0;
  json results = json::array();
  auto report = [&](const char* name, bool ok, double measure) {
    std::printf("%s %s (%.3g)\n", ok ? "PASS" : "FAIL", name, measure);
    results.push_back({{"property", name}, {"pass", ok}, {"measure", measure}});
    failed += ok ? 0 : 1;
  };

  double gap = 0.0;
  for (int t = 0; t < 20; ++t) {
    const MdpModel m = random_model(rng, 2 + t % 8, 1 + t % 4, t % 2 ? 0.9 : 0.5);
    const auto d = duality_check(m, uniform_policy(m));
    gap = std::max(gap, std::abs(d.gap()) / std::max(1.0, std::abs(d.J_p)));
  }
  report("mdp duality gap", gap <= 1e-8, gap);

  double proj = 0.0;
  for (int t = 0; t < 200; ++t) {
    Eigen::VectorXd v(4);
    for (int k = 0; k < 4; ++k) v[k] = 4 * U(rng) - 2;
    const Eigen::VectorXd p = project_simplex(v);
    proj = std::max({proj, std::abs(p.sum() - 1.0), std::max(0.0, -p.minCoeff()),
                     (project_simplex(p) - p).cwiseAbs().maxCoeff()});
  }
  report("simplex projection feasible and idempotent", proj <= 1e-12, proj);

  double lp = 0.0;
  for (int t = 0; t < 10; ++t) {
    const MdpModel m = random_model(rng, 4, 3, 0.9);
    const auto vi = value_iteration(m);
    const double o = oracle_constrained_mdp(m, Eigen::VectorXd::Constant(m.N, kNoCap)).objective;
    lp = std::max(lp, std::abs(o - detail::masked_supply(m).dot(vi.V)) / std::max(1.0, std::abs(o)));
  }
  report("lp oracle matches value iteration", lp <= 1e-8, lp);

  const DriftScenario drift = constant_drift_1d(DriftConfig{});
  const DensityField fdm = stationary_density_fdm(drift.grid, ClosedLoop(drift.system), drift.supply);
  const double mass = std::abs(mass_balance(drift.supply, fdm)) / drift.supply.total_rate(drift.grid);
  report("stationary mass balance", mass <= 1e-6, mass);
  double rho_min = fdm.rho.values.empty() ? 0.0 : *std::min_element(fdm.rho.values.begin(), fdm.rho.values.end());
  report("stationary density non-negative", rho_min >= 0.0, rho_min);

  run.write_json("verify.json", results);
  run.headline = {{"failed", failed}};
  run.converged = failed == 0;
  run.finish();
  return failed == 0 ? kExitOk : kExitNoConvergence;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Density/value duality solvers for safe control and constrained MDPs"};
  app.require_subcommand(1);

  Run run;
  Common& c = run.common;
  std::uint64_t seed = 0;
  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", c.config, "Scenario or problem JSON");
    sub->add_option("--scenario", c.scenario, "Shipped scenario id");
    sub->add_option("--out", c.out, "Output directory");
    sub->add_option("--seed", seed, "Seed for all randomness");
    sub->add_option("--threads", c.threads, "Worker threads (0 = all cores)")->check(CLI::NonNegativeNumber);
  };

  ControlFlags cf;
  auto* control = app.add_subcommand("solve-control", "Constrained optimal control (nominal or robust)");
  add_common(control);
  control->add_flag("--robust", cf.robust, "Solve against the worst-case disturbance");
  int max_it = 0;
  double rho_max = 0.0, eps = 0.0;
  auto* o_it = control->add_option("--max-iterations", max_it, "Primal-dual iteration cap");
  auto* o_rho = control->add_option("--rho-max", rho_max, "Density bound on the danger set");
  auto* o_eps = control->add_option("--epsilon", eps, "Complementary-slackness tolerance");

  MdpFlags mf;
  auto* mdp = app.add_subcommand("solve-mdp", "Constrained MDPs, value iteration and duality check");
  add_common(mdp);
  mdp->add_flag("--unconstrained", mf.unconstrained, "Drop the density caps and use value iteration");
  mdp->add_flag("--check-duality", mf.check_duality, "Print J_p, J_d and the gap");
  mdp->add_option("--method", mf.method, "augmented or plain");
  mdp->add_option("--states", mf.states, "States of the random model for --check-duality");
  mdp->add_option("--actions", mf.actions, "Actions of the random model for --check-duality");
  mdp->add_option("--gamma", mf.gamma, "Discount of the random model for --check-duality");

  DensityFlags df;
  auto* dens = app.add_subcommand("density", "Density by characteristics, finite differences or KDE");
  add_common(dens);
  dens->add_option("--method", df.method, "ode, fdm or kde")->check(CLI::IsMember({"ode", "fdm", "kde"}));
  dens->add_option("--compare", df.compare, "Two methods to compare")->expected(2);
  int trials = 0;
  auto* o_trials = dens->add_option("--trials", trials, "KDE trajectories");
  dens->add_option("--time", df.time, "Horizon for the ode method");
  dens->add_option("--dt", df.dt, "Integrator step for the ode method");

  auto* verify = app.add_subcommand("verify", "Run the invariant suite");
  add_common(verify);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitInput;
  }

  auto* sub = app.get_subcommands().front();
  run.command = sub->get_name();
  if (sub->count("--seed")) c.seed = seed;
  if (*o_it) cf.max_iterations = max_it;
  if (*o_rho) cf.rho_max = rho_max;
  if (*o_eps) cf.epsilon = eps;
  if (*o_trials) df.trials = trials;

  try {
    if (sub == control) return cmd_solve_control(run, cf);
    if (sub == mdp) return cmd_solve_mdp(run, mf);
    if (sub == dens) return cmd_density(run, df);
    return cmd_verify(run);
  } catch (const NoConvergence& e) {
    std::fprintf(stderr, "no convergence: %s\n", e.what());
    return kExitNoConvergence;
  } catch (const Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitInput;
  } catch (const nlohmann::json::exception& e) {
    std::fprintf(stderr, "error: malformed JSON: %s\n", e.what());
    return kExitInput;
  } catch (const fs::filesystem_error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitInput;
  }
}
