#pragma once

#include <nlohmann/json.hpp>

#include <cmath>
#include <cstdint>
#include <fstream>
#include <string>
#include <utility>
#include <vector>

#include "ddual/mdp_pd.hpp"
#include "ddual/pd_control.hpp"

namespace ddual {

namespace detail {

// Field access with diagnostics that name the offending key.
class ConfigReader {
 public:
  ConfigReader(const nlohmann::json& j, std::string where) : j_(j), where_(std::move(where)) {
    if (!j_.is_object()) throw ConfigError(where_ + ": expected a JSON object");
  }

  template <class T>
  T get(const char* key, const T& fallback) const {
    if (!j_.contains(key)) return fallback;
    return get<T>(key);
  }

  template <class T>
  T get(const char* key) const {
    if (!j_.contains(key)) throw ConfigError(where_ + ": missing field '" + key + "'");
    try {
      return j_.at(key).get<T>();
    } catch (const nlohmann::json::exception&) {
      throw ConfigError(where_ + ": field '" + key + "' has the wrong type");
    }
  }

  ConfigReader child(const char* key) const {
    if (!j_.contains(key)) throw ConfigError(where_ + ": missing field '" + key + "'");
    return ConfigReader(j_.at(key), where_ + "." + key);
  }

  bool has(const char* key) const { return j_.contains(key); }
  const nlohmann::json& raw() const { return j_; }
  const std::string& where() const { return where_; }

 private:
  const nlohmann::json& j_;
  std::string where_;
};

inline Point to_point(const std::vector<double>& v) {
  Point p(static_cast<int>(v.size()));
  for (std::size_t k = 0; k < v.size(); ++k) p[static_cast<int>(k)] = v[k];
  return p;
}

inline std::vector<double> from_point(const Point& p) { return std::vector<double>(p.data(), p.data() + p.size()); }

inline void require(bool ok, const std::string& where, const char* key, const char* what) {
  if (!ok) throw ConfigError(where + ": field '" + key + "' " + what);
}

}  // namespace detail

// ---- robot navigation ------------------------------------------------------------

struct BumpSpec {
  std::vector<double> center;
  double width = 0.25;
};

struct RobotNavConfig {
  std::string scenario = "robot_nav";
  int version = 1;
  std::vector<double> lower{-2.0, -2.0};
  std::vector<double> upper{2.0, 2.0};
  std::vector<int> cells{80, 80};
  double input_radius = 0.5;
  std::vector<double> goal_center{0.0, 0.0};
  double goal_radius = 0.1;
  std::vector<double> danger_center{0.75, 0.5};
  double danger_radius = 0.3;
  std::vector<BumpSpec> bumps{{{1.5, 1.0}, 0.25}, {{-1.0, -1.2}, 0.25}};
  double truncate_widths = 3.0;
  double supply_rate = 1.0;
  double disturbance_fraction = 0.0;  // ‖d‖ ≤ fraction · input_radius; 0 disables
  // solver
  double rho_max = 0.0;
  double slack = 1e-6;
  double epsilon = 1e-6;
  int max_iterations = 100;
  bool grow_step = true;
  std::string robust_primal = "worst_case";
  std::uint64_t seed = 0;
};

inline RobotNavConfig robot_nav_defaults() { return {}; }

inline RobotNavConfig robot_nav_disturbed_defaults() {
  RobotNavConfig c;
  c.scenario = "robot_nav_disturbed";
  c.disturbance_fraction = 0.5;
  c.max_iterations = 300;
  return c;
}

inline nlohmann::json to_json(const RobotNavConfig& c) {
  nlohmann::json bumps = nlohmann::json::array();
  for (const auto& b : c.bumps) bumps.push_back({{"center", b.center}, {"width", b.width}});
  return {{"scenario", c.scenario},
          {"version", c.version},
          {"grid", {{"lower", c.lower}, {"upper", c.upper}, {"cells", c.cells}}},
          {"input_radius", c.input_radius},
          {"goal", {{"center", c.goal_center}, {"radius", c.goal_radius}}},
          {"danger", {{"center", c.danger_center}, {"radius", c.danger_radius}}},
          {"supply", {{"bumps", bumps}, {"truncate_widths", c.truncate_widths}, {"total_rate", c.supply_rate}}},
          {"disturbance_fraction", c.disturbance_fraction},
          {"solver",
           {{"rho_max", c.rho_max},
            {"slack", c.slack},
            {"epsilon", c.epsilon},
            {"max_iterations", c.max_iterations},
            {"grow_step", c.grow_step},
            {"robust_primal", c.robust_primal}}},
          {"seed", c.seed}};
}

inline RobotNavConfig robot_nav_config(const nlohmann::json& j) {
  const detail::ConfigReader r(j, "robot_nav");
  const std::string id = r.get<std::string>("scenario", "robot_nav");
  RobotNavConfig c = id == "robot_nav_disturbed" ? robot_nav_disturbed_defaults() : robot_nav_defaults();
  c.scenario = id;
  c.version = r.get("version", c.version);
  if (r.has("grid")) {
    const auto g = r.child("grid");
    c.lower = g.get("lower", c.lower);
    c.upper = g.get("upper", c.upper);
    c.cells = g.get("cells", c.cells);
  }
  c.input_radius = r.get("input_radius", c.input_radius);
  if (r.has("goal")) {
    const auto g = r.child("goal");
    c.goal_center = g.get("center", c.goal_center);
    c.goal_radius = g.get("radius", c.goal_radius);
  }
  if (r.has("danger")) {
    const auto g = r.child("danger");
    c.danger_center = g.get("center", c.danger_center);
    c.danger_radius = g.get("radius", c.danger_radius);
  }
  if (r.has("supply")) {
    const auto s = r.child("supply");
    if (s.has("bumps")) {
      c.bumps.clear();
      const auto& arr = s.raw().at("bumps");
      if (!arr.is_array()) throw ConfigError(s.where() + ": field 'bumps' has the wrong type");
      for (std::size_t k = 0; k < arr.size(); ++k) {
        const detail::ConfigReader b(arr[k], s.where() + ".bumps[" + std::to_string(k) + "]");
        c.bumps.push_back({b.get<std::vector<double>>("center"), b.get<double>("width")});
      }
    }
    c.truncate_widths = s.get("truncate_widths", c.truncate_widths);
    c.supply_rate = s.get("total_rate", c.supply_rate);
  }
  c.disturbance_fraction = r.get("disturbance_fraction", c.disturbance_fraction);
  if (r.has("solver")) {
    const auto s = r.child("solver");
    c.rho_max = s.get("rho_max", c.rho_max);
    c.slack = s.get("slack", c.slack);
    c.epsilon = s.get("epsilon", c.epsilon);
    c.max_iterations = s.get("max_iterations", c.max_iterations);
    c.grow_step = s.get("grow_step", c.grow_step);
    c.robust_primal = s.get("robust_primal", c.robust_primal);
  }
  c.seed = r.get("seed", c.seed);

  const std::string w = "robot_nav";
  detail::require(c.lower.size() == 2 && c.upper.size() == 2 && c.cells.size() == 2, w + ".grid", "lower/upper/cells",
                  "must have two entries");
  detail::require(c.input_radius > 0, w, "input_radius", "must be positive");
  detail::require(c.goal_center.size() == 2, w + ".goal", "center", "must have two entries");
  detail::require(c.goal_radius > 0, w + ".goal", "radius", "must be positive");
  detail::require(c.danger_center.size() == 2, w + ".danger", "center", "must have two entries");
  detail::require(c.danger_radius >= 0, w + ".danger", "radius", "must be non-negative");
  for (const auto& b : c.bumps) {
    detail::require(b.center.size() == 2, w + ".supply", "bumps", "centers must have two entries");
    detail::require(b.width > 0, w + ".supply", "bumps", "widths must be positive");
  }
  detail::require(c.supply_rate >= 0, w + ".supply", "total_rate", "must be non-negative");
  detail::require(c.disturbance_fraction >= 0, w, "disturbance_fraction", "must be non-negative");
  detail::require(c.max_iterations >= 1, w + ".solver", "max_iterations", "must be at least 1");
  detail::require(c.robust_primal == "worst_case" || c.robust_primal == "frozen", w + ".solver", "robust_primal",
                  "must be \"worst_case\" or \"frozen\"");
  return c;
}

// ẋ = u (+ d), ‖u‖ ≤ r, unit running cost outside the goal ball, danger disk X_d,
// supply from truncated Gaussian bumps zeroed on X_d ∪ X_g.
inline ConstrainedControlProblem robot_nav(const RobotNavConfig& c) {
  ConstrainedControlProblem P;
  P.grid = GridSpec(c.lower, c.upper, c.cells);
  ControlledSystem sys = single_integrator(2, InputSet::ball(2, c.input_radius));
  sys.goal = Region::ball(detail::to_point(c.goal_center), c.goal_radius);
  sys.danger = c.danger_radius > 0 ? Region::ball(detail::to_point(c.danger_center), c.danger_radius) : Region::empty();
  sys.running_cost = [goal = sys.goal](const Point& x, const Point&) { return goal.contains(x) ? 0.0 : 1.0; };
  sys.domain_width = std::max(c.upper[0] - c.lower[0], c.upper[1] - c.lower[1]);
  if (c.disturbance_fraction > 0) {
    sys.p = 2;
    sys.disturbances = InputSet::ball(2, c.disturbance_fraction * c.input_radius);
    sys.disturbance_matrix = [](const Point&) { return Eigen::MatrixXd::Identity(2, 2); };
  }
  P.system = sys;

  std::vector<std::pair<Point, double>> bumps;
  for (const auto& b : c.bumps) bumps.emplace_back(detail::to_point(b.center), b.width);
  const double cut = c.truncate_widths;
  auto raw = [bumps, cut, goal = sys.goal, danger = sys.danger](const Point& x) {
    if (goal.contains(x) || danger.contains(x)) return 0.0;
    double s = 0.0;
    for (const auto& [ctr, w] : bumps) {
      const double r2 = (x - ctr).squaredNorm();
      if (r2 <= cut * cut * w * w) s += std::exp(-r2 / (2 * w * w));
    }
    return s;
  };
  const double total = ScalarField::sample(P.grid, raw).integral();
  const double scale = total > 0 ? c.supply_rate / total : 0.0;
  P.supply.positive = [raw, scale](const Point& x) { return scale * raw(x); };

  P.rho_max = c.rho_max;
  P.slack = c.slack;
  P.epsilon = c.epsilon;
  P.max_iterations = c.max_iterations;
  P.grow_step = c.grow_step;
  P.robust_primal = c.robust_primal == "frozen" ? RobustPrimal::frozen : RobustPrimal::worst_case;
  return P;
}

inline ConstrainedControlProblem robot_nav_disturbed(RobotNavConfig c) {
  if (!(c.disturbance_fraction > 0)) c.disturbance_fraction = 0.5;
  return robot_nav(c);
}

// ---- traffic -------------------------------------------------------------------

struct TrafficConfig {
  std::string scenario = "traffic7";
  int version = 1;
  int regions = 7;
  std::vector<double> cost{1.2, 1.2, 1.4, 1.1, 1.0, 1.6, 0.8};
  // undirected edges, 1-based: ring 1..6 plus hub 7
  std::vector<std::pair<int, int>> edges{{1, 2}, {2, 3}, {3, 4}, {4, 5}, {5, 6}, {6, 1}, {7, 1},
                                         {7, 2}, {7, 3}, {7, 4}, {7, 5}, {7, 6}};
  double demand = 0.5;                       // φ+^k(s) for s ≠ k
  std::vector<std::vector<double>> demands;  // optional K×N override
  int cap_region = 7;                        // 1-based
  double cap_fraction = 0.6;                 // of the unconstrained cumulative density
  double gamma = 1.0;
  double epsilon = 1e-4;
  std::string method = "augmented";
  std::uint64_t seed = 0;
};

inline nlohmann::json to_json(const TrafficConfig& c) {
  nlohmann::json edges = nlohmann::json::array();
  for (const auto& [a, b] : c.edges) edges.push_back({a, b});
  nlohmann::json j = {{"scenario", c.scenario},     {"version", c.version},     {"regions", c.regions},
                      {"cost", c.cost},             {"edges", edges},          {"demand", c.demand},
                      {"cap_region", c.cap_region}, {"cap_fraction", c.cap_fraction}, {"gamma", c.gamma},
                      {"solver", {{"epsilon", c.epsilon}, {"method", c.method}}}, {"seed", c.seed}};
  if (!c.demands.empty()) j["demands"] = c.demands;
  return j;
}

inline TrafficConfig traffic_config(const nlohmann::json& j) {
  const detail::ConfigReader r(j, "traffic7");
  TrafficConfig c;
  c.scenario = r.get("scenario", c.scenario);
  c.version = r.get("version", c.version);
  c.regions = r.get("regions", c.regions);
  c.cost = r.get("cost", c.cost);
  if (r.has("edges")) {
    const auto raw = r.get<std::vector<std::vector<int>>>("edges");
    c.edges.clear();
    for (const auto& e : raw) {
      detail::require(e.size() == 2, "traffic7", "edges", "entries must be pairs");
      c.edges.emplace_back(e[0], e[1]);
    }
  }
  c.demand = r.get("demand", c.demand);
  c.demands = r.get("demands", c.demands);
  c.cap_region = r.get("cap_region", c.cap_region);
  c.cap_fraction = r.get("cap_fraction", c.cap_fraction);
  c.gamma = r.get("gamma", c.gamma);
  if (r.has("solver")) {
    const auto s = r.child("solver");
    c.epsilon = s.get("epsilon", c.epsilon);
    c.method = s.get("method", c.method);
  }
  c.seed = r.get("seed", c.seed);

  const std::string w = "traffic7";
  detail::require(c.regions >= 2, w, "regions", "must be at least 2");
  detail::require(static_cast<int>(c.cost.size()) == c.regions, w, "cost", "needs one entry per region");
  for (const auto& [a, b] : c.edges)
    detail::require(a >= 1 && b >= 1 && a <= c.regions && b <= c.regions && a != b, w, "edges",
                    "must join two distinct regions");
  detail::require(c.demand >= 0, w, "demand", "must be non-negative");
  if (!c.demands.empty()) {
    detail::require(static_cast<int>(c.demands.size()) == c.regions, w, "demands", "needs one row per destination");
    for (const auto& row : c.demands)
      detail::require(static_cast<int>(row.size()) == c.regions, w, "demands", "rows need one entry per region");
  }
  detail::require(c.cap_region >= 1 && c.cap_region <= c.regions, w, "cap_region", "is out of range");
  detail::require(c.cap_fraction >= 0, w, "cap_fraction", "must be non-negative");
  detail::require(c.gamma > 0 && c.gamma <= 1, w, "gamma", "must lie in (0, 1]");
  detail::require(c.method == "augmented" || c.method == "plain", w + ".solver", "method",
                  "must be \"augmented\" or \"plain\"");
  return c;
}

struct TrafficScenario {
  ConstrainedMdpProblem problem;              // capped at cap_region
  std::vector<StochasticPolicy> unconstrained;  // per-destination value iteration
  Eigen::VectorXd unconstrained_cumulative;
  double unconstrained_cost = 0.0;
};

// One MDP per destination k: actions are "move to region j", available for
// neighbours of the current region; reward −C(s) per step; k is the sink.
inline std::vector<MdpModel> traffic_models(const TrafficConfig& c) {
  const int N = c.regions;
  std::vector<std::vector<char>> adj(N, std::vector<char>(N, 0));
  for (const auto& [a, b] : c.edges) adj[a - 1][b - 1] = adj[b - 1][a - 1] = 1;
  std::vector<MdpModel> models;
  for (int k = 0; k < N; ++k) {
    MdpModel m;
    m.N = N;
    m.M = N;
    m.gamma = c.gamma;
    m.sink = {k};
    m.available.assign(static_cast<std::size_t>(N) * N, 0);
    for (int s = 0; s < N; ++s)
      for (int a = 0; a < N; ++a) m.available[s * N + a] = adj[s][a];
    for (int a = 0; a < N; ++a) {
      Eigen::MatrixXd P = Eigen::MatrixXd::Zero(N, N), R = Eigen::MatrixXd::Zero(N, N);
      for (int s = 0; s < N; ++s) {
        P(s, adj[s][a] ? a : s) = 1.0;
        R.row(s).setConstant(-c.cost[s]);
      }
      m.P.push_back(P);
      m.R.push_back(R);
    }
    m.phi_plus.resize(N);
    for (int s = 0; s < N; ++s)
      m.phi_plus[s] = c.demands.empty() ? (s == k ? 0.0 : c.demand) : c.demands[k][s];
    m.validate();
    models.push_back(std::move(m));
  }
  return models;
}

inline TrafficScenario traffic7(const TrafficConfig& c) {
  TrafficScenario sc;
  sc.problem.models = traffic_models(c);
  const int N = c.regions;
  sc.unconstrained_cumulative = Eigen::VectorXd::Zero(N);
  for (const auto& m : sc.problem.models) {
    const auto vi = value_iteration(m);
    sc.unconstrained.push_back(vi.policy);
    sc.unconstrained_cumulative += stationary_density(m, vi.policy);
    sc.unconstrained_cost -= detail::masked_supply(m).dot(vi.V);
  }
  sc.problem.rho_max = Eigen::VectorXd::Constant(N, kNoCap);
  sc.problem.rho_max[c.cap_region - 1] = c.cap_fraction * sc.unconstrained_cumulative[c.cap_region - 1];
  sc.problem.epsilon = c.epsilon;
  sc.problem.method = c.method == "plain" ? MdpMethod::plain : MdpMethod::augmented;
  return sc;
}

// ---- 1D constant drift -----------------------------------------------------------

struct DriftConfig {
  std::string scenario = "constant_drift_1d";
  int version = 1;
  double lower = 0.0;
  double upper = 2.0;
  int cells = 200;
  double drift = -0.5;
  double goal_upper = 0.1;  // X_g = {x ≤ goal_upper}
  double supply_lower = 0.2;
  double supply_upper = 1.2;
  double supply_rate = 1.0;  // φ+ on [supply_lower, supply_upper]
  int trials = 10000;
  double sample_step = 0.01;
  int horizon = 1000;
  double bandwidth_cells = 1.0;  // KDE bandwidth in grid spacings
  std::uint64_t seed = 7;
};

inline nlohmann::json to_json(const DriftConfig& c) {
  return {{"scenario", c.scenario},
          {"version", c.version},
          {"grid", {{"lower", c.lower}, {"upper", c.upper}, {"cells", c.cells}}},
          {"drift", c.drift},
          {"goal_upper", c.goal_upper},
          {"supply", {{"lower", c.supply_lower}, {"upper", c.supply_upper}, {"rate", c.supply_rate}}},
          {"kde",
           {{"trials", c.trials},
            {"sample_step", c.sample_step},
            {"horizon", c.horizon},
            {"bandwidth_cells", c.bandwidth_cells}}},
          {"seed", c.seed}};
}

inline DriftConfig drift_config(const nlohmann::json& j) {
  const detail::ConfigReader r(j, "constant_drift_1d");
  DriftConfig c;
  c.scenario = r.get("scenario", c.scenario);
  c.version = r.get("version", c.version);
  if (r.has("grid")) {
    const auto g = r.child("grid");
    c.lower = g.get("lower", c.lower);
    c.upper = g.get("upper", c.upper);
    c.cells = g.get("cells", c.cells);
  }
  c.drift = r.get("drift", c.drift);
  c.goal_upper = r.get("goal_upper", c.goal_upper);
  if (r.has("supply")) {
    const auto s = r.child("supply");
    c.supply_lower = s.get("lower", c.supply_lower);
    c.supply_upper = s.get("upper", c.supply_upper);
    c.supply_rate = s.get("rate", c.supply_rate);
  }
  if (r.has("kde")) {
    const auto k = r.child("kde");
    c.trials = k.get("trials", c.trials);
    c.sample_step = k.get("sample_step", c.sample_step);
    c.horizon = k.get("horizon", c.horizon);
    c.bandwidth_cells = k.get("bandwidth_cells", c.bandwidth_cells);
  }
  c.seed = r.get("seed", c.seed);
  const std::string w = "constant_drift_1d";
  detail::require(c.drift != 0.0, w, "drift", "must be non-zero");
  detail::require(c.supply_upper > c.supply_lower, w + ".supply", "upper", "must exceed lower");
  detail::require(c.supply_rate >= 0, w + ".supply", "rate", "must be non-negative");
  detail::require(c.trials >= 1, w + ".kde", "trials", "must be at least 1");
  detail::require(c.bandwidth_cells > 0, w + ".kde", "bandwidth_cells", "must be positive");
  return c;
}

struct DriftScenario {
  GridSpec grid;
  ControlledSystem system;
  SupplyFunction supply;
  KdeOptions kde;
  // Exact stationary density: supply mass upstream of x over the speed.
  std::function<double(double)> exact;
};

inline DriftScenario constant_drift_1d(const DriftConfig& c) {
  DriftScenario s;
  s.grid = GridSpec({c.lower}, {c.upper}, {c.cells});
  const double v = c.drift;
  s.system = autonomous(1, [v](const Point&) { Point f(1); f[0] = v; return f; }, [](const Point&) { return 0.0; });
  s.system.goal = v < 0 ? Region::box(detail::to_point({-kInf}), detail::to_point({c.goal_upper}))
                        : Region::box(detail::to_point({c.goal_upper}), detail::to_point({kInf}));
  const double lo = c.supply_lower, hi = c.supply_upper, rate = c.supply_rate;
  s.supply.positive = [lo, hi, rate](const Point& x) {
    return x[0] >= lo - 1e-12 && x[0] <= hi + 1e-12 ? rate : 0.0;
  };
  s.kde.trials = c.trials;
  s.kde.step = c.sample_step;
  s.kde.horizon = c.horizon;
  s.kde.seed = c.seed;
  s.kde.bandwidth = Point::Constant(1, c.bandwidth_cells * s.grid.spacing(0));
  const double gate = c.goal_upper;
  s.exact = [lo, hi, rate, v, gate](double x) {
    if (v < 0) {
      if (x <= gate) return 0.0;
      return std::max(0.0, hi - std::max(x, lo)) * rate / -v;
    }
    if (x >= gate) return 0.0;
    return std::max(0.0, std::min(x, hi) - lo) * rate / v;
  };
  return s;
}

// ---- files ---------------------------------------------------------------------

inline nlohmann::json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open '" + path + "'");
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError("'" + path + "' is not valid JSON: " + e.what());
  }
}

inline std::string scenario_id(const nlohmann::json& j) {
  if (!j.is_object() || !j.contains("scenario") || !j.at("scenario").is_string())
    throw ConfigError("config: missing field 'scenario'");
  return j.at("scenario").get<std::string>();
}

}  // namespace ddual
