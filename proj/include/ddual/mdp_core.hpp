#pragma once

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <random>
#include <string>
#include <vector>

#include "ddual/errors.hpp"

namespace ddual {

// Finite MDP with per-action transition and reward matrices P_a(s,s'), R_a(s,s').
struct MdpModel {
  int N = 0;
  int M = 0;
  std::vector<char> available;       // N*M, row-major by state
  std::vector<Eigen::MatrixXd> P;    // M matrices N×N
  std::vector<Eigen::MatrixXd> R;    // M matrices N×N
  double gamma = 1.0;
  std::vector<int> sink;
  Eigen::VectorXd phi_plus;

  bool is_available(int s, int a) const { return available[static_cast<std::size_t>(s) * M + a] != 0; }
  bool is_sink(int s) const { return std::find(sink.begin(), sink.end(), s) != sink.end(); }
  bool has_sink() const { return !sink.empty(); }

  // Expected one-step reward r(s,a) = Σ_{s'} P_a(s,s') R_a(s,s').
  double expected_reward(int s, int a) const { return P[a].row(s).dot(R[a].row(s)); }

  void validate() const {
    if (N < 1 || M < 1) throw ConfigError("mdp: need at least one state and one action");
    if (!(gamma >= 0 && gamma <= 1)) throw ConfigError("mdp: gamma must lie in [0, 1]");
    if (available.size() != static_cast<std::size_t>(N) * M) throw ConfigError("mdp: availability mask has wrong size");
    if (static_cast<int>(P.size()) != M || static_cast<int>(R.size()) != M) throw ConfigError("mdp: need one P and R per action");
    if (phi_plus.size() != N) throw ConfigError("mdp: phi_plus has wrong length");
    for (int s : sink)
      if (s < 0 || s >= N) throw ConfigError("mdp: sink index out of range");
    for (int i = 0; i < N; ++i)
      if (!(phi_plus[i] >= 0)) throw ConfigError("mdp: phi_plus must be non-negative");
    for (int a = 0; a < M; ++a) {
      if (P[a].rows() != N || P[a].cols() != N || R[a].rows() != N || R[a].cols() != N)
        throw ConfigError("mdp: P/R matrices must be N×N");
      for (int s = 0; s < N; ++s) {
        if (!is_available(s, a)) continue;
        if ((P[a].row(s).array() < 0).any()) throw ConfigError("mdp: negative transition probability");
        if (std::abs(P[a].row(s).sum() - 1.0) > 1e-12)
          throw ConfigError("mdp: P[" + std::to_string(a) + "] row " + std::to_string(s) + " does not sum to 1");
      }
    }
    for (int s = 0; s < N; ++s) {
      bool any = false;
      for (int a = 0; a < M; ++a) any |= is_available(s, a);
      if (!any) throw NoAvailableAction("mdp: state " + std::to_string(s) + " has no available action");
    }
  }
};

// π(a|s) as an N×M matrix.
using StochasticPolicy = Eigen::MatrixXd;

inline void validate_policy(const MdpModel& m, const StochasticPolicy& pi) {
  if (pi.rows() != m.N || pi.cols() != m.M) throw InvalidPolicy("policy has wrong shape");
  for (int s = 0; s < m.N; ++s) {
    double sum = 0.0;
    for (int a = 0; a < m.M; ++a) {
      const double p = pi(s, a);
      if (!(p >= -1e-12)) throw InvalidPolicy("policy entry negative at state " + std::to_string(s));
      if (!m.is_available(s, a) && p != 0.0)
        throw InvalidPolicy("policy uses unavailable action " + std::to_string(a) + " at state " + std::to_string(s));
      sum += p;
    }
    if (std::abs(sum - 1.0) > 1e-9) throw InvalidPolicy("policy row " + std::to_string(s) + " does not sum to 1");
  }
}

inline StochasticPolicy uniform_policy(const MdpModel& m) {
  StochasticPolicy pi = StochasticPolicy::Zero(m.N, m.M);
  for (int s = 0; s < m.N; ++s) {
    int n = 0;
    for (int a = 0; a < m.M; ++a) n += m.is_available(s, a);
    for (int a = 0; a < m.M; ++a)
      if (m.is_available(s, a)) pi(s, a) = 1.0 / n;
  }
  return pi;
}

inline StochasticPolicy deterministic_policy(const MdpModel& m, const std::vector<int>& action) {
  StochasticPolicy pi = StochasticPolicy::Zero(m.N, m.M);
  for (int s = 0; s < m.N; ++s) pi(s, action[s]) = 1.0;
  validate_policy(m, pi);
  return pi;
}

inline Eigen::MatrixXd transition_matrix(const MdpModel& m, const StochasticPolicy& pi) {
  validate_policy(m, pi);
  Eigen::MatrixXd T = Eigen::MatrixXd::Zero(m.N, m.N);
  for (int s = 0; s < m.N; ++s)
    for (int a = 0; a < m.M; ++a)
      if (pi(s, a) != 0.0) T.row(s) += pi(s, a) * m.P[a].row(s);
  return T;
}

// P^π with the sink columns set to zero.
inline Eigen::MatrixXd cropped_matrix(const MdpModel& m, const StochasticPolicy& pi) {
  Eigen::MatrixXd T = transition_matrix(m, pi);
  for (int s : m.sink) T.col(s).setZero();
  return T;
}

inline Eigen::VectorXd sink_indicator(const MdpModel& m) {
  Eigen::VectorXd v = Eigen::VectorXd::Zero(m.N);
  for (int s : m.sink) v[s] = 1.0;
  return v;
}

// R^π(s) = Σ_a π(a|s) Σ_{s'} P_a(s,s') R_a(s,s').
inline Eigen::VectorXd reward_vector(const MdpModel& m, const StochasticPolicy& pi) {
  Eigen::VectorXd r = Eigen::VectorXd::Zero(m.N);
  for (int s = 0; s < m.N; ++s)
    for (int a = 0; a < m.M; ++a)
      if (pi(s, a) != 0.0) r[s] += pi(s, a) * m.expected_reward(s, a);
  return r;
}

namespace detail {

// Transition operator used by the linear solves: the cropped matrix with the
// sink rows zeroed as well, so sink states neither carry value nor density.
inline Eigen::MatrixXd solve_operator(const MdpModel& m, const StochasticPolicy& pi) {
  Eigen::MatrixXd T = cropped_matrix(m, pi);
  for (int s : m.sink) T.row(s).setZero();
  return T;
}

inline void check_proper(const MdpModel& m, const Eigen::MatrixXd& T) {
  if (m.gamma < 1.0) return;
  if (!m.has_sink()) throw SingularSystem("mdp: gamma = 1 requires a sink");
  // Every state must reach a sink (or leak through a cropped column).
  std::vector<char> ok(m.N, 0);
  for (int s = 0; s < m.N; ++s) ok[s] = m.is_sink(s) || T.row(s).sum() < 1.0 - 1e-12;
  for (bool changed = true; changed;) {
    changed = false;
    for (int s = 0; s < m.N; ++s) {
      if (ok[s]) continue;
      for (int t = 0; t < m.N; ++t)
        if (T(s, t) > 0 && ok[t]) {
          ok[s] = 1;
          changed = true;
          break;
        }
    }
  }
  for (int s = 0; s < m.N; ++s)
    if (!ok[s]) throw SingularSystem("mdp: state " + std::to_string(s) + " never reaches the sink");
}

inline Eigen::VectorXd solve_checked(const Eigen::MatrixXd& A, const Eigen::VectorXd& b) {
  Eigen::PartialPivLU<Eigen::MatrixXd> lu(A);
  Eigen::VectorXd x = lu.solve(b);
  const double scale = std::max(1.0, b.cwiseAbs().maxCoeff());
  if (!x.allFinite() || (A * x - b).cwiseAbs().maxCoeff() > 1e-10 * scale)
    throw SingularSystem("mdp: linear system is singular");
  return x;
}

inline Eigen::VectorXd masked_supply(const MdpModel& m) {
  Eigen::VectorXd phi = m.phi_plus;
  for (int s : m.sink) phi[s] = 0.0;
  return phi;
}

}  // namespace detail

// ρ̄_s = γ T^⊺ ρ̄_s + φ̄+, with T = P^π (no sink) or the cropped matrix.
inline Eigen::VectorXd stationary_density(const MdpModel& m, const StochasticPolicy& pi) {
  const Eigen::MatrixXd T = detail::solve_operator(m, pi);
  detail::check_proper(m, T);
  const Eigen::MatrixXd A = Eigen::MatrixXd::Identity(m.N, m.N) - m.gamma * T.transpose();
  return detail::solve_checked(A, detail::masked_supply(m));
}

// One forward step ρ̄' = γ T^⊺ ρ̄ + φ̄+.
inline Eigen::VectorXd density_step(const MdpModel& m, const StochasticPolicy& pi, const Eigen::VectorXd& rho) {
  const Eigen::MatrixXd T = detail::solve_operator(m, pi);
  return m.gamma * T.transpose() * rho + detail::masked_supply(m);
}

// V̄ = (I − γT)^{-1}(R^π + shift), V̄ = 0 on sinks.
inline Eigen::VectorXd policy_value(const MdpModel& m, const StochasticPolicy& pi, const Eigen::VectorXd& shift) {
  const Eigen::MatrixXd T = detail::solve_operator(m, pi);
  detail::check_proper(m, T);
  Eigen::VectorXd r = reward_vector(m, pi);
  if (shift.size()) r += shift;
  for (int s : m.sink) r[s] = 0.0;
  return detail::solve_checked(Eigen::MatrixXd::Identity(m.N, m.N) - m.gamma * T, r);
}

inline Eigen::VectorXd policy_value(const MdpModel& m, const StochasticPolicy& pi) {
  return policy_value(m, pi, Eigen::VectorXd());
}

// Q(s,a) = Σ_{s'} P_a(s,s')(R_a(s,s') + γ V(s')).
inline double q_value(const MdpModel& m, const Eigen::VectorXd& V, int s, int a) {
  return m.expected_reward(s, a) + m.gamma * m.P[a].row(s).dot(V);
}

struct ValueIterationResult {
  Eigen::VectorXd V;
  std::vector<int> action;
  StochasticPolicy policy;
  int iterations = 0;
};

namespace detail {

inline int greedy_action(const MdpModel& m, const Eigen::VectorXd& V, int s, double* best_out = nullptr) {
  int best_a = -1;
  double best = -std::numeric_limits<double>::infinity();
  for (int a = 0; a < m.M; ++a) {
    if (!m.is_available(s, a)) continue;
    const double q = q_value(m, V, s, a);
    if (best_a < 0 || q > best + 1e-12 * (1.0 + std::abs(best))) best = q, best_a = a;
  }
  if (best_out) *best_out = best;
  return best_a;
}

}  // namespace detail

inline ValueIterationResult value_iteration(const MdpModel& m, double tol = 1e-10, int max_iterations = 1000000) {
  m.validate();
  ValueIterationResult res;
  Eigen::VectorXd V = Eigen::VectorXd::Zero(m.N), next(m.N);
  for (int it = 1; it <= max_iterations; ++it) {
    for (int s = 0; s < m.N; ++s) {
      if (m.is_sink(s)) {
        next[s] = 0.0;
        continue;
      }
      detail::greedy_action(m, V, s, &next[s]);
    }
    const double change = (next - V).cwiseAbs().maxCoeff();
    V.swap(next);
    res.iterations = it;
    if (change <= tol) {
      res.V = V;
      res.action.resize(m.N);
      for (int s = 0; s < m.N; ++s) res.action[s] = detail::greedy_action(m, V, s);
      res.policy = deterministic_policy(m, res.action);
      return res;
    }
    if (!V.allFinite()) break;
  }
  throw NoConvergence("value iteration: no convergence after " + std::to_string(max_iterations) + " sweeps");
}

struct DualityCheck {
  double J_p = 0.0;  // ⟨φ+, V̄⟩
  double J_d = 0.0;  // Σ_s ρ̄_s(s) (R^π(s) + σ̄(s))
  double gap() const { return J_p - J_d; }
};

inline DualityCheck duality_check(const MdpModel& m, const StochasticPolicy& pi, const Eigen::VectorXd& sigma = {}) {
  const Eigen::VectorXd V = policy_value(m, pi, sigma);
  const Eigen::VectorXd rho = stationary_density(m, pi);
  Eigen::VectorXd r = reward_vector(m, pi);
  if (sigma.size()) r += sigma;
  for (int s : m.sink) r[s] = 0.0;
  return {detail::masked_supply(m).dot(V), rho.dot(r)};
}

inline double duality_gap(const MdpModel& m, const StochasticPolicy& pi, const Eigen::VectorXd& sigma = {}) {
  return duality_check(m, pi, sigma).gap();
}

// Seeded random instance: cubed uniform transition weights, about 80% of
// actions available, uniform rewards and supply.
inline MdpModel random_model(std::mt19937_64& rng, int N, int M, double gamma) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  MdpModel m;
  m.N = N;
  m.M = M;
  m.gamma = gamma;
  m.available.assign(static_cast<std::size_t>(N) * M, 0);
  for (int s = 0; s < N; ++s) {
    for (int a = 0; a < M; ++a) m.available[s * M + a] = u(rng) < 0.8;
    m.available[s * M + static_cast<int>(u(rng) * M) % M] = 1;
  }
  for (int a = 0; a < M; ++a) {
    Eigen::MatrixXd P(N, N), R(N, N);
    for (int s = 0; s < N; ++s) {
      for (int t = 0; t < N; ++t) {
        const double w = u(rng);
        P(s, t) = w * w * w + 1e-12;
      }
      P.row(s) /= P.row(s).sum();
    }
    for (int s = 0; s < N; ++s)
      for (int t = 0; t < N; ++t) R(s, t) = u(rng);
    m.P.push_back(P);
    m.R.push_back(R);
  }
  m.phi_plus.resize(N);
  for (int s = 0; s < N; ++s) m.phi_plus[s] = u(rng);
  return m;
}

// ---- JSON -------------------------------------------------------------------

inline nlohmann::json to_json(const MdpModel& m) {
  nlohmann::json j;
  j["states"] = m.N;
  j["actions"] = m.M;
  j["gamma"] = m.gamma;
  j["sink"] = m.sink;
  j["phi_plus"] = std::vector<double>(m.phi_plus.data(), m.phi_plus.data() + m.N);
  auto& av = j["available"] = nlohmann::json::array();
  for (int s = 0; s < m.N; ++s) {
    std::vector<bool> row;
    for (int a = 0; a < m.M; ++a) row.push_back(m.is_available(s, a));
    av.push_back(row);
  }
  for (const char* key : {"P", "R"}) {
    const auto& mats = std::string(key) == "P" ? m.P : m.R;
    auto& arr = j[key] = nlohmann::json::array();
    for (const auto& A : mats) {
      nlohmann::json rows = nlohmann::json::array();
      for (int s = 0; s < m.N; ++s) {
        std::vector<double> row(m.N);
        for (int t = 0; t < m.N; ++t) row[t] = A(s, t);
        rows.push_back(row);
      }
      arr.push_back(rows);
    }
  }
  return j;
}

namespace detail {

template <class T>
T field(const nlohmann::json& j, const char* name) {
  if (!j.contains(name)) throw ConfigError(std::string("mdp json: missing field '") + name + "'");
  try {
    return j.at(name).get<T>();
  } catch (const nlohmann::json::exception&) {
    throw ConfigError(std::string("mdp json: field '") + name + "' has the wrong type");
  }
}

}  // namespace detail

inline MdpModel mdp_from_json(const nlohmann::json& j) {
  MdpModel m;
  m.N = detail::field<int>(j, "states");
  m.M = detail::field<int>(j, "actions");
  m.gamma = detail::field<double>(j, "gamma");
  m.sink = j.contains("sink") ? detail::field<std::vector<int>>(j, "sink") : std::vector<int>{};
  const auto phi = detail::field<std::vector<double>>(j, "phi_plus");
  m.phi_plus = Eigen::Map<const Eigen::VectorXd>(phi.data(), static_cast<Eigen::Index>(phi.size()));
  const auto av = detail::field<std::vector<std::vector<bool>>>(j, "available");
  if (static_cast<int>(av.size()) != m.N) throw ConfigError("mdp json: field 'available' needs one row per state");
  m.available.assign(static_cast<std::size_t>(m.N) * m.M, 0);
  for (int s = 0; s < m.N; ++s) {
    if (static_cast<int>(av[s].size()) != m.M) throw ConfigError("mdp json: field 'available' row has wrong length");
    for (int a = 0; a < m.M; ++a) m.available[s * m.M + a] = av[s][a];
  }
  for (const char* key : {"P", "R"}) {
    const auto t = detail::field<std::vector<std::vector<std::vector<double>>>>(j, key);
    if (static_cast<int>(t.size()) != m.M) throw ConfigError(std::string("mdp json: field '") + key + "' needs one matrix per action");
    for (const auto& rows : t) {
      if (static_cast<int>(rows.size()) != m.N) throw ConfigError(std::string("mdp json: field '") + key + "' has wrong row count");
      Eigen::MatrixXd A(m.N, m.N);
      for (int s = 0; s < m.N; ++s) {
        if (static_cast<int>(rows[s].size()) != m.N) throw ConfigError(std::string("mdp json: field '") + key + "' has wrong column count");
        for (int u = 0; u < m.N; ++u) A(s, u) = rows[s][u];
      }
      (std::string(key) == "P" ? m.P : m.R).push_back(A);
    }
  }
  m.validate();
  return m;
}

inline nlohmann::json to_json(const StochasticPolicy& pi) {
  nlohmann::json rows = nlohmann::json::array();
  for (int s = 0; s < pi.rows(); ++s) {
    std::vector<double> row(pi.cols());
    for (int a = 0; a < pi.cols(); ++a) row[a] = pi(s, a);
    rows.push_back(row);
  }
  return rows;
}

inline nlohmann::json to_json(const Eigen::VectorXd& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

}  // namespace ddual
