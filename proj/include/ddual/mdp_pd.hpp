#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <optional>
#include <vector>

#include "ddual/mdp_core.hpp"

namespace ddual {

inline constexpr double kNoCap = std::numeric_limits<double>::infinity();

// 𝒜(a|s) = Σ_{s'} P_a(s,s')(R_a(s,s') + γV(s')) − V(s); zero on unavailable
// actions and on sink states.
inline Eigen::MatrixXd advantage(const MdpModel& m, const StochasticPolicy& pi, const Eigen::VectorXd& V,
                                 const Eigen::VectorXd& reward_shift = {}) {
  (void)pi;
  Eigen::MatrixXd A = Eigen::MatrixXd::Zero(m.N, m.M);
  for (int s = 0; s < m.N; ++s) {
    if (m.is_sink(s)) continue;
    const double shift = reward_shift.size() ? reward_shift[s] : 0.0;
    for (int a = 0; a < m.M; ++a)
      if (m.is_available(s, a)) A(s, a) = q_value(m, V, s, a) + shift - V[s];
  }
  return A;
}

// Euclidean projection onto {c ≥ 0, Σc = 1, c_a = 0 where unavailable}.
inline Eigen::VectorXd project_simplex(const Eigen::VectorXd& v, const std::vector<char>& mask) {
  std::vector<double> x;
  for (int a = 0; a < v.size(); ++a)
    if (mask[a]) x.push_back(v[a]);
  if (x.empty()) throw NoAvailableAction("project_simplex: no available action");
  std::vector<double> u = x;
  std::sort(u.begin(), u.end(), std::greater<>());
  double css = 0.0, tau = 0.0;
  for (std::size_t k = 0; k < u.size(); ++k) {
    css += u[k];
    const double t = (css - 1.0) / static_cast<double>(k + 1);
    if (u[k] - t > 0) tau = t;
  }
  Eigen::VectorXd out = Eigen::VectorXd::Zero(v.size());
  for (int a = 0; a < v.size(); ++a)
    if (mask[a]) out[a] = std::max(v[a] - tau, 0.0);
  return out;
}

inline Eigen::VectorXd project_simplex(const Eigen::VectorXd& v) {
  return project_simplex(v, std::vector<char>(static_cast<std::size_t>(v.size()), 1));
}

enum class MdpMethod { augmented, plain };

struct ConstrainedMdpProblem {
  std::vector<MdpModel> models;
  Eigen::VectorXd rho_max;           // per state; kNoCap where unconstrained
  std::optional<double> alpha;       // plain: policy step, default 0.1/max|𝒜|
  std::optional<double> beta;        // plain: dual step, default 0.5/max φ+
  double epsilon = 1e-4;
  int max_iterations = 5000;         // plain iterations
  std::vector<StochasticPolicy> pi0; // default uniform over available actions
  MdpMethod method = MdpMethod::augmented;
  // augmented Lagrangian settings
  int max_outer = 200;
  int max_inner = 2000;
  double inner_tol = 1e-7;
  double feasibility_tol = 1e-9;
};

struct MdpTraceEntry {
  double objective = 0.0;
  double max_violation = 0.0;
  double policy_change = 0.0;
};

struct MultiMdpReport {
  std::vector<StochasticPolicy> policies;
  std::vector<Eigen::VectorXd> densities;
  Eigen::VectorXd cumulative;
  std::vector<Eigen::VectorXd> values;  // unshifted V^k
  Eigen::VectorXd sigma;
  std::vector<MdpTraceEntry> trace;
  int iterations = 0;
  int evaluations = 0;
  bool converged = false;
  double objective = 0.0;  // Σ_k ⟨φ+^k, V^k⟩
  double max_violation = 0.0;
};

namespace detail {

inline void validate_problem(const ConstrainedMdpProblem& p) {
  if (p.models.empty()) throw ConfigError("constrained mdp: no models");
  const int N = p.models.front().N;
  for (const auto& m : p.models) {
    m.validate();
    if (m.N != N) throw ConfigError("constrained mdp: models must share the state set");
  }
  if (p.rho_max.size() != N) throw ConfigError("constrained mdp: rho_max has wrong length");
  for (int s = 0; s < N; ++s)
    if (!(p.rho_max[s] >= 0)) throw ConfigError("constrained mdp: rho_max must be non-negative");
  if (!(p.epsilon > 0)) throw ConfigError("constrained mdp: epsilon must be positive");
  if (p.alpha && !(*p.alpha > 0)) throw ConfigError("constrained mdp: alpha must be positive");
  if (p.beta && !(*p.beta > 0)) throw ConfigError("constrained mdp: beta must be positive");
  if (!p.pi0.empty()) {
    if (p.pi0.size() != p.models.size()) throw ConfigError("constrained mdp: need one initial policy per model");
    for (std::size_t k = 0; k < p.models.size(); ++k) validate_policy(p.models[k], p.pi0[k]);
  }
}

inline std::vector<char> mask_of(const MdpModel& m, int s) {
  std::vector<char> mask(m.M);
  for (int a = 0; a < m.M; ++a) mask[a] = m.is_available(s, a);
  return mask;
}

inline StochasticPolicy project_policy(const MdpModel& m, const StochasticPolicy& raw) {
  StochasticPolicy pi(m.N, m.M);
  for (int s = 0; s < m.N; ++s) pi.row(s) = project_simplex(raw.row(s).transpose(), mask_of(m, s)).transpose();
  return pi;
}

inline double max_abs_diff(const std::vector<StochasticPolicy>& a, const std::vector<StochasticPolicy>& b) {
  double d = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) d = std::max(d, (a[k] - b[k]).cwiseAbs().maxCoeff());
  return d;
}

inline double max_supply(const std::vector<MdpModel>& models) {
  double p = 0.0;
  for (const auto& m : models) p = std::max(p, m.phi_plus.maxCoeff());
  return p;
}

// ρ_c − ρ^max on capped states, 0 elsewhere.
inline Eigen::VectorXd cap_violation(const Eigen::VectorXd& rc, const Eigen::VectorXd& cap) {
  Eigen::VectorXd v = Eigen::VectorXd::Zero(rc.size());
  for (int s = 0; s < rc.size(); ++s)
    if (std::isfinite(cap[s])) v[s] = rc[s] - cap[s];
  return v;
}

inline double positive_part_max(const Eigen::VectorXd& v) { return std::max(0.0, v.size() ? v.maxCoeff() : 0.0); }

struct PolicyState {
  std::vector<Eigen::VectorXd> rho;
  Eigen::VectorXd cumulative;
  Eigen::VectorXd violation;
  double objective = 0.0;
};

inline PolicyState evaluate_state(const ConstrainedMdpProblem& p, const std::vector<StochasticPolicy>& pis) {
  PolicyState st;
  const int N = p.models.front().N;
  st.cumulative = Eigen::VectorXd::Zero(N);
  for (std::size_t k = 0; k < pis.size(); ++k) {
    st.rho.push_back(stationary_density(p.models[k], pis[k]));
    st.cumulative += st.rho.back();
    st.objective += detail::masked_supply(p.models[k]).dot(policy_value(p.models[k], pis[k]));
  }
  st.violation = cap_violation(st.cumulative, p.rho_max);
  return st;
}

inline void finish_report(MultiMdpReport& r, const ConstrainedMdpProblem& p, const std::vector<StochasticPolicy>& pis) {
  r.policies = pis;
  r.densities.clear();
  r.values.clear();
  r.objective = 0.0;
  r.cumulative = Eigen::VectorXd::Zero(p.models.front().N);
  for (std::size_t k = 0; k < pis.size(); ++k) {
    r.densities.push_back(stationary_density(p.models[k], pis[k]));
    r.values.push_back(policy_value(p.models[k], pis[k]));
    r.cumulative += r.densities.back();
    r.objective += detail::masked_supply(p.models[k]).dot(r.values.back());
  }
  r.max_violation = positive_part_max(cap_violation(r.cumulative, p.rho_max));
}

// Augmented Lagrangian L = Σ_k J^k − Σ_s (σ_e² − σ²)/(2c), σ_e = max(0, σ + c(ρ_c − ρ^max)),
// and its policy gradient ρ^k ⊙ 𝒜^k evaluated with the reward R − σ_e.
struct AlEval {
  double L = 0.0;
  std::vector<Eigen::MatrixXd> G;
  Eigen::VectorXd violation;
};

inline AlEval al_evaluate(const ConstrainedMdpProblem& p, const std::vector<StochasticPolicy>& pis,
                          const Eigen::VectorXd& sigma, double c) {
  const PolicyState st = evaluate_state(p, pis);
  AlEval e;
  e.violation = st.violation;
  Eigen::VectorXd se = (sigma + c * st.violation).cwiseMax(0.0);
  for (int s = 0; s < se.size(); ++s)
    if (!std::isfinite(p.rho_max[s])) se[s] = 0.0;
  e.L = st.objective - (se.squaredNorm() - sigma.squaredNorm()) / (2.0 * c);
  for (std::size_t k = 0; k < pis.size(); ++k) {
    const Eigen::VectorXd V = policy_value(p.models[k], pis[k], -se);
    const Eigen::MatrixXd A = advantage(p.models[k], pis[k], V, -se);
    e.G.push_back(st.rho[k].asDiagonal() * A);
  }
  return e;
}

inline std::vector<StochasticPolicy> ascent_step(const ConstrainedMdpProblem& p, const std::vector<StochasticPolicy>& pis,
                                                 const std::vector<Eigen::MatrixXd>& G, double a) {
  std::vector<StochasticPolicy> out;
  for (std::size_t k = 0; k < pis.size(); ++k) out.push_back(project_policy(p.models[k], pis[k] + a * G[k]));
  return out;
}

inline double max_abs(const std::vector<Eigen::MatrixXd>& G) {
  double g = 0.0;
  for (const auto& x : G) g = std::max(g, x.cwiseAbs().maxCoeff());
  return g;
}

inline double inner_product(const std::vector<Eigen::MatrixXd>& G, const std::vector<StochasticPolicy>& a,
                            const std::vector<StochasticPolicy>& b) {
  double s = 0.0;
  for (std::size_t k = 0; k < G.size(); ++k) s += (G[k].array() * (a[k] - b[k]).array()).sum();
  return s;
}

inline MultiMdpReport run_augmented(const ConstrainedMdpProblem& p, std::vector<StochasticPolicy> pis) {
  MultiMdpReport r;
  const int N = p.models.front().N;
  Eigen::VectorXd sigma = Eigen::VectorXd::Zero(N);
  const double phimax = max_supply(p.models);
  double c = phimax > 0 ? 1.0 / phimax : 1.0;

  AlEval e = al_evaluate(p, pis, sigma, c);
  ++r.evaluations;
  const double a0 = 1.0 / std::max(max_abs(e.G), 1e-12);
  double a = a0;
  double prev_measure = std::numeric_limits<double>::infinity();
  for (int outer = 1; outer <= p.max_outer; ++outer) {
    const auto before = pis;
    for (int inner = 0; inner < p.max_inner; ++inner) {
      if (max_abs_diff(ascent_step(p, pis, e.G, a0), pis) <= p.inner_tol) break;
      // Armijo backtracking on L, then try a longer step next time.
      for (;;) {
        auto next = ascent_step(p, pis, e.G, a);
        AlEval en = al_evaluate(p, next, sigma, c);
        ++r.evaluations;
        if (en.L >= e.L + 0.5 * inner_product(e.G, next, pis) - 1e-14 || a < 1e-12 * a0) {
          pis = std::move(next);
          e = std::move(en);
          break;
        }
        a *= 0.5;
      }
      a *= 2.0;
    }
    sigma = (sigma + c * e.violation).cwiseMax(0.0);
    double measure = 0.0;
    for (int s = 0; s < N; ++s)
      measure = std::max(measure, std::abs(sigma[s] > 0 ? e.violation[s] : std::max(e.violation[s], 0.0)));
    if (measure > 0.25 * prev_measure) c *= 10.0;
    prev_measure = measure;

    e = al_evaluate(p, pis, sigma, c);
    ++r.evaluations;
    const double change = max_abs_diff(pis, before);
    const PolicyState st = evaluate_state(p, pis);
    r.trace.push_back({st.objective, positive_part_max(st.violation), change});
    r.iterations = outer;
    if (positive_part_max(e.violation) <= p.feasibility_tol && change <= p.epsilon) {
      r.converged = true;
      break;
    }
  }
  r.sigma = sigma;
  finish_report(r, p, pis);
  return r;
}

inline bool objective_oscillates(const std::vector<MdpTraceEntry>& t) {
  const std::size_t n = t.size();
  if (n < 3) return false;
  return (t[n - 1].objective - t[n - 2].objective) * (t[n - 2].objective - t[n - 3].objective) < 0;
}

// The printed iteration: π ← Proj(π + αρ_s𝒜), σ ← max(0, σ + β(ρ_c − ρ^max)).
inline MultiMdpReport run_plain(const ConstrainedMdpProblem& p, std::vector<StochasticPolicy> pis) {
  MultiMdpReport r;
  const int N = p.models.front().N;
  const std::size_t K = p.models.size();
  Eigen::VectorXd sigma = Eigen::VectorXd::Zero(N);
  const double phimax = max_supply(p.models);
  double alpha = p.alpha.value_or(0.0);
  double beta = p.beta.value_or(phimax > 0 ? 0.5 / phimax : 0.5);
  for (int j = 1; j <= p.max_iterations; ++j) {
    const PolicyState st = evaluate_state(p, pis);
    ++r.evaluations;
    std::vector<Eigen::MatrixXd> A(K);
    for (std::size_t k = 0; k < K; ++k)
      A[k] = advantage(p.models[k], pis[k], policy_value(p.models[k], pis[k], -sigma), -sigma);
    if (j == 1 && !p.alpha) {
      const double amax = max_abs(A);
      alpha = amax > 0 ? 0.1 / amax : 0.1;
    }
    std::vector<StochasticPolicy> next;
    for (std::size_t k = 0; k < K; ++k)
      next.push_back(project_policy(p.models[k], pis[k] + alpha * (st.rho[k].asDiagonal() * A[k])));
    sigma = (sigma + beta * st.violation).cwiseMax(0.0);
    const double change = max_abs_diff(next, pis);
    r.trace.push_back({st.objective, positive_part_max(st.violation), change});
    r.iterations = j;
    pis = std::move(next);
    if (objective_oscillates(r.trace)) alpha *= 0.5, beta *= 0.5;
    if (positive_part_max(st.violation) <= p.feasibility_tol && change <= p.epsilon) {
      r.converged = true;
      break;
    }
  }
  r.sigma = sigma;
  finish_report(r, p, pis);
  return r;
}

}  // namespace detail

inline MultiMdpReport run_multi_mdp(const ConstrainedMdpProblem& p) {
  detail::validate_problem(p);
  std::vector<StochasticPolicy> pis = p.pi0;
  if (pis.empty())
    for (const auto& m : p.models) pis.push_back(uniform_policy(m));
  return p.method == MdpMethod::plain ? detail::run_plain(p, std::move(pis)) : detail::run_augmented(p, std::move(pis));
}

inline MultiMdpReport run_constrained_mdp(const ConstrainedMdpProblem& p) {
  if (p.models.size() != 1) throw ConfigError("run_constrained_mdp: expects exactly one model");
  return run_multi_mdp(p);
}

// ---- LP oracle -----------------------------------------------------------------

namespace detail {

inline void pivot(Eigen::MatrixXd& T, int r, int c) {
  T.row(r) /= T(r, c);
  for (int i = 0; i < T.rows(); ++i)
    if (i != r && T(i, c) != 0.0) T.row(i) -= T(i, c) * T.row(r);
}

// Maximizes over a dense tableau whose last row holds reduced costs (−c) and
// last column the right-hand side. Bland's rule on columns < ncols_allowed.
inline void simplex_phase(Eigen::MatrixXd& T, std::vector<int>& basis, int ncols_allowed) {
  const Eigen::Index m = T.rows() - 1;
  const Eigen::Index rhs = T.cols() - 1;
  constexpr double tol = 1e-11;
  for (int guard = 0; guard < 100000; ++guard) {
    int enter = -1;
    for (int j = 0; j < ncols_allowed; ++j)
      if (T(m, j) < -tol) {
        enter = j;
        break;
      }
    if (enter < 0) return;
    Eigen::Index leave = -1;
    double best = std::numeric_limits<double>::infinity();
    for (Eigen::Index i = 0; i < m; ++i) {
      if (T(i, enter) <= tol) continue;
      const double ratio = T(i, rhs) / T(i, enter);
      if (leave < 0 || ratio < best - 1e-14 || (std::abs(ratio - best) <= 1e-14 && basis[i] < basis[leave])) {
        best = ratio;
        leave = i;
      }
    }
    if (leave < 0) throw Error("oracle: linear program is unbounded");
    pivot(T, static_cast<int>(leave), enter);
    basis[leave] = enter;
  }
  throw NoConvergence("oracle: simplex iteration limit");
}

// max cᵀx s.t. Ax = b, x ≥ 0. Two-phase tableau method.
inline Eigen::VectorXd solve_lp(Eigen::MatrixXd A, Eigen::VectorXd b, const Eigen::VectorXd& c) {
  const int m = static_cast<int>(A.rows());
  const int n = static_cast<int>(A.cols());
  for (int i = 0; i < m; ++i)
    if (b[i] < 0) A.row(i) *= -1.0, b[i] = -b[i];
  Eigen::MatrixXd T = Eigen::MatrixXd::Zero(m + 1, n + m + 1);
  T.topLeftCorner(m, n) = A;
  T.block(0, n, m, m).setIdentity();
  T.col(n + m).head(m) = b;
  std::vector<int> basis(m);
  std::iota(basis.begin(), basis.end(), n);
  // phase 1: maximize −Σ artificials
  T.row(m).segment(n, m).setOnes();
  for (int i = 0; i < m; ++i) T.row(m) -= T.row(i);
  simplex_phase(T, basis, n + m);
  const double scale = std::max(1.0, b.cwiseAbs().maxCoeff());
  if (T(m, n + m) < -1e-9 * scale) throw Infeasible("oracle: density caps cannot be met");
  for (int i = 0; i < m; ++i) {
    if (basis[i] < n) continue;
    for (int j = 0; j < n; ++j)
      if (std::abs(T(i, j)) > 1e-9) {
        pivot(T, i, j);
        basis[i] = j;
        break;
      }
  }
  // phase 2
  T.row(m).setZero();
  T.row(m).head(n) = -c.transpose();
  for (int i = 0; i < m; ++i)
    if (basis[i] < n) T.row(m) += c[basis[i]] * T.row(i);
  simplex_phase(T, basis, n);
  Eigen::VectorXd x = Eigen::VectorXd::Zero(n);
  for (int i = 0; i < m; ++i)
    if (basis[i] < n) x[basis[i]] = T(i, n + m);
  return x;
}

}  // namespace detail

struct OracleResult {
  double objective = 0.0;
  std::vector<Eigen::MatrixXd> occupation;  // y^k(s,a), N×M
  std::vector<StochasticPolicy> policies;   // y normalized per state; uniform where unoccupied
};

// Exact LP over occupation measures y^k(s,a) ≥ 0:
//   Σ_a y^k(s,a) − γ Σ_{s',a'} P_{a'}(s',s) y^k(s',a') = φ+^k(s)   (s ∉ S−)
//   Σ_k Σ_a y^k(s,a) ≤ ρ^max(s)
inline OracleResult oracle_constrained_mdp(const std::vector<MdpModel>& models, const Eigen::VectorXd& rho_max) {
  if (models.empty()) throw ConfigError("oracle: no models");
  const int N = models.front().N;
  if (rho_max.size() != N) throw ConfigError("oracle: rho_max has wrong length");
  struct Var { int k, s, a; };
  std::vector<Var> vars;
  for (int k = 0; k < static_cast<int>(models.size()); ++k) {
    models[k].validate();
    for (int s = 0; s < N; ++s)
      if (!models[k].is_sink(s))
        for (int a = 0; a < models[k].M; ++a)
          if (models[k].is_available(s, a)) vars.push_back({k, s, a});
  }
  std::vector<int> capped;
  for (int s = 0; s < N; ++s)
    if (std::isfinite(rho_max[s])) capped.push_back(s);
  const int K = static_cast<int>(models.size());
  const int nv = static_cast<int>(vars.size());
  const int ns = static_cast<int>(capped.size());
  const int rows = K * N + ns;
  Eigen::MatrixXd A = Eigen::MatrixXd::Zero(rows, nv + ns);
  Eigen::VectorXd b = Eigen::VectorXd::Zero(rows), c = Eigen::VectorXd::Zero(nv + ns);
  for (int j = 0; j < nv; ++j) {
    const auto [k, s, a] = vars[j];
    const MdpModel& m = models[k];
    c[j] = m.expected_reward(s, a);
    A(k * N + s, j) += 1.0;
    for (int t = 0; t < N; ++t)
      if (!m.is_sink(t)) A(k * N + t, j) -= m.gamma * m.P[a](s, t);
  }
  for (int k = 0; k < K; ++k)
    for (int s = 0; s < N; ++s) b[k * N + s] = models[k].is_sink(s) ? 0.0 : models[k].phi_plus[s];
  for (int q = 0; q < ns; ++q) {
    const int s = capped[q];
    for (int j = 0; j < nv; ++j)
      if (vars[j].s == s) A(K * N + q, j) = 1.0;
    A(K * N + q, nv + q) = 1.0;
    b[K * N + q] = rho_max[s];
  }
  const Eigen::VectorXd y = detail::solve_lp(A, b, c);

  OracleResult res;
  for (int k = 0; k < K; ++k) res.occupation.push_back(Eigen::MatrixXd::Zero(N, models[k].M));
  for (int j = 0; j < nv; ++j) {
    res.occupation[vars[j].k](vars[j].s, vars[j].a) = y[j];
    res.objective += c[j] * y[j];
  }
  for (int k = 0; k < K; ++k) {
    StochasticPolicy pi = uniform_policy(models[k]);
    for (int s = 0; s < N; ++s) {
      const double tot = res.occupation[k].row(s).sum();
      if (tot > 1e-12) pi.row(s) = res.occupation[k].row(s) / tot;
    }
    res.policies.push_back(pi);
  }
  return res;
}

inline OracleResult oracle_constrained_mdp(const MdpModel& model, const Eigen::VectorXd& rho_max) {
  return oracle_constrained_mdp(std::vector<MdpModel>{model}, rho_max);
}

}  // namespace ddual
