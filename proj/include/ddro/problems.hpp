#pragma once

// Nominal models and fixed-decision robust evaluation.

#include <cmath>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ddro/error.hpp"
#include "ddro/instances.hpp"
#include "ddro/model.hpp"
#include "ddro/uncertainty.hpp"

namespace ddro {

inline std::string indexed(const char* prefix, std::size_t i) { return std::string(prefix) + "_" + std::to_string(i); }

/// Decision vectors of any application. Shortest path: x hedging, y path.
/// Knapsack: x items, y hedging (budgeted only). Portfolio: y weights, x hedging, s support.
struct Decisions {
  std::vector<double> x;
  std::vector<double> y;
  std::vector<double> s;
};

namespace detail {

inline std::vector<double> pick(const MilpModel& m, std::span<const double> values, const char* prefix, std::size_t n) {
  std::vector<double> out;
  for (std::size_t i = 0; i < n; ++i) {
    auto id = m.find_variable(indexed(prefix, i));
    if (!id) return {};
    out.push_back(values[*id]);
  }
  return out;
}

// Flow rows  sum_in y - sum_out y = +1 (t), -1 (s), 0 (else).
inline void add_flow_conservation(MilpModel& m, const SpInstance& inst, const std::vector<VarId>& y) {
  std::vector<std::vector<Term>> rows(static_cast<std::size_t>(inst.num_nodes));
  for (std::size_t a = 0; a < inst.arcs.size(); ++a) {
    rows[static_cast<std::size_t>(inst.arcs[a].head)].push_back({y[a], 1.0});
    rows[static_cast<std::size_t>(inst.arcs[a].tail)].push_back({y[a], -1.0});
  }
  for (int v = 0; v < inst.num_nodes; ++v) {
    const double rhs = v == inst.target ? 1.0 : v == inst.source ? -1.0 : 0.0;
    m.add_linear_constraint(std::move(rows[static_cast<std::size_t>(v)]), Sense::eq, rhs, ConTag::structural,
                            indexed("flow", static_cast<std::size_t>(v)));
  }
}

inline void require_valid(const std::vector<std::string>& problems, const char* what) {
  if (!problems.empty()) throw Error(ErrorCode::invalid_argument, std::string(what) + ": " + problems.front());
}

}  // namespace detail

/// Rounded decisions read back from a solved model by variable name.
inline Decisions extract_decisions(const MilpModel& m, std::span<const double> values, std::size_t n) {
  Decisions d;
  d.x = detail::pick(m, values, "x", n);
  d.y = detail::pick(m, values, "y", n);
  d.s = detail::pick(m, values, "s", n);
  for (auto* v : {&d.x, &d.y, &d.s})
    for (double& e : *v)
      if (std::abs(e - std::round(e)) < 1e-6) e = std::round(e);
  return d;
}

/// min sum d_bar_a y_a  s.t. flow conservation, y binary.
inline MilpModel build_sp_nominal(const SpInstance& inst) {
  detail::require_valid(validate(inst), "shortest path instance");
  MilpModel m("sp_nominal");
  std::vector<VarId> y;
  std::vector<Term> obj;
  for (std::size_t a = 0; a < inst.arcs.size(); ++a) {
    y.push_back(m.add_variable(indexed("y", a), 0, 1, VarKind::binary, VarTag::decision));
    obj.push_back({y.back(), inst.d_bar[a]});
  }
  detail::add_flow_conservation(m, inst, y);
  m.set_objective(Objective{ObjSense::minimize, std::move(obj), {}, 0.0});
  return m;
}

/// max c'x  s.t. a_bar'x <= d, x binary.
inline MilpModel build_kp_nominal(const KpInstance& inst) {
  detail::require_valid(validate(inst), "knapsack instance");
  MilpModel m("kp_nominal");
  std::vector<Term> obj, row;
  for (std::size_t i = 0; i < inst.size(); ++i) {
    const VarId x = m.add_variable(indexed("x", i), 0, 1, VarKind::binary, VarTag::decision);
    obj.push_back({x, inst.c[i]});
    row.push_back({x, inst.a_bar[i]});
  }
  m.add_linear_constraint(std::move(row), Sense::le, inst.d, ConTag::structural, "capacity");
  m.set_objective(Objective{ObjSense::maximize, std::move(obj), {}, 0.0});
  return m;
}

namespace detail {

inline std::vector<QuadTerm> variance_terms(const PortfolioInstance& p, const std::vector<VarId>& y) {
  std::vector<QuadTerm> q;
  for (int i = 0; i < p.N; ++i)
    for (int j = i; j < p.N; ++j) {
      const double c = (i == j ? 1.0 : 2.0) * p.sigma(i, j);
      if (c != 0.0) q.push_back({y[static_cast<std::size_t>(i)], y[static_cast<std::size_t>(j)], c});
    }
  return q;
}

struct PortfolioCore {
  std::vector<VarId> y, s;
};

// y >= 0, s binary, variance, budget, cardinality and linking rows.
inline PortfolioCore add_portfolio_core(MilpModel& m, const PortfolioInstance& p, double y_ub = kInf) {
  PortfolioCore c;
  const auto n = static_cast<std::size_t>(p.N);
  for (std::size_t i = 0; i < n; ++i)
    c.y.push_back(m.add_variable(indexed("y", i), 0, y_ub, VarKind::continuous, VarTag::decision, 1));
  for (std::size_t i = 0; i < n; ++i) c.s.push_back(m.add_variable(indexed("s", i), 0, 1, VarKind::binary, VarTag::decision));
  m.add_quad_constraint(variance_terms(p, c.y), {}, Sense::le, p.V0, ConTag::structural, "variance");
  std::vector<Term> budget, card;
  for (std::size_t i = 0; i < n; ++i) {
    budget.push_back({c.y[i], 1.0});
    card.push_back({c.s[i], 1.0});
  }
  m.add_linear_constraint(std::move(budget), Sense::eq, 1.0, ConTag::structural, "budget");
  m.add_linear_constraint(std::move(card), Sense::le, p.k, ConTag::structural, "cardinality");
  for (std::size_t i = 0; i < n; ++i)
    m.add_linear_constraint({{c.y[i], 1.0}, {c.s[i], -1.0}}, Sense::le, 0.0, ConTag::structural, indexed("link", i));
  return c;
}

}  // namespace detail

/// max mu_bar'y  s.t. y'Sigma y <= V0, sum y = 1, sum s <= k, y_i <= s_i.
inline MilpModel build_portfolio_nominal(const PortfolioInstance& inst) {
  detail::require_valid(validate(inst), "portfolio instance");
  MilpModel m("portfolio_nominal");
  const auto core = detail::add_portfolio_core(m, inst);
  std::vector<Term> obj;
  for (std::size_t i = 0; i < core.y.size(); ++i) obj.push_back({core.y[i], inst.mu_bar[i]});
  m.set_objective(Objective{ObjSense::maximize, std::move(obj), {}, 0.0});
  return m;
}

/// Result of evaluating fixed decisions against the worst case.
///   shortest path / portfolio: value = robust objective.
///   knapsack: value = worst-case weight, objective = c'x - h'y, feasible = (value <= d).
struct RobustEvaluation {
  double value = 0.0;
  double objective = 0.0;
  bool feasible = true;
};

namespace detail {

inline void require_binary(const std::vector<double>& v, std::size_t n, const char* what) {
  if (v.size() != n) throw Error(ErrorCode::dimension_mismatch, std::string(what) + " has wrong length");
  for (double e : v)
    if (e != 0.0 && e != 1.0) throw Error(ErrorCode::infeasible_decision, std::string(what) + " is not binary");
}

inline double dot(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

inline std::vector<double> hadamard(const std::vector<double>& a, const std::vector<double>& b) {
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] * b[i];
  return out;
}

}  // namespace detail

/// Robust objective of a fixed hedge/path pair. `discrete` selects the binary
/// knapsack set carried by the instance instead of the budgeted set.
inline RobustEvaluation evaluate_robust_objective(const SpInstance& inst, const Decisions& d, bool discrete = false) {
  const std::size_t m = inst.arcs.size();
  detail::require_binary(d.x, m, "x");
  detail::require_binary(d.y, m, "y");
  std::vector<double> balance(static_cast<std::size_t>(inst.num_nodes), 0.0);
  for (std::size_t a = 0; a < m; ++a) {
    balance[static_cast<std::size_t>(inst.arcs[a].head)] += d.y[a];
    balance[static_cast<std::size_t>(inst.arcs[a].tail)] -= d.y[a];
  }
  for (int v = 0; v < inst.num_nodes; ++v) {
    const double rhs = v == inst.target ? 1.0 : v == inst.source ? -1.0 : 0.0;
    if (balance[static_cast<std::size_t>(v)] != rhs)
      throw Error(ErrorCode::infeasible_decision, "y violates flow conservation at node " + std::to_string(v));
  }
  const std::vector<double> coeffs = detail::hadamard(inst.d_hat, d.y);
  const double base = detail::dot(inst.c, d.x) + detail::dot(inst.d_bar, d.y);
  double worst;
  if (discrete) {
    if (!inst.discrete) throw Error(ErrorCode::invalid_argument, "instance has no discrete uncertainty data");
    const KnapsackSet ks{inst.discrete->f, inst.discrete->b, inst.discrete->w, KnapsackMode::discrete};
    const auto wc = worst_case_discrete_dp(ks.f, budget_rhs(ks, d.x), coeffs);
    if (!wc.feasible) throw Error(ErrorCode::infeasible_decision, "b(x) < 0: uncertainty set is empty");
    worst = wc.value;
  } else {
    worst = worst_case_budgeted_greedy(inst.Gamma, budgeted_caps(inst.budgeted_set(), d.x), coeffs);
  }
  return RobustEvaluation{base + worst, base + worst, true};
}

inline RobustEvaluation evaluate_robust_objective(const KpInstance& inst, const Decisions& d) {
  const std::size_t n = inst.size();
  detail::require_binary(d.x, n, "x");
  const std::vector<double> coeffs = detail::hadamard(inst.a_hat, d.x);
  double worst = 0.0;
  double objective = detail::dot(inst.c, d.x);
  switch (inst.variant) {
    case KpVariant::nominal: break;
    case KpVariant::budgeted: {
      detail::require_binary(d.y, n, "y");
      const BudgetedSet bs{inst.budgeted->Gamma, inst.budgeted->gamma, {}};
      worst = worst_case_budgeted_greedy(bs.Gamma, budgeted_caps(bs, d.y), coeffs);
      objective -= detail::dot(inst.budgeted->h, d.y);
      break;
    }
    case KpVariant::continuous_knapsack: {
      const KnapsackSet ks{inst.knapsack->f, inst.knapsack->b, inst.knapsack->w, KnapsackMode::continuous};
      const double cap = budget_rhs(ks, d.x);
      if (cap < -1e-9) throw Error(ErrorCode::infeasible_decision, "b(x) < 0: uncertainty set is empty");
      worst = worst_case_knapsack_greedy(ks.f, std::max(cap, 0.0), coeffs);
      break;
    }
    case KpVariant::discrete_knapsack: {
      const KnapsackSet ks{inst.knapsack->f, inst.knapsack->b, inst.knapsack->w, KnapsackMode::discrete};
      const auto wc = worst_case_discrete_dp(ks.f, budget_rhs(ks, d.x), coeffs);
      if (!wc.feasible) throw Error(ErrorCode::infeasible_decision, "b(x) < 0: uncertainty set is empty");
      worst = wc.value;
      break;
    }
  }
  const double weight = detail::dot(inst.a_bar, d.x) + worst;
  return RobustEvaluation{weight, objective, weight <= inst.d + 1e-9};
}

inline RobustEvaluation evaluate_robust_objective(const PortfolioInstance& inst, const Decisions& d,
                                                  bool discrete = false) {
  const auto n = static_cast<std::size_t>(inst.N);
  if (d.y.size() != n || d.x.size() != n) throw Error(ErrorCode::dimension_mismatch, "portfolio decisions");
  double total = 0.0, var = 0.0;
  std::size_t support = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (d.y[i] < -1e-9) throw Error(ErrorCode::infeasible_decision, "negative weight");
    if (d.x[i] < -1e-9 || d.x[i] > 1 + 1e-9) throw Error(ErrorCode::infeasible_decision, "hedge outside [0,1]");
    total += d.y[i];
    if (d.y[i] > 1e-9) ++support;
    for (std::size_t j = 0; j < n; ++j) var += d.y[i] * inst.Sigma[i * n + j] * d.y[j];
  }
  if (std::abs(total - 1.0) > 1e-6) throw Error(ErrorCode::infeasible_decision, "weights do not sum to 1");
  if (support > static_cast<std::size_t>(inst.k)) throw Error(ErrorCode::infeasible_decision, "cardinality exceeded");
  if (var > inst.V0 * (1 + 1e-6)) throw Error(ErrorCode::infeasible_decision, "variance limit exceeded");
  const std::vector<double> coeffs = detail::hadamard(inst.mu_hat, d.y);
  double worst;
  if (discrete) {
    if (!inst.discrete) throw Error(ErrorCode::invalid_argument, "instance has no discrete uncertainty data");
    const KnapsackSet ks{inst.discrete->f, inst.discrete->b, inst.discrete->w, KnapsackMode::discrete};
    const auto wc = worst_case_discrete_dp(ks.f, budget_rhs(ks, d.x), coeffs);
    if (!wc.feasible) throw Error(ErrorCode::infeasible_decision, "b(x) < 0: uncertainty set is empty");
    worst = wc.value;
  } else {
    const BudgetedSet bs{inst.Gamma, inst.gamma, {}};
    worst = worst_case_budgeted_greedy(inst.Gamma, budgeted_caps(bs, d.x), coeffs);
  }
  const double value = detail::dot(inst.mu_bar, d.y) - detail::dot(inst.c, d.x) - worst;
  return RobustEvaluation{value, value, true};
}

}  // namespace ddro
