#pragma once

// Decision-dependent uncertainty sets and worst-case oracles.
//
//   budgeted:  { u : sum u <= Gamma, 0 <= u_i <= 1 - gamma_i x_i }
//   knapsack:  { u : f'u <= b - w'x, 0 <= u <= 1 }   (u binary in discrete mode)
//
// The LP builders feed the simplex; the greedy and DP routines are closed-form
// oracles used to cross-check it.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "ddro/error.hpp"
#include "ddro/model.hpp"

namespace ddro {

struct BudgetedSet {
  int Gamma = 0;
  std::vector<double> gamma;
  std::vector<VarId> dependence;  // hedging variables in the owning model, if any

  std::size_t dim() const { return gamma.size(); }
};

enum class KnapsackMode { continuous, discrete };

struct KnapsackSet {
  std::vector<double> f;
  double b = 0.0;
  std::vector<double> w;
  KnapsackMode mode = KnapsackMode::continuous;

  std::size_t dim() const { return f.size(); }
};

using UncertaintySet = std::variant<BudgetedSet, KnapsackSet>;

inline std::size_t dim(const UncertaintySet& set) {
  return std::visit([](const auto& s) { return s.dim(); }, set);
}

namespace detail {
inline void require_dim(std::size_t expected, std::size_t got, const char* what) {
  if (expected != got)
    throw Error(ErrorCode::dimension_mismatch,
                std::string(what) + ": expected " + std::to_string(expected) + ", got " + std::to_string(got));
}
}  // namespace detail

/// b(x) = b - w'x.
inline double budget_rhs(const KnapsackSet& set, std::span<const double> x) {
  detail::require_dim(set.w.size(), x.size(), "budget_rhs");
  double r = set.b;
  for (std::size_t i = 0; i < x.size(); ++i) r -= set.w[i] * x[i];
  return r;
}

/// Caps 1 - gamma_i x_i of the budgeted set at decision x.
inline std::vector<double> budgeted_caps(const BudgetedSet& set, std::span<const double> x) {
  detail::require_dim(set.dim(), x.size(), "budgeted_caps");
  std::vector<double> caps(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) caps[i] = 1.0 - set.gamma[i] * x[i];
  return caps;
}

inline bool membership(const UncertaintySet& set, std::span<const double> x, std::span<const double> u,
                       double tol = 1e-9) {
  detail::require_dim(dim(set), u.size(), "membership(u)");
  if (const auto* bs = std::get_if<BudgetedSet>(&set)) {
    const std::vector<double> caps = budgeted_caps(*bs, x);
    double sum = 0.0;
    for (std::size_t i = 0; i < u.size(); ++i) {
      if (u[i] < -tol || u[i] > caps[i] + tol) return false;
      sum += u[i];
    }
    return sum <= bs->Gamma + tol;
  }
  const auto& ks = std::get<KnapsackSet>(set);
  const double cap = budget_rhs(ks, x);
  double load = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    if (u[i] < -tol || u[i] > 1.0 + tol) return false;
    if (ks.mode == KnapsackMode::discrete && std::abs(u[i] - std::round(u[i])) > tol) return false;
    load += ks.f[i] * u[i];
  }
  return load <= cap + tol;
}

/// Inner maximization  max coeffs'u  over the set at fixed decision x, as an LP.
inline MilpModel worst_case_lp(const UncertaintySet& set, std::span<const double> x, std::span<const double> coeffs) {
  const std::size_t n = dim(set);
  detail::require_dim(n, coeffs.size(), "worst_case_lp(coeffs)");
  MilpModel m("worst_case_primal");
  std::vector<Term> obj;
  if (const auto* bs = std::get_if<BudgetedSet>(&set)) {
    const std::vector<double> caps = budgeted_caps(*bs, x);
    std::vector<Term> budget;
    for (std::size_t i = 0; i < n; ++i) {
      const VarId u = m.add_variable("u_" + std::to_string(i), 0.0, kInf, VarKind::continuous, VarTag::uncertainty, 1);
      m.add_linear_constraint({{u, 1.0}}, Sense::le, caps[i], ConTag::uncertainty_set, "cap_" + std::to_string(i));
      budget.push_back({u, 1.0});
      obj.push_back({u, coeffs[i]});
    }
    m.add_linear_constraint(std::move(budget), Sense::le, bs->Gamma, ConTag::uncertainty_set, "budget");
  } else {
    const auto& ks = std::get<KnapsackSet>(set);
    if (ks.mode == KnapsackMode::discrete)
      throw Error(ErrorCode::discrete_set_unsupported, "worst_case_lp needs a continuous set");
    std::vector<Term> row;
    for (std::size_t i = 0; i < n; ++i) {
      const VarId u = m.add_variable("u_" + std::to_string(i), 0.0, 1.0, VarKind::continuous, VarTag::uncertainty, 2);
      row.push_back({u, ks.f[i]});
      obj.push_back({u, coeffs[i]});
    }
    m.add_linear_constraint(std::move(row), Sense::le, budget_rhs(ks, x), ConTag::uncertainty_set, "knapsack");
  }
  m.set_objective(Objective{ObjSense::maximize, std::move(obj), {}, 0.0});
  return m;
}

/// LP dual of worst_case_lp:
///   budgeted:  min Gamma pi + sum cap_i lambda_i   s.t. pi + lambda_i >= coeff_i
///   knapsack:  min b(x) pi + sum lambda_i          s.t. f_i pi + lambda_i >= coeff_i
inline MilpModel worst_case_dual_lp(const UncertaintySet& set, std::span<const double> x,
                                    std::span<const double> coeffs) {
  const std::size_t n = dim(set);
  detail::require_dim(n, coeffs.size(), "worst_case_dual_lp(coeffs)");
  MilpModel m("worst_case_dual");
  const VarId pi = m.add_variable("pi", 0.0, kInf, VarKind::continuous, VarTag::dual, 1);
  std::vector<Term> obj;
  if (const auto* bs = std::get_if<BudgetedSet>(&set)) {
    const std::vector<double> caps = budgeted_caps(*bs, x);
    obj.push_back({pi, static_cast<double>(bs->Gamma)});
    for (std::size_t i = 0; i < n; ++i) {
      const VarId lam = m.add_variable("lambda_" + std::to_string(i), 0.0, kInf, VarKind::continuous, VarTag::dual, 1);
      m.add_linear_constraint({{pi, 1.0}, {lam, 1.0}}, Sense::ge, coeffs[i], ConTag::dual_feasibility);
      obj.push_back({lam, caps[i]});
    }
  } else {
    const auto& ks = std::get<KnapsackSet>(set);
    if (ks.mode == KnapsackMode::discrete)
      throw Error(ErrorCode::discrete_set_unsupported, "worst_case_dual_lp needs a continuous set");
    obj.push_back({pi, budget_rhs(ks, x)});
    for (std::size_t i = 0; i < n; ++i) {
      const VarId lam = m.add_variable("lambda_" + std::to_string(i), 0.0, kInf, VarKind::continuous, VarTag::dual, 1);
      m.add_linear_constraint({{pi, ks.f[i]}, {lam, 1.0}}, Sense::ge, coeffs[i], ConTag::dual_feasibility);
      obj.push_back({lam, 1.0});
    }
  }
  m.set_objective(Objective{ObjSense::minimize, std::move(obj), {}, 0.0});
  return m;
}

/// max sum coeff_i u_i  s.t.  sum u <= budget, 0 <= u_i <= cap_i, by filling
/// caps in decreasing coefficient order (ties: lower index first).
inline double worst_case_budgeted_greedy(double budget, std::span<const double> caps, std::span<const double> coeffs,
                                         std::vector<double>* u_out = nullptr) {
  detail::require_dim(caps.size(), coeffs.size(), "worst_case_budgeted_greedy");
  std::vector<std::size_t> order(caps.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return coeffs[a] > coeffs[b]; });
  std::vector<double> u(caps.size(), 0.0);
  double left = std::max(budget, 0.0);
  double value = 0.0;
  for (std::size_t i : order) {
    if (left <= 0.0 || coeffs[i] <= 0.0) break;
    const double take = std::min(std::max(caps[i], 0.0), left);
    u[i] = take;
    left -= take;
    value += take * coeffs[i];
  }
  if (u_out) *u_out = std::move(u);
  return value;
}

/// Fractional knapsack: max coeffs'u  s.t. f'u <= cap, 0 <= u <= 1, by ratio order.
inline double worst_case_knapsack_greedy(std::span<const double> f, double cap, std::span<const double> coeffs,
                                         std::vector<double>* u_out = nullptr) {
  detail::require_dim(f.size(), coeffs.size(), "worst_case_knapsack_greedy");
  const std::size_t n = f.size();
  std::vector<double> u(n, 0.0);
  double value = 0.0;
  double left = cap;
  std::vector<std::size_t> order;
  for (std::size_t i = 0; i < n; ++i) {
    if (coeffs[i] <= 0.0) continue;
    if (f[i] <= 0.0) {
      u[i] = 1.0;  // free item
      value += coeffs[i];
    } else {
      order.push_back(i);
    }
  }
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return coeffs[a] * f[b] > coeffs[b] * f[a]; });
  for (std::size_t i : order) {
    if (left <= 0.0) break;
    const double take = std::min(1.0, left / f[i]);
    u[i] = take;
    left -= take * f[i];
    value += take * coeffs[i];
  }
  if (u_out) *u_out = std::move(u);
  return value;
}

struct DiscreteWorstCase {
  double value = 0.0;
  std::vector<int> u;
  bool feasible = true;  // false when the capacity is negative (empty set)
};

namespace detail {

inline bool all_integral(std::span<const double> f) {
  return std::all_of(f.begin(), f.end(), [](double v) { return v >= 0.0 && std::abs(v - std::round(v)) < 1e-9; });
}

// Depth-first 0/1 knapsack with the fractional relaxation as bound.
inline DiscreteWorstCase knapsack_branch_and_bound(std::span<const double> f, double cap,
                                                   std::span<const double> coeffs) {
  const std::size_t n = f.size();
  DiscreteWorstCase best{0.0, std::vector<int>(n, 0), true};
  std::vector<std::size_t> items;
  double base = 0.0;
  std::vector<int> cur(n, 0);
  for (std::size_t i = 0; i < n; ++i) {
    if (coeffs[i] <= 0.0) continue;
    if (f[i] <= 0.0) {
      cur[i] = 1;
      base += coeffs[i];
    } else {
      items.push_back(i);
    }
  }
  std::stable_sort(items.begin(), items.end(),
                   [&](std::size_t a, std::size_t b) { return coeffs[a] * f[b] > coeffs[b] * f[a]; });
  best.value = base;
  best.u = cur;
  auto bound = [&](std::size_t k, double left, double val) {
    for (; k < items.size(); ++k) {
      const std::size_t i = items[k];
      if (f[i] <= left) {
        left -= f[i];
        val += coeffs[i];
      } else {
        return val + coeffs[i] * left / f[i];
      }
    }
    return val;
  };
  auto rec = [&](auto&& self, std::size_t k, double left, double val) -> void {
    if (val > best.value) {
      best.value = val;
      best.u = cur;
    }
    if (k == items.size() || bound(k, left, val) <= best.value) return;
    const std::size_t i = items[k];
    if (f[i] <= left + 1e-12) {
      cur[i] = 1;
      self(self, k + 1, left - f[i], val + coeffs[i]);
      cur[i] = 0;
    }
    self(self, k + 1, left, val);
  };
  rec(rec, 0, cap, base);
  return best;
}

}  // namespace detail

/// 0/1 knapsack  max coeffs'u  s.t. f'u <= cap, u binary. Dynamic programming
/// over floor(cap) when f is integral (n <= 64, cap <= 1e6), otherwise
/// depth-first branch-and-bound. Negative capacity yields value 0, u = 0 and
/// feasible = false.
inline DiscreteWorstCase worst_case_discrete_dp(std::span<const double> f, double cap, std::span<const double> coeffs) {
  detail::require_dim(f.size(), coeffs.size(), "worst_case_discrete_dp");
  const std::size_t n = f.size();
  if (cap < -1e-9) return DiscreteWorstCase{0.0, std::vector<int>(n, 0), false};
  cap = std::max(cap, 0.0);
  if (!detail::all_integral(f) || n > 64 || cap > 1e6) return detail::knapsack_branch_and_bound(f, cap, coeffs);

  const auto C = static_cast<std::size_t>(std::floor(cap + 1e-9));
  std::vector<double> best(C + 1, 0.0);
  std::vector<std::vector<char>> take(n, std::vector<char>(C + 1, 0));
  for (std::size_t i = 0; i < n; ++i) {
    if (coeffs[i] <= 0.0) continue;
    const auto wi = static_cast<std::size_t>(std::llround(f[i]));
    if (wi > C) continue;
    for (std::size_t c = C + 1; c-- > wi;) {
      const double cand = best[c - wi] + coeffs[i];
      if (cand > best[c]) {
        best[c] = cand;
        take[i][c] = 1;
      }
    }
  }
  DiscreteWorstCase out{best[C], std::vector<int>(n, 0), true};
  std::size_t c = C;
  for (std::size_t i = n; i-- > 0;) {
    if (take[i][c]) {
      out.u[i] = 1;
      c -= static_cast<std::size_t>(std::llround(f[i]));
    }
  }
  return out;
}

}  // namespace ddro
