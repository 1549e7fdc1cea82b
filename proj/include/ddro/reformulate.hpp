#pragma once

// Single-level reformulations of the decision-dependent robust problems:
// classic robust dualization, the strong-duality bilevel reformulation and
// (shortest path only) the KKT bilevel reformulation, plus the McCormick and
// big-M passes they are built from.

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "ddro/error.hpp"
#include "ddro/instances.hpp"
#include "ddro/model.hpp"
#include "ddro/problems.hpp"

namespace ddro {

enum class ReformKind { robust_dual, bilevel_duality, bilevel_kkt };

inline std::string_view to_string(ReformKind k) {
  switch (k) {
    case ReformKind::robust_dual: return "robust";
    case ReformKind::bilevel_duality: return "bilevel_duality";
    case ReformKind::bilevel_kkt: return "bilevel_kkt";
  }
  return "?";
}

/// r = x * v for binary x and 0 <= v <= vmax:
///   r <= vmax x,  r <= v,  v - vmax (1 - x) <= r,  r >= 0.
/// v's upper bound is tightened to vmax.
inline VarId mccormick_bin_cont(MilpModel& m, VarId x, VarId v, double vmax, const std::string& name) {
  if (!std::isfinite(vmax) || vmax < 0.0)
    throw Error(ErrorCode::unbounded_factor, "no finite bound for '" + m.var(v).name + "'");
  if (m.var(x).kind != VarKind::binary)
    throw Error(ErrorCode::unsupported_structure, "'" + m.var(x).name + "' is not binary");
  if (m.var(v).lb < 0.0) throw Error(ErrorCode::unsupported_structure, "'" + m.var(v).name + "' may be negative");
  Variable& vv = m.mutable_var(v);
  vv.ub = std::min(vv.ub, vmax);
  const VarId r = m.add_variable(name, 0.0, kInf, VarKind::continuous, VarTag::mccormick_aux, 1);
  m.add_linear_constraint({{r, 1.0}, {x, -vmax}}, Sense::le, 0.0, ConTag::mccormick, name + "_ub_x");
  m.add_linear_constraint({{r, 1.0}, {v, -1.0}}, Sense::le, 0.0, ConTag::mccormick, name + "_ub_v");
  m.add_linear_constraint({{v, 1.0}, {x, vmax}, {r, -1.0}}, Sense::le, vmax, ConTag::mccormick, name + "_lb");
  m.add_product_link(r, x, v);
  return r;
}

/// r = x * u for binary x, u:  -u + r <= 0,  -x + r <= 0,  x + u - r <= 1,  r >= 0.
inline VarId mccormick_bin_bin(MilpModel& m, VarId x, VarId u, const std::string& name, bool binary_aux = true) {
  for (VarId v : {x, u})
    if (m.var(v).kind != VarKind::binary)
      throw Error(ErrorCode::unsupported_structure, "'" + m.var(v).name + "' is not binary");
  const VarId r = m.add_variable(name, 0.0, 1.0, binary_aux ? VarKind::binary : VarKind::continuous,
                                 VarTag::mccormick_aux, 1);
  m.add_linear_constraint({{u, -1.0}, {r, 1.0}}, Sense::le, 0.0, ConTag::mccormick, name + "_ub_u");
  m.add_linear_constraint({{x, -1.0}, {r, 1.0}}, Sense::le, 0.0, ConTag::mccormick, name + "_ub_x");
  m.add_linear_constraint({{x, 1.0}, {u, 1.0}, {r, -1.0}}, Sense::le, 1.0, ConTag::mccormick, name + "_lb");
  m.add_product_link(r, x, u);
  return r;
}

/// mu * g = 0 for 0 <= mu <= M_mu and 0 <= g = g_terms + g_const <= M_g, via a binary z:
///   mu <= M_mu z,  g <= M_g (1 - z).
inline VarId bigM_complementarity(MilpModel& m, VarId mu, const std::vector<Term>& g_terms, double g_const,
                                  double M_mu, double M_g, const std::string& name) {
  if (!std::isfinite(M_mu) || !std::isfinite(M_g) || M_mu < 0.0 || M_g < 0.0)
    throw Error(ErrorCode::missing_bound, "complementarity '" + name + "' needs finite big-M values");
  if (m.var(mu).lb < 0.0) throw Error(ErrorCode::missing_bound, "'" + m.var(mu).name + "' is not nonnegative");
  const VarId z = m.add_variable(name, 0, 1, VarKind::binary, VarTag::compl_aux);
  m.add_linear_constraint({{mu, 1.0}, {z, -M_mu}}, Sense::le, 0.0, ConTag::compl_bigM, name + "_mu");
  std::vector<Term> row = g_terms;
  row.push_back({z, M_g});
  m.add_linear_constraint(std::move(row), Sense::le, M_g - g_const, ConTag::compl_bigM, name + "_g");
  return z;
}

/// Bounds behind every McCormick and big-M constant the builders emit.
struct BigMLedger {
  double pi_max = 0.0;                 // shortest path: max_a d_hat_a; knapsack set: max a_hat / min f
  std::vector<double> lambda_max;      // d_hat_a (robust, duality) or a_hat_i (budgeted knapsack)
  std::vector<double> lambda_plus_max;   // d_hat_a
  std::vector<double> lambda_minus_max;  // max d_hat + d_hat_a
  double budget_slack_max = 0.0;       // Gamma
  double cap_slack_max = 1.0;
  double u_max = 1.0;
};

inline BigMLedger sp_ledger(const SpInstance& inst) {
  BigMLedger L;
  L.pi_max = inst.d_hat.empty() ? 0.0 : *std::max_element(inst.d_hat.begin(), inst.d_hat.end());
  L.lambda_max = inst.d_hat;
  L.lambda_plus_max = inst.d_hat;
  for (double d : inst.d_hat) L.lambda_minus_max.push_back(L.pi_max + d);
  L.budget_slack_max = inst.Gamma;
  return L;
}

inline BigMLedger kp_ledger(const KpInstance& inst) {
  BigMLedger L;
  L.lambda_max = inst.a_hat;
  const double ahat_max = inst.a_hat.empty() ? 0.0 : *std::max_element(inst.a_hat.begin(), inst.a_hat.end());
  if (inst.variant == KpVariant::budgeted) {
    L.pi_max = ahat_max;
    if (inst.budgeted) L.budget_slack_max = inst.budgeted->Gamma;
  } else if (inst.knapsack && !inst.knapsack->f.empty()) {
    const double fmin = *std::min_element(inst.knapsack->f.begin(), inst.knapsack->f.end());
    L.pi_max = ahat_max == 0.0 ? 0.0 : fmin > 0.0 ? ahat_max / fmin : kInf;
  }
  return L;
}

/// How the uncertain knapsack weight row is written in the bilevel model:
/// with the lower-level primal objective (a_bar'x + sum a_hat_i u_i x_i <= d) or
/// the dual objective. `standard` picks primal for the knapsack set and dual
/// for the budgeted set.
enum class WeightRowForm { standard, primal, dual };

struct ReformOptions {
  WeightRowForm weight_row = WeightRowForm::standard;
};

namespace detail {

inline void require_sp(const SpInstance& inst) { require_valid(validate(inst), "shortest path instance"); }

struct SpLeader {
  std::vector<VarId> x, y;
};

// x (hedging) and y (path) binaries plus flow conservation.
inline SpLeader add_sp_leader(MilpModel& m, const SpInstance& inst) {
  SpLeader l;
  for (std::size_t a = 0; a < inst.arcs.size(); ++a)
    l.x.push_back(m.add_variable(indexed("x", a), 0, 1, VarKind::binary, VarTag::hedging));
  for (std::size_t a = 0; a < inst.arcs.size(); ++a)
    l.y.push_back(m.add_variable(indexed("y", a), 0, 1, VarKind::binary, VarTag::decision));
  add_flow_conservation(m, inst, l.y);
  return l;
}

inline std::vector<Term> sp_leader_cost(const SpInstance& inst, const SpLeader& l) {
  std::vector<Term> obj;
  for (std::size_t a = 0; a < inst.arcs.size(); ++a) {
    obj.push_back({l.x[a], inst.c[a]});
    obj.push_back({l.y[a], inst.d_bar[a]});
  }
  return obj;
}

inline VarId add_dual(MilpModel& m, const std::string& name) {
  return m.add_variable(name, 0.0, kInf, VarKind::continuous, VarTag::dual, 1);
}

inline VarId add_uncertainty(MilpModel& m, const std::string& name) {
  return m.add_variable(name, 0.0, kInf, VarKind::continuous, VarTag::uncertainty, 1);
}

}  // namespace detail

/// Classic robust counterpart of the budgeted shortest path problem:
///   min c'x + d_bar'y + Gamma pi + sum lambda_a - sum gamma_a r_a
///   s.t. flow, pi + lambda_a >= d_hat_a y_a, r_a = lambda_a x_a (McCormick, M = d_hat_a).
inline MilpModel build_robust_counterpart(const SpInstance& inst) {
  detail::require_sp(inst);
  const BigMLedger L = sp_ledger(inst);
  MilpModel m("sp_robust");
  const auto l = detail::add_sp_leader(m, inst);
  const VarId pi = detail::add_dual(m, "pi");
  std::vector<VarId> lam;
  for (std::size_t a = 0; a < inst.arcs.size(); ++a) lam.push_back(detail::add_dual(m, indexed("lambda", a)));
  std::vector<Term> obj = detail::sp_leader_cost(inst, l);
  obj.push_back({pi, static_cast<double>(inst.Gamma)});
  for (std::size_t a = 0; a < inst.arcs.size(); ++a) {
    m.add_linear_constraint({{pi, 1.0}, {lam[a], 1.0}, {l.y[a], -inst.d_hat[a]}}, Sense::ge, 0.0,
                            ConTag::dual_feasibility, indexed("dualfeas", a));
    const VarId r = mccormick_bin_cont(m, l.x[a], lam[a], L.lambda_max[a], indexed("r_lx", a));
    obj.push_back({lam[a], 1.0});
    obj.push_back({r, -inst.gamma[a]});
  }
  m.set_objective(Objective{ObjSense::minimize, std::move(obj), {}, 0.0});
  return m;
}

/// Strong-duality bilevel reformulation of the budgeted shortest path problem:
/// primal lower level (budget, caps), dual feasibility and
///   Gamma pi + sum lambda_a - sum gamma_a (lambda x)_a <= sum d_hat_a (u y)_a.
inline MilpModel build_bilevel_duality_sl(const SpInstance& inst) {
  detail::require_sp(inst);
  const BigMLedger L = sp_ledger(inst);
  const std::size_t n = inst.arcs.size();
  MilpModel m("sp_bilevel_duality");
  const auto l = detail::add_sp_leader(m, inst);
  std::vector<VarId> u, lam;
  for (std::size_t a = 0; a < n; ++a) u.push_back(detail::add_uncertainty(m, indexed("u", a)));
  const VarId pi = detail::add_dual(m, "pi");
  for (std::size_t a = 0; a < n; ++a) lam.push_back(detail::add_dual(m, indexed("lambda", a)));

  std::vector<Term> budget;
  for (std::size_t a = 0; a < n; ++a) budget.push_back({u[a], 1.0});
  m.add_linear_constraint(std::move(budget), Sense::le, inst.Gamma, ConTag::uncertainty_set, "budget");
  for (std::size_t a = 0; a < n; ++a)
    m.add_linear_constraint({{u[a], 1.0}, {l.x[a], inst.gamma[a]}}, Sense::le, 1.0, ConTag::uncertainty_set,
                            indexed("cap", a));
  for (std::size_t a = 0; a < n; ++a)
    m.add_linear_constraint({{pi, 1.0}, {lam[a], 1.0}, {l.y[a], -inst.d_hat[a]}}, Sense::ge, 0.0,
                            ConTag::dual_feasibility, indexed("dualfeas", a));
  std::vector<Term> obj = detail::sp_leader_cost(inst, l);
  std::vector<Term> sd{{pi, static_cast<double>(inst.Gamma)}};
  for (std::size_t a = 0; a < n; ++a) {
    const VarId rlx = mccormick_bin_cont(m, l.x[a], lam[a], L.lambda_max[a], indexed("r_lx", a));
    const VarId ruy = mccormick_bin_cont(m, l.y[a], u[a], L.u_max, indexed("r_uy", a));
    sd.push_back({lam[a], 1.0});
    sd.push_back({rlx, -inst.gamma[a]});
    sd.push_back({ruy, -inst.d_hat[a]});
    obj.push_back({ruy, inst.d_hat[a]});
  }
  m.add_linear_constraint(std::move(sd), Sense::le, 0.0, ConTag::strong_duality, "strong_duality");
  m.set_objective(Objective{ObjSense::minimize, std::move(obj), {}, 0.0});
  return m;
}

/// KKT bilevel reformulation of the budgeted shortest path problem:
/// stationarity d_hat_a y_a = pi + lambda+_a - lambda-_a and three big-M
/// complementarity families.
inline MilpModel build_bilevel_kkt_sl(const SpInstance& inst) {
  detail::require_sp(inst);
  const BigMLedger L = sp_ledger(inst);
  const std::size_t n = inst.arcs.size();
  MilpModel m("sp_bilevel_kkt");
  const auto l = detail::add_sp_leader(m, inst);
  std::vector<VarId> u, lp, lm;
  for (std::size_t a = 0; a < n; ++a) u.push_back(detail::add_uncertainty(m, indexed("u", a)));
  const VarId pi = detail::add_dual(m, "pi");
  for (std::size_t a = 0; a < n; ++a) lp.push_back(detail::add_dual(m, indexed("lambda_plus", a)));
  for (std::size_t a = 0; a < n; ++a) lm.push_back(detail::add_dual(m, indexed("lambda_minus", a)));

  std::vector<Term> budget;
  for (std::size_t a = 0; a < n; ++a) budget.push_back({u[a], 1.0});
  m.add_linear_constraint(budget, Sense::le, inst.Gamma, ConTag::uncertainty_set, "budget");
  for (std::size_t a = 0; a < n; ++a)
    m.add_linear_constraint({{u[a], 1.0}, {l.x[a], inst.gamma[a]}}, Sense::le, 1.0, ConTag::uncertainty_set,
                            indexed("cap", a));
  for (std::size_t a = 0; a < n; ++a)
    m.add_linear_constraint({{pi, 1.0}, {lp[a], 1.0}, {lm[a], -1.0}, {l.y[a], -inst.d_hat[a]}}, Sense::eq, 0.0,
                            ConTag::stationarity, indexed("stationarity", a));

  // pi (Gamma - sum u) = 0
  std::vector<Term> slack_budget;
  for (std::size_t a = 0; a < n; ++a) slack_budget.push_back({u[a], -1.0});
  bigM_complementarity(m, pi, slack_budget, inst.Gamma, L.pi_max, L.budget_slack_max, "z_budget");
  for (std::size_t a = 0; a < n; ++a) {
    // lambda+_a (1 - gamma_a x_a - u_a) = 0
    bigM_complementarity(m, lp[a], {{l.x[a], -inst.gamma[a]}, {u[a], -1.0}}, 1.0, L.lambda_plus_max[a],
                         L.cap_slack_max, indexed("z_cap", a));
  }
  for (std::size_t a = 0; a < n; ++a) {
    // lambda-_a u_a = 0
    bigM_complementarity(m, lm[a], {{u[a], 1.0}}, 0.0, L.lambda_minus_max[a], L.u_max, indexed("z_nonneg", a));
  }
  std::vector<Term> obj = detail::sp_leader_cost(inst, l);
  for (std::size_t a = 0; a < n; ++a) {
    const VarId ruy = mccormick_bin_cont(m, l.y[a], u[a], L.u_max, indexed("r_uy", a));
    obj.push_back({ruy, inst.d_hat[a]});
  }
  m.set_objective(Objective{ObjSense::minimize, std::move(obj), {}, 0.0});
  return m;
}

namespace detail {

inline void require_kp(const KpInstance& inst) {
  require_valid(validate(inst), "knapsack instance");
  if (inst.variant == KpVariant::discrete_knapsack)
    throw Error(ErrorCode::discrete_set_unsupported, "discrete knapsack set cannot be dualized");
  if (inst.variant == KpVariant::nominal)
    throw Error(ErrorCode::invalid_argument, "nominal knapsack instance has no uncertainty set");
}

inline WeightRowForm resolve(WeightRowForm f, KpVariant v) {
  if (f != WeightRowForm::standard) return f;
  return v == KpVariant::budgeted ? WeightRowForm::dual : WeightRowForm::primal;
}

struct KpVars {
  std::vector<VarId> x, y;
};

inline KpVars add_kp_leader(MilpModel& m, const KpInstance& inst) {
  KpVars k;
  for (std::size_t i = 0; i < inst.size(); ++i)
    k.x.push_back(m.add_variable(indexed("x", i), 0, 1, VarKind::binary, VarTag::decision));
  if (inst.variant == KpVariant::budgeted)
    for (std::size_t i = 0; i < inst.size(); ++i)
      k.y.push_back(m.add_variable(indexed("y", i), 0, 1, VarKind::binary, VarTag::hedging));
  return k;
}

inline Objective kp_objective(const KpInstance& inst, const KpVars& k) {
  std::vector<Term> obj;
  for (std::size_t i = 0; i < inst.size(); ++i) obj.push_back({k.x[i], inst.c[i]});
  for (std::size_t i = 0; i < k.y.size(); ++i) obj.push_back({k.y[i], -inst.budgeted->h[i]});
  return Objective{ObjSense::maximize, std::move(obj), {}, 0.0};
}

}  // namespace detail

/// Classic robust counterpart of the uncertain knapsack problem.
///   knapsack set:  a_bar'x + sum lambda + b pi - sum w_i (pi x)_i <= d,  f_i pi + lambda_i >= a_hat_i x_i
///   budgeted set:  a_bar'x + Gamma pi + sum lambda - sum gamma_i (lambda y)_i <= d,  pi + lambda_i >= a_hat_i x_i
inline MilpModel build_robust_counterpart(const KpInstance& inst) {
  detail::require_kp(inst);
  const BigMLedger L = kp_ledger(inst);
  const std::size_t n = inst.size();
  MilpModel m(inst.variant == KpVariant::budgeted ? "kp_budgeted_robust" : "kp_knapsack_robust");
  const auto k = detail::add_kp_leader(m, inst);
  const VarId pi = detail::add_dual(m, "pi");
  std::vector<VarId> lam;
  for (std::size_t i = 0; i < n; ++i) lam.push_back(detail::add_dual(m, indexed("lambda", i)));
  std::vector<Term> weight;
  for (std::size_t i = 0; i < n; ++i) weight.push_back({k.x[i], inst.a_bar[i]});
  if (inst.variant == KpVariant::budgeted) {
    weight.push_back({pi, static_cast<double>(inst.budgeted->Gamma)});
    for (std::size_t i = 0; i < n; ++i) {
      const VarId r = mccormick_bin_cont(m, k.y[i], lam[i], L.lambda_max[i], indexed("r_ly", i));
      weight.push_back({lam[i], 1.0});
      weight.push_back({r, -inst.budgeted->gamma[i]});
    }
  } else {
    weight.push_back({pi, inst.knapsack->b});
    for (std::size_t i = 0; i < n; ++i) {
      const VarId r = mccormick_bin_cont(m, k.x[i], pi, L.pi_max, indexed("r_px", i));
      weight.push_back({lam[i], 1.0});
      weight.push_back({r, -inst.knapsack->w[i]});
    }
  }
  m.add_linear_constraint(std::move(weight), Sense::le, inst.d, ConTag::structural, "weight");
  const bool budgeted = inst.variant == KpVariant::budgeted;
  for (std::size_t i = 0; i < n; ++i)
    m.add_linear_constraint({{pi, budgeted ? 1.0 : inst.knapsack->f[i]}, {lam[i], 1.0}, {k.x[i], -inst.a_hat[i]}},
                            Sense::ge, 0.0, ConTag::dual_feasibility, indexed("dualfeas", i));
  m.set_objective(detail::kp_objective(inst, k));
  return m;
}

/// Strong-duality bilevel reformulation of the uncertain knapsack problem.
inline MilpModel build_bilevel_duality_sl(const KpInstance& inst, const ReformOptions& opt = {}) {
  detail::require_kp(inst);
  const BigMLedger L = kp_ledger(inst);
  const std::size_t n = inst.size();
  const bool budgeted = inst.variant == KpVariant::budgeted;
  const WeightRowForm form = detail::resolve(opt.weight_row, inst.variant);
  MilpModel m(budgeted ? "kp_budgeted_bilevel_duality" : "kp_knapsack_bilevel_duality");
  const auto k = detail::add_kp_leader(m, inst);
  std::vector<VarId> u, lam;
  for (std::size_t i = 0; i < n; ++i) u.push_back(detail::add_uncertainty(m, indexed("u", i)));
  const VarId pi = detail::add_dual(m, "pi");
  for (std::size_t i = 0; i < n; ++i) lam.push_back(detail::add_dual(m, indexed("lambda", i)));

  // dual objective (without products), the product terms it needs, and the lower-level value
  std::vector<Term> dual_obj;
  std::vector<Term> primal_value;
  std::vector<Term> weight;
  for (std::size_t i = 0; i < n; ++i) weight.push_back({k.x[i], inst.a_bar[i]});

  std::vector<VarId> rux(n);
  if (budgeted) {
    dual_obj.push_back({pi, static_cast<double>(inst.budgeted->Gamma)});
    for (std::size_t i = 0; i < n; ++i) {
      const VarId rly = mccormick_bin_cont(m, k.y[i], lam[i], L.lambda_max[i], indexed("r_ly", i));
      dual_obj.push_back({lam[i], 1.0});
      dual_obj.push_back({rly, -inst.budgeted->gamma[i]});
    }
  } else {
    dual_obj.push_back({pi, inst.knapsack->b});
    for (std::size_t i = 0; i < n; ++i) {
      const VarId rpx = mccormick_bin_cont(m, k.x[i], pi, L.pi_max, indexed("r_px", i));
      dual_obj.push_back({lam[i], 1.0});
      dual_obj.push_back({rpx, -inst.knapsack->w[i]});
    }
  }
  for (std::size_t i = 0; i < n; ++i) {
    rux[i] = mccormick_bin_cont(m, k.x[i], u[i], L.u_max, indexed("r_ux", i));
    primal_value.push_back({rux[i], inst.a_hat[i]});
  }

  if (form == WeightRowForm::primal)
    weight.insert(weight.end(), primal_value.begin(), primal_value.end());
  else
    weight.insert(weight.end(), dual_obj.begin(), dual_obj.end());
  m.add_linear_constraint(std::move(weight), Sense::le, inst.d, ConTag::structural, "weight");

  if (budgeted) {
    std::vector<Term> budget;
    for (std::size_t i = 0; i < n; ++i) budget.push_back({u[i], 1.0});
    m.add_linear_constraint(std::move(budget), Sense::le, inst.budgeted->Gamma, ConTag::uncertainty_set, "budget");
    for (std::size_t i = 0; i < n; ++i)
      m.add_linear_constraint({{u[i], 1.0}, {k.y[i], inst.budgeted->gamma[i]}}, Sense::le, 1.0,
                              ConTag::uncertainty_set, indexed("cap", i));
  } else {
    std::vector<Term> row;
    for (std::size_t i = 0; i < n; ++i) row.push_back({u[i], inst.knapsack->f[i]});
    for (std::size_t i = 0; i < n; ++i) row.push_back({k.x[i], inst.knapsack->w[i]});
    m.add_linear_constraint(std::move(row), Sense::le, inst.knapsack->b, ConTag::uncertainty_set, "knapsack");
    for (std::size_t i = 0; i < n; ++i)
      m.add_linear_constraint({{u[i], 1.0}}, Sense::le, 1.0, ConTag::uncertainty_set, indexed("ubox", i));
  }
  for (std::size_t i = 0; i < n; ++i)
    m.add_linear_constraint({{pi, budgeted ? 1.0 : inst.knapsack->f[i]}, {lam[i], 1.0}, {k.x[i], -inst.a_hat[i]}},
                            Sense::ge, 0.0, ConTag::dual_feasibility, indexed("dualfeas", i));
  std::vector<Term> sd = dual_obj;
  for (const Term& t : primal_value) sd.push_back({t.var, -t.coef});
  m.add_linear_constraint(std::move(sd), Sense::le, 0.0, ConTag::strong_duality, "strong_duality");
  m.set_objective(detail::kp_objective(inst, k));
  return m;
}

namespace detail {

struct PortfolioVars {
  std::vector<VarId> y, s, x, lam, u;
  VarId pi = 0;
};

inline PortfolioVars add_portfolio_robust_core(MilpModel& m, const PortfolioInstance& p, bool with_u) {
  PortfolioVars v;
  const auto core = add_portfolio_core(m, p);
  v.y = core.y;
  v.s = core.s;
  const auto n = static_cast<std::size_t>(p.N);
  for (std::size_t i = 0; i < n; ++i)
    v.x.push_back(m.add_variable(indexed("x", i), 0, 1, VarKind::continuous, VarTag::hedging, 2));
  if (with_u)
    for (std::size_t i = 0; i < n; ++i) v.u.push_back(add_uncertainty(m, indexed("u", i)));
  v.pi = add_dual(m, "pi");
  for (std::size_t i = 0; i < n; ++i) v.lam.push_back(add_dual(m, indexed("lambda", i)));
  for (std::size_t i = 0; i < n; ++i)
    m.add_linear_constraint({{v.lam[i], 1.0}, {v.pi, 1.0}, {v.y[i], -p.mu_hat[i]}}, Sense::ge, 0.0,
                            ConTag::dual_feasibility, indexed("dualfeas", i));
  return v;
}

}  // namespace detail

/// Classic robust counterpart of the budgeted portfolio problem. The products
/// lambda_i x_i stay symbolic in the objective (continuous x).
inline MilpModel build_robust_counterpart(const PortfolioInstance& inst) {
  detail::require_valid(validate(inst), "portfolio instance");
  MilpModel m("portfolio_robust");
  const auto v = detail::add_portfolio_robust_core(m, inst, false);
  Objective obj{ObjSense::maximize, {}, {}, 0.0};
  for (int i = 0; i < inst.N; ++i) {
    const auto k = static_cast<std::size_t>(i);
    obj.lin.push_back({v.y[k], inst.mu_bar[k]});
    obj.lin.push_back({v.x[k], -inst.c[k]});
    obj.lin.push_back({v.lam[k], -1.0});
    obj.quad.push_back({v.lam[k], v.x[k], inst.gamma[k]});
  }
  obj.lin.push_back({v.pi, -static_cast<double>(inst.Gamma)});
  m.set_objective(std::move(obj));
  return m;
}

/// Strong-duality bilevel reformulation of the budgeted portfolio problem; the
/// products u_i y_i and lambda_i x_i stay symbolic.
inline MilpModel build_bilevel_duality_sl(const PortfolioInstance& inst) {
  detail::require_valid(validate(inst), "portfolio instance");
  MilpModel m("portfolio_bilevel_duality");
  const auto v = detail::add_portfolio_robust_core(m, inst, true);
  const auto n = static_cast<std::size_t>(inst.N);
  std::vector<Term> budget;
  for (std::size_t i = 0; i < n; ++i) budget.push_back({v.u[i], 1.0});
  m.add_linear_constraint(std::move(budget), Sense::le, inst.Gamma, ConTag::uncertainty_set, "budget_u");
  for (std::size_t i = 0; i < n; ++i)
    m.add_linear_constraint({{v.u[i], 1.0}, {v.x[i], inst.gamma[i]}}, Sense::le, 1.0, ConTag::uncertainty_set,
                            indexed("cap", i));
  // sum mu_hat_i u_i y_i - Gamma pi - sum lambda_i + sum gamma_i lambda_i x_i >= 0
  std::vector<QuadTerm> q;
  std::vector<Term> lin{{v.pi, -static_cast<double>(inst.Gamma)}};
  for (std::size_t i = 0; i < n; ++i) {
    q.push_back({v.u[i], v.y[i], inst.mu_hat[i]});
    q.push_back({v.lam[i], v.x[i], inst.gamma[i]});
    lin.push_back({v.lam[i], -1.0});
  }
  m.add_quad_constraint(std::move(q), std::move(lin), Sense::ge, 0.0, ConTag::strong_duality, "strong_duality");
  Objective obj{ObjSense::maximize, {}, {}, 0.0};
  for (std::size_t i = 0; i < n; ++i) {
    obj.lin.push_back({v.y[i], inst.mu_bar[i]});
    obj.lin.push_back({v.x[i], -inst.c[i]});
    obj.quad.push_back({v.u[i], v.y[i], -inst.mu_hat[i]});
  }
  m.set_objective(std::move(obj));
  return m;
}

/// Dispatch on an instance file. Discrete sets are rejected.
inline MilpModel build_reformulation(const InstanceFile& f, ReformKind kind, const ReformOptions& opt = {}) {
  if (f.uncertainty == UncertaintyKind::discrete_knapsack)
    throw Error(ErrorCode::discrete_set_unsupported, "discrete uncertainty needs the bilevel-discrete pathway");
  if (f.uncertainty == UncertaintyKind::nominal)
    throw Error(ErrorCode::invalid_argument, "nominal instance has no uncertainty set");
  if (const auto* sp = std::get_if<SpInstance>(&f.data)) {
    switch (kind) {
      case ReformKind::robust_dual: return build_robust_counterpart(*sp);
      case ReformKind::bilevel_duality: return build_bilevel_duality_sl(*sp);
      case ReformKind::bilevel_kkt: return build_bilevel_kkt_sl(*sp);
    }
  }
  if (kind == ReformKind::bilevel_kkt)
    throw Error(ErrorCode::unsupported_structure, "the KKT reformulation is built for shortest path only");
  if (const auto* kp = std::get_if<KpInstance>(&f.data))
    return kind == ReformKind::robust_dual ? build_robust_counterpart(*kp) : build_bilevel_duality_sl(*kp, opt);
  const auto& p = std::get<PortfolioInstance>(f.data);
  return kind == ReformKind::robust_dual ? build_robust_counterpart(p) : build_bilevel_duality_sl(p);
}

}  // namespace ddro
