#pragma once

// Discrete knapsack uncertainty as a bilevel problem: the follower picks the
// binary scenario u maximizing the leader's uncertain cost subject to
// f'u <= b - w'x. Products of leader variables and u are linearized with
// McCormick inequalities either in both levels or in the lower level only.

#include <chrono>
#include <filesystem>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "ddro/instances.hpp"
#include "ddro/io.hpp"
#include "ddro/milp.hpp"
#include "ddro/model.hpp"
#include "ddro/problems.hpp"
#include "ddro/reformulate.hpp"
#include "ddro/uncertainty.hpp"

namespace ddro {

namespace detail {

inline const KnapsackData& require_discrete(const std::optional<KnapsackData>& k, std::size_t n, const char* what) {
  if (!k) throw Error(ErrorCode::invalid_argument, std::string(what) + " carries no discrete knapsack data");
  if (k->f.size() != n || k->w.size() != n)
    throw Error(ErrorCode::dimension_mismatch, std::string(what) + ": knapsack data has the wrong length");
  return *k;
}

// Follower binaries u and the row f'u + w'x <= b.
inline std::vector<VarId> add_follower(BilevelModel& bm, const KnapsackData& k, const std::vector<VarId>& x) {
  std::vector<VarId> u;
  for (std::size_t i = 0; i < k.f.size(); ++i) {
    u.push_back(bm.base.add_variable(indexed("u", i), 0, 1, VarKind::binary, VarTag::uncertainty));
    bm.lower_vars.insert(u.back());
  }
  std::vector<Term> row;
  for (std::size_t i = 0; i < u.size(); ++i) row.push_back({u[i], k.f[i]});
  for (std::size_t i = 0; i < x.size(); ++i) row.push_back({x[i], k.w[i]});
  bm.lower_cons.insert(
      bm.base.add_linear_constraint(std::move(row), Sense::le, k.b, ConTag::uncertainty_set, "knapsack"));
  return u;
}

}  // namespace detail

/// Shortest path with discrete knapsack uncertainty:
///   min c'x + d_bar'y + sum d_hat_a u_a y_a   s.t. flow, u in argmax { sum d_hat_a y_a u_a : f'u <= b - w'x }.
inline BilevelModel build_bilevel_discrete(const SpInstance& inst) {
  detail::require_valid(validate(inst), "shortest path instance");
  const auto& k = detail::require_discrete(inst.discrete, inst.arcs.size(), "shortest path instance");
  BilevelModel bm;
  bm.base.set_name("sp_bilevel_discrete");
  const auto l = detail::add_sp_leader(bm.base, inst);
  const auto u = detail::add_follower(bm, k, l.x);
  Objective obj{ObjSense::minimize, detail::sp_leader_cost(inst, l), {}, 0.0};
  for (std::size_t a = 0; a < inst.arcs.size(); ++a) {
    obj.quad.push_back({l.y[a], u[a], inst.d_hat[a]});
    bm.lower_objective.quad.push_back({l.y[a], u[a], inst.d_hat[a]});
  }
  bm.base.set_objective(std::move(obj));
  return bm;
}

/// Knapsack with discrete knapsack uncertainty:
///   max c'x  s.t. a_bar'x + sum a_hat_i x_i u_i <= d,  u in argmax { sum a_hat_i x_i u_i : f'u <= b - w'x }.
inline BilevelModel build_bilevel_discrete(const KpInstance& inst) {
  detail::require_valid(validate(inst), "knapsack instance");
  if (inst.variant != KpVariant::discrete_knapsack)
    throw Error(ErrorCode::invalid_argument, "knapsack instance is not of the discrete knapsack variant");
  const auto& k = detail::require_discrete(inst.knapsack, inst.size(), "knapsack instance");
  BilevelModel bm;
  bm.base.set_name("kp_bilevel_discrete");
  std::vector<VarId> x;
  for (std::size_t i = 0; i < inst.size(); ++i)
    x.push_back(bm.base.add_variable(indexed("x", i), 0, 1, VarKind::binary, VarTag::decision));
  const auto u = detail::add_follower(bm, k, x);
  std::vector<Term> lin;
  std::vector<QuadTerm> q;
  for (std::size_t i = 0; i < x.size(); ++i) {
    lin.push_back({x[i], inst.a_bar[i]});
    q.push_back({x[i], u[i], inst.a_hat[i]});
    bm.lower_objective.quad.push_back({x[i], u[i], inst.a_hat[i]});
  }
  bm.base.add_quad_constraint(std::move(q), std::move(lin), Sense::le, inst.d, ConTag::structural, "weight");
  std::vector<Term> obj;
  for (std::size_t i = 0; i < x.size(); ++i) obj.push_back({x[i], inst.c[i]});
  bm.base.set_objective(Objective{ObjSense::maximize, std::move(obj), {}, 0.0});
  return bm;
}

/// Portfolio with discrete knapsack uncertainty; the variance constraint stays
/// quadratic and y is bounded by 1 (implied by the budget row).
inline BilevelModel build_bilevel_discrete(const PortfolioInstance& inst) {
  detail::require_valid(validate(inst), "portfolio instance");
  const auto& k = detail::require_discrete(inst.discrete, static_cast<std::size_t>(inst.N), "portfolio instance");
  BilevelModel bm;
  bm.base.set_name("portfolio_bilevel_discrete");
  const auto core = detail::add_portfolio_core(bm.base, inst, 1.0);
  std::vector<VarId> x;
  for (int i = 0; i < inst.N; ++i)
    x.push_back(bm.base.add_variable(indexed("x", static_cast<std::size_t>(i)), 0, 1, VarKind::continuous,
                                     VarTag::hedging, 2));
  const auto u = detail::add_follower(bm, k, x);
  Objective obj{ObjSense::maximize, {}, {}, 0.0};
  for (std::size_t i = 0; i < x.size(); ++i) {
    obj.lin.push_back({core.y[i], inst.mu_bar[i]});
    obj.lin.push_back({x[i], -inst.c[i]});
    obj.quad.push_back({core.y[i], u[i], -inst.mu_hat[i]});
    bm.lower_objective.quad.push_back({core.y[i], u[i], inst.mu_hat[i]});
  }
  bm.base.set_objective(std::move(obj));
  return bm;
}

inline BilevelModel build_bilevel_discrete(const InstanceFile& f) {
  if (f.uncertainty != UncertaintyKind::discrete_knapsack)
    throw Error(ErrorCode::invalid_argument, "the bilevel-discrete pathway needs a discrete knapsack instance");
  return std::visit([](const auto& d) { return build_bilevel_discrete(d); }, f.data);
}

// ---------------------------------------------------------------------------
// Lower-level product linearization

enum class Placement { both_levels, lower_only };

inline std::string_view to_string(Placement p) { return p == Placement::both_levels ? "both_levels" : "lower_only"; }

struct ProductAux {
  VarId leader = 0;
  VarId follower = 0;
  std::optional<VarId> upper;  // both_levels only
  VarId lower = 0;
};

struct LinearizedBilevel {
  BilevelModel model;
  Placement placement = Placement::lower_only;
  std::vector<ProductAux> products;
};

/// Replaces every leader x follower product by McCormick auxiliaries. The
/// follower's copy r^l and its rows always belong to the lower level; under
/// both_levels the leader gets its own copy r^u, under lower_only the leader
/// references r^l. Leader x leader products (portfolio variance) are kept.
inline LinearizedBilevel linearize_lower_products(const BilevelModel& bm, Placement placement,
                                                  bool binary_aux = true) {
  LinearizedBilevel out{bm, placement, {}};
  BilevelModel& b = out.model;
  MilpModel& m = b.base;
  std::map<std::pair<VarId, VarId>, std::size_t> index;

  auto classify = [&](const QuadTerm& t, bool lower_objective) -> std::optional<std::pair<VarId, VarId>> {
    const bool li = b.is_lower_var(t.i), lj = b.is_lower_var(t.j);
    if (li && lj) throw Error(ErrorCode::unsupported_structure, "product of two follower variables");
    if (!li && !lj) {
      if (lower_objective)
        throw Error(ErrorCode::unsupported_structure, "follower objective holds a product of leader variables");
      return std::nullopt;
    }
    return li ? std::pair{t.j, t.i} : std::pair{t.i, t.j};
  };
  auto product = [&](VarId leader, VarId follower) -> const ProductAux& {
    const auto key = std::pair{leader, follower};
    if (auto it = index.find(key); it != index.end()) return out.products[it->second];
    const std::string tail = m.var(leader).name + "_" + m.var(follower).name;
    auto make = [&](const std::string& name) {
      if (m.var(leader).kind == VarKind::binary) return mccormick_bin_bin(m, leader, follower, name, binary_aux);
      if (m.var(leader).kind == VarKind::integer)
        throw Error(ErrorCode::unsupported_structure, "general integer factor '" + m.var(leader).name + "'");
      return mccormick_bin_cont(m, follower, leader, m.var(leader).ub, name);
    };
    ProductAux p{leader, follower, std::nullopt, 0};
    p.lower = make("rl_" + tail);
    b.lower_vars.insert(p.lower);
    for (ConId c = m.num_linear() - 3; c < m.num_linear(); ++c) b.lower_cons.insert(c);
    if (placement == Placement::both_levels) p.upper = make("ru_" + tail);
    index.emplace(key, out.products.size());
    out.products.push_back(p);
    return out.products.back();
  };
  auto upper_ref = [&](const ProductAux& p) { return p.upper.value_or(p.lower); };

  // follower objective first so that product order follows it
  std::vector<Term> lower_lin = b.lower_objective.lin;
  for (const QuadTerm& t : b.lower_objective.quad) {
    const auto lf = classify(t, true);
    lower_lin.push_back({product(lf->first, lf->second).lower, t.coef});
  }
  b.lower_objective.lin = detail::merge_terms(std::move(lower_lin));
  b.lower_objective.quad.clear();

  Objective obj = m.objective();
  std::vector<QuadTerm> keep;
  for (const QuadTerm& t : obj.quad) {
    if (const auto lf = classify(t, false))
      obj.lin.push_back({upper_ref(product(lf->first, lf->second)), t.coef});
    else
      keep.push_back(t);
  }
  obj.quad = std::move(keep);
  obj.lin = detail::merge_terms(std::move(obj.lin));
  m.set_objective(std::move(obj));

  std::vector<QuadConstraint> remaining;
  std::vector<QuadConstraint> became_linear;
  const auto quads = m.quad_constraints();
  for (QuadConstraint q : quads) {
    std::vector<QuadTerm> left;
    for (const QuadTerm& t : q.quad) {
      if (const auto lf = classify(t, false))
        q.lin.push_back({upper_ref(product(lf->first, lf->second)), t.coef});
      else
        left.push_back(t);
    }
    q.quad = std::move(left);
    q.lin = detail::merge_terms(std::move(q.lin));
    (q.quad.empty() ? became_linear : remaining).push_back(std::move(q));
  }
  for (std::size_t i = 0; i < remaining.size(); ++i) remaining[i].id = i;
  m.mutable_quad_constraints() = std::move(remaining);
  for (QuadConstraint& q : became_linear) m.add_linear_constraint(std::move(q.lin), q.sense, q.rhs, q.tag, q.name);
  return out;
}

/// Follower objective as the minimization the lower level solves: min -b'r.
inline std::vector<Term> lower_objective_min_form(const BilevelModel& bm) {
  std::vector<Term> t = bm.lower_objective.lin;
  if (bm.lower_objective.sense == ObjSense::maximize)
    for (Term& x : t) x.coef = -x.coef;
  return t;
}

// ---------------------------------------------------------------------------
// Enumeration solver

struct EnumerationOptions {
  std::size_t leader_limit = 24;
  double feas_tol = 1e-7;
};

namespace detail {

struct FollowerRow {
  std::vector<std::pair<std::size_t, double>> follower;  // (follower position, f)
  std::vector<std::pair<std::size_t, double>> leader;    // (leader position, coefficient)
  double rhs = 0.0;
};

// Interval bookkeeping with separate counts of infinite contributions.
struct Activity {
  double lo = 0.0, hi = 0.0;
  int lo_inf = 0, hi_inf = 0;
  void add(double c, double l, double u, int s) {
    double a = c >= 0 ? c * l : c * u, b = c >= 0 ? c * u : c * l;
    if (c == 0.0) a = b = 0.0;
    if (std::isinf(a))
      lo_inf += s;
    else
      lo += s * a;
    if (std::isinf(b))
      hi_inf += s;
    else
      hi += s * b;
  }
};

}  // namespace detail

/// Exact optimistic bilevel optimum by enumerating the leader binaries in id
/// order (0 before 1) with interval pruning on the leader's rows, solving the
/// follower knapsack for every complete leader point. Ties keep the
/// lexicographically smallest leader point. Requires binary leader variables,
/// binary follower variables and a single non-McCormick follower row with
/// nonnegative follower coefficients.
inline SolveResult solve_bilevel_enumeration(const LinearizedBilevel& lb, const EnumerationOptions& opt = {}) {
  const auto start = lp::Clock::now();
  const BilevelModel& b = lb.model;
  const MilpModel& m = b.base;
  if (m.has_quadratic_content() || !b.lower_objective.quad.empty())
    throw Error(ErrorCode::quadratic_content, "enumeration needs a linearized bilevel model");

  std::map<VarId, const ProductLink*> link;
  for (const ProductLink& p : m.products()) link[p.aux] = &p;

  std::vector<VarId> leaders, followers;
  std::vector<long> pos(m.num_vars(), -1);
  for (const Variable& v : m.variables()) {
    if (v.tag == VarTag::mccormick_aux && link.contains(v.id)) continue;
    if (v.kind != VarKind::binary)
      throw Error(ErrorCode::unsupported_structure, "'" + v.name + "' is not binary; enumeration needs binary variables");
    if (b.is_lower_var(v.id)) {
      pos[v.id] = static_cast<long>(followers.size());
      followers.push_back(v.id);
    } else {
      pos[v.id] = static_cast<long>(leaders.size());
      leaders.push_back(v.id);
    }
  }
  if (leaders.size() > opt.leader_limit)
    throw Error(ErrorCode::leader_space_too_large,
                std::to_string(leaders.size()) + " leader binaries exceed the limit of " + std::to_string(opt.leader_limit));

  std::optional<detail::FollowerRow> frow;
  for (ConId c : b.lower_cons) {
    const LinConstraint& row = m.linear(c);
    if (row.tag == ConTag::mccormick) continue;
    if (frow) throw Error(ErrorCode::unsupported_structure, "follower has more than one knapsack row");
    if (row.sense != Sense::le) throw Error(ErrorCode::unsupported_structure, "follower row must be '<='");
    detail::FollowerRow fr;
    fr.rhs = row.rhs;
    for (const Term& t : row.terms) {
      if (pos[t.var] < 0) throw Error(ErrorCode::unsupported_structure, "follower row references an auxiliary");
      if (b.is_lower_var(t.var)) {
        if (t.coef < 0) throw Error(ErrorCode::unsupported_structure, "negative follower weight");
        fr.follower.push_back({static_cast<std::size_t>(pos[t.var]), t.coef});
      } else {
        fr.leader.push_back({static_cast<std::size_t>(pos[t.var]), t.coef});
      }
    }
    frow = std::move(fr);
  }
  if (!frow && !followers.empty()) throw Error(ErrorCode::unsupported_structure, "follower has no knapsack row");

  // follower objective: direct coefficients plus products with leader variables
  std::vector<double> direct(followers.size(), 0.0);
  std::vector<std::vector<std::pair<std::size_t, double>>> via_leader(followers.size());
  const double fsign = b.lower_objective.sense == ObjSense::maximize ? 1.0 : -1.0;
  for (const Term& t : b.lower_objective.lin) {
    if (auto it = link.find(t.var); it != link.end()) {
      const VarId a = it->second->a, c = it->second->b;
      const VarId f = b.is_lower_var(a) ? a : c, l = f == a ? c : a;
      if (!b.is_lower_var(f) || b.is_lower_var(l) || pos[l] < 0)
        throw Error(ErrorCode::unsupported_structure, "follower objective product is not leader x follower");
      via_leader[static_cast<std::size_t>(pos[f])].push_back({static_cast<std::size_t>(pos[l]), fsign * t.coef});
    } else if (b.is_lower_var(t.var)) {
      direct[static_cast<std::size_t>(pos[t.var])] += fsign * t.coef;
    }
  }

  // interval pruning over the leader's rows
  const std::size_t L = leaders.size();
  std::vector<double> lo(m.num_vars()), hi(m.num_vars());
  for (const Variable& v : m.variables()) {
    lo[v.id] = v.lb;
    hi[v.id] = v.ub;
  }
  for (const ProductLink& p : m.products()) {
    double mn = kInf, mx = -kInf;
    for (double x : {lo[p.a], hi[p.a]})
      for (double y : {lo[p.b], hi[p.b]}) {
        const double v = (x == 0.0 || y == 0.0) ? 0.0 : x * y;
        mn = std::min(mn, v);
        mx = std::max(mx, v);
      }
    lo[p.aux] = std::max(lo[p.aux], mn);
    hi[p.aux] = std::min(hi[p.aux], mx);
  }
  std::vector<ConId> upper_rows;
  for (const LinConstraint& c : m.linear_constraints())
    if (!b.is_lower_con(c.id)) upper_rows.push_back(c.id);
  std::vector<detail::Activity> act(m.num_linear());
  std::vector<std::vector<std::pair<std::size_t, double>>> rows_of(L);  // leader position -> (row, coef)
  for (ConId c : upper_rows)
    for (const Term& t : m.linear(c).terms) {
      act[c].add(t.coef, lo[t.var], hi[t.var], 1);
      if (pos[t.var] >= 0 && !b.is_lower_var(t.var)) rows_of[static_cast<std::size_t>(pos[t.var])].push_back({c, t.coef});
    }
  auto violated = [&](ConId c) {
    const LinConstraint& r = m.linear(c);
    const detail::Activity& a = act[c];
    const double tol = opt.feas_tol * (1.0 + std::abs(r.rhs));
    const bool too_high = a.lo_inf == 0 && a.lo > r.rhs + tol;
    const bool too_low = a.hi_inf == 0 && a.hi < r.rhs - tol;
    return (r.sense != Sense::ge && too_high) || (r.sense != Sense::le && too_low);
  };

  std::vector<double> val(m.num_vars(), 0.0);
  std::vector<double> fweight, fcoef(followers.size());
  if (frow) {
    fweight.assign(followers.size(), 0.0);
    for (auto [k, f] : frow->follower) fweight[k] += f;
  }
  const bool maximize = m.objective().sense == ObjSense::maximize;
  SolveResult best;
  best.status = SolveStatus::infeasible;
  double best_obj = maximize ? -kInf : kInf;
  long evaluated = 0;

  auto evaluate_leaf = [&] {
    ++evaluated;
    if (!followers.empty()) {
      double cap = frow->rhs;
      for (auto [k, c] : frow->leader) cap -= c * val[leaders[k]];
      if (cap < -opt.feas_tol) return;
      for (std::size_t k = 0; k < followers.size(); ++k) {
        double c = direct[k];
        for (auto [l, w] : via_leader[k]) c += w * val[leaders[l]];
        fcoef[k] = c;
      }
      const DiscreteWorstCase r = worst_case_discrete_dp(fweight, std::max(cap, 0.0), fcoef);
      for (std::size_t k = 0; k < followers.size(); ++k) val[followers[k]] = r.u[k];
    }
    for (const ProductLink& p : m.products()) val[p.aux] = val[p.a] * val[p.b];
    for (ConId c : upper_rows) {
      const LinConstraint& r = m.linear(c);
      if (violation(eval_terms(r.terms, val), r.sense, r.rhs) > opt.feas_tol * (1.0 + std::abs(r.rhs))) return;
    }
    const double obj = objective_value(m, val);
    const double margin = 1e-9 * std::max(1.0, std::abs(best_obj));
    const bool better = best.values.empty() || (maximize ? obj > best_obj + margin : obj < best_obj - margin);
    if (better) {
      best_obj = obj;
      best.values = val;
      best.objective = obj;
    }
  };
  auto assign = [&](std::size_t k, double v, int s) {
    for (auto [c, coef] : rows_of[k]) {
      detail::Activity& a = act[c];
      a.add(coef, 0.0, 1.0, -s);
      a.add(coef, v, v, s);
    }
  };
  auto dfs = [&](auto&& self, std::size_t k) -> void {
    if (k == L) {
      evaluate_leaf();
      return;
    }
    for (double v : {0.0, 1.0}) {
      val[leaders[k]] = v;
      assign(k, v, 1);
      bool ok = true;
      for (auto [c, coef] : rows_of[k])
        if (violated(c)) {
          ok = false;
          break;
        }
      if (ok) self(self, k + 1);
      assign(k, v, -1);
    }
    val[leaders[k]] = 0.0;
  };
  bool root_ok = true;
  for (ConId c : upper_rows) root_ok = root_ok && !violated(c);
  if (root_ok) dfs(dfs, 0);

  best.nodes = evaluated;
  best.elapsed_ms = detail::elapsed_ms_since(start);
  if (best.values.empty()) return best;
  best.status = SolveStatus::optimal;
  best.bound = best.objective;
  return best;
}

// ---------------------------------------------------------------------------
// MibS export

struct AuxOptions {
  bool follower_min_form = false;  // write OS 1 with negated coefficients
};

struct MibsAux {
  std::vector<std::size_t> columns;
  std::vector<std::size_t> rows;
  std::vector<double> objective;
  int sense = -1;  // 1 = follower minimizes
};

inline std::string aux_string(const BilevelModel& bm, const AuxOptions& opt = {}) {
  std::map<VarId, double> coef;
  for (const Term& t : bm.lower_objective.lin)
    if (bm.is_lower_var(t.var)) coef[t.var] += t.coef;
  const bool max = bm.lower_objective.sense == ObjSense::maximize;
  const bool flip = max && opt.follower_min_form;
  std::ostringstream out;
  out << "N " << bm.lower_vars.size() << "\n";
  out << "M " << bm.lower_cons.size() << "\n";
  for (VarId v : bm.lower_vars) out << "LC " << v << "\n";
  for (ConId c : bm.lower_cons) out << "LR " << c << "\n";
  for (VarId v : bm.lower_vars) {
    const double c = coef.contains(v) ? coef[v] : 0.0;
    out << "LO " << format_number(flip ? -c : c == 0.0 ? 0.0 : c) << "\n";
  }
  out << "OS " << (max && !flip ? -1 : 1) << "\n";
  return out.str();
}

inline MibsAux parse_aux(const std::string& text) {
  MibsAux a;
  std::optional<std::size_t> n, mrows;
  std::optional<int> os;
  std::istringstream in(text);
  std::string line;
  auto index = [](const std::string& s) {
    const double v = detail::number_or_throw(s, "AUX index");
    if (v < 0 || v != std::floor(v)) throw Error(ErrorCode::parse_failure, "AUX: bad index '" + s + "'");
    return static_cast<std::size_t>(v);
  };
  while (std::getline(in, line)) {
    auto tok = detail::split_ws(line);
    if (tok.empty()) continue;
    if (tok.size() != 2) throw Error(ErrorCode::parse_failure, "AUX: bad line '" + line + "'");
    const std::string& k = tok[0];
    if (k == "N")
      n = index(tok[1]);
    else if (k == "M")
      mrows = index(tok[1]);
    else if (k == "LC")
      a.columns.push_back(index(tok[1]));
    else if (k == "LR")
      a.rows.push_back(index(tok[1]));
    else if (k == "LO")
      a.objective.push_back(detail::number_or_throw(tok[1], "AUX LO"));
    else if (k == "OS")
      os = static_cast<int>(detail::number_or_throw(tok[1], "AUX OS"));
    else
      throw Error(ErrorCode::parse_failure, "AUX: unknown key '" + k + "'");
  }
  if (!n || !mrows || !os) throw Error(ErrorCode::parse_failure, "AUX: missing N, M or OS");
  if (a.columns.size() != *n || a.objective.size() != *n || a.rows.size() != *mrows)
    throw Error(ErrorCode::parse_failure, "AUX: record counts do not match N/M");
  if (*os != 1 && *os != -1) throw Error(ErrorCode::parse_failure, "AUX: OS must be 1 or -1");
  a.sense = *os;
  return a;
}

/// Leader model in minimization form, as written to the MPS file.
inline MilpModel mibs_leader_model(const BilevelModel& bm) {
  MilpModel m = bm.base;
  if (m.objective().sense == ObjSense::maximize) {
    Objective o = m.objective();
    for (Term& t : o.lin) t.coef = -t.coef;
    o.constant = -o.constant;
    o.sense = ObjSense::minimize;
    m.set_objective(std::move(o));
  }
  return m;
}

struct MibsFiles {
  std::filesystem::path mps, aux;
};

/// Writes `<stem>.mps` (leader objective in minimization form) and `<stem>.aux`.
inline MibsFiles export_mibs(const BilevelModel& bm, const std::filesystem::path& stem, const AuxOptions& opt = {}) {
  if (bm.base.has_quadratic_content() || !bm.lower_objective.quad.empty())
    throw Error(ErrorCode::quadratic_content, "MibS export needs a fully linear bilevel model");
  MibsFiles f{stem, stem};
  f.mps += ".mps";
  f.aux += ".aux";
  const MilpModel leader = mibs_leader_model(bm);
  for (ConId c : bm.lower_cons)
    if (c >= leader.num_linear()) throw Error(ErrorCode::unknown_var, "lower constraint id out of range");
  write_mps(leader, f.mps);
  write_file(f.aux, aux_string(bm, opt));
  return f;
}

inline MibsFiles export_mibs(const LinearizedBilevel& lb, const std::filesystem::path& stem, const AuxOptions& opt = {}) {
  return export_mibs(lb.model, stem, opt);
}

/// Rebuilds a bilevel model from an MPS/AUX pair.
inline BilevelModel import_mibs(const std::filesystem::path& mps, const std::filesystem::path& aux) {
  BilevelModel bm;
  bm.base = read_mps(mps);
  const MibsAux a = parse_aux(read_file(aux));
  for (std::size_t c : a.columns) {
    if (c >= bm.base.num_vars()) throw Error(ErrorCode::parse_failure, "AUX: column index out of range");
    bm.lower_vars.insert(c);
  }
  for (std::size_t r : a.rows) {
    if (r >= bm.base.num_linear()) throw Error(ErrorCode::parse_failure, "AUX: row index out of range");
    bm.lower_cons.insert(r);
  }
  bm.lower_objective.sense = a.sense == 1 ? ObjSense::minimize : ObjSense::maximize;
  for (std::size_t i = 0; i < a.columns.size(); ++i)
    if (a.objective[i] != 0.0) bm.lower_objective.lin.push_back({a.columns[i], a.objective[i]});
  return bm;
}

/// Runs MibS through a command template with {input}, {aux} and optionally
/// {output} placeholders and scrapes its log. The objective is reported in
/// the leader's original sense.
inline SolveResult solve_mibs_external(const LinearizedBilevel& lb, const std::string& command, double timeout_s = 600.0,
                                       const AuxOptions& opt = {}) {
  namespace fs = std::filesystem;
  static std::atomic<unsigned> counter{0};
  const fs::path dir = fs::temp_directory_path();
  const fs::path stem = dir / ("ddro_mibs_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
  const MibsFiles files = export_mibs(lb, stem, opt);
  fs::path output = stem;
  output += ".out";
  fs::path log = stem;
  log += ".log";
  const std::string cmd =
      substitute(command, {{"input", files.mps.string()}, {"aux", files.aux.string()}, {"output", output.string()}});
  const auto start = std::chrono::steady_clock::now();
  auto cleanup = [&] {
    std::error_code ec;
    for (const fs::path& p : {files.mps, files.aux, output, log}) fs::remove(p, ec);
  };
  SolveResult r;
  try {
    const CommandOutcome run = run_command(cmd, log, timeout_s);
    if (run.timed_out) {
      r.status = SolveStatus::time_limit;
    } else {
      if (run.exit_code != 0)
        throw Error(ErrorCode::solver_error, "MibS exited with code " + std::to_string(run.exit_code) + ": " + run.log);
      const bool to_file = command.find("{output}") != std::string::npos;
      const std::string text = to_file ? read_file(output) : run.log;
      r = parse_mibs_log(text, mibs_leader_model(lb.model));
      if (lb.model.base.objective().sense == ObjSense::maximize) {
        r.objective = -r.objective;
        r.bound = -r.bound;
      }
    }
  } catch (...) {
    cleanup();
    throw;
  }
  cleanup();
  r.elapsed_ms = std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::steady_clock::now() - start).count();
  return r;
}

}  // namespace ddro
