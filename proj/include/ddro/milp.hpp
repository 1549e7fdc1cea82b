#pragma once

// Desk-scale exact MILP solving: LP relaxations by the dense simplex and a
// best-first branch-and-bound over integer variables.

#include <chrono>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <memory>
#include <optional>
#include <queue>
#include <string>
#include <string_view>
#include <vector>

#include "ddro/model.hpp"
#include "ddro/simplex.hpp"

namespace ddro {

enum class SolveStatus { optimal, infeasible, unbounded, node_limit, time_limit };

inline std::string_view to_string(SolveStatus s) {
  switch (s) {
    case SolveStatus::optimal: return "optimal";
    case SolveStatus::infeasible: return "infeasible";
    case SolveStatus::unbounded: return "unbounded";
    case SolveStatus::node_limit: return "node_limit";
    case SolveStatus::time_limit: return "time_limit";
  }
  return "?";
}

inline std::optional<SolveStatus> solve_status_from_string(std::string_view s) {
  for (SolveStatus st : {SolveStatus::optimal, SolveStatus::infeasible, SolveStatus::unbounded,
                         SolveStatus::node_limit, SolveStatus::time_limit})
    if (to_string(st) == s) return st;
  return std::nullopt;
}

struct SolveResult {
  SolveStatus status = SolveStatus::infeasible;
  std::vector<double> values;  // indexed by VarId; empty when no solution is known
  double objective = 0.0;
  double bound = 0.0;
  long nodes = 0;
  long elapsed_ms = 0;

  bool has_solution() const { return !values.empty(); }
};

enum class BranchRule { pseudocost, most_fractional };

struct MilpOptions {
  BranchRule branching = BranchRule::pseudocost;
  long node_limit = 1'000'000;
  double time_limit_s = 60.0;
  double gap = 1e-6;  // absolute
  double integrality_tol = 1e-6;
  double audit_tol = 1e-6;
  std::size_t snapshot_budget_bytes = std::size_t{256} << 20;
  lp::Tolerances lp{};
};

namespace detail {

// Maps model variables onto simplex columns with finite lower bounds.
struct ColumnMap {
  std::size_t col = 0;
  double sign = 1.0;                // x = sign * col  (minus neg part when split)
  std::optional<std::size_t> neg;   // second column of a free variable
};

struct LpForm {
  std::vector<ColumnMap> map;
  std::size_t cols = 0;
  std::unique_ptr<lp::DenseSimplex> simplex;
  double obj_sign = 1.0;  // model objective = obj_sign * lp objective + constant
  double constant = 0.0;

  std::vector<double> model_values(const lp::DenseSimplex& s) const {
    std::vector<double> out(map.size());
    for (std::size_t v = 0; v < map.size(); ++v) {
      double val = map[v].sign * s.value(map[v].col);
      if (map[v].neg) val -= s.value(*map[v].neg);
      out[v] = val;
    }
    return out;
  }

  void set_var_bounds(lp::DenseSimplex& s, VarId v, double lb, double ub) const {
    const ColumnMap& c = map[v];
    if (c.neg) throw Error(ErrorCode::unsupported_structure, "branching on a free integer variable");
    if (c.sign > 0)
      s.set_bounds(c.col, lb, ub);
    else
      s.set_bounds(c.col, -ub, -lb);
  }
};

inline LpForm build_lp(const MilpModel& model, lp::Tolerances tol) {
  if (model.has_quadratic_content())
    throw Error(ErrorCode::quadratic_content, "model '" + model.name() + "' has quadratic terms");
  LpForm f;
  const auto& vars = model.variables();
  f.map.resize(vars.size());
  std::vector<double> lo, hi;
  for (const Variable& v : vars) {
    ColumnMap c;
    c.col = lo.size();
    if (std::isfinite(v.lb)) {
      lo.push_back(v.lb);
      hi.push_back(v.ub);
    } else if (std::isfinite(v.ub)) {
      c.sign = -1.0;
      lo.push_back(-v.ub);
      hi.push_back(kInf);
    } else {
      lo.push_back(0.0);
      hi.push_back(kInf);
      c.neg = lo.size();
      lo.push_back(0.0);
      hi.push_back(kInf);
    }
    f.map[v.id] = c;
  }
  f.cols = lo.size();
  const std::size_t m = model.num_linear();
  std::vector<double> a(m * f.cols, 0.0);
  std::vector<Sense> senses(m);
  std::vector<double> b(m);
  for (const LinConstraint& con : model.linear_constraints()) {
    for (const Term& t : con.terms) {
      const ColumnMap& c = f.map[t.var];
      a[con.id * f.cols + c.col] += c.sign * t.coef;
      if (c.neg) a[con.id * f.cols + *c.neg] -= t.coef;
    }
    senses[con.id] = con.sense;
    b[con.id] = con.rhs;
  }
  const Objective& obj = model.objective();
  f.obj_sign = obj.sense == ObjSense::minimize ? 1.0 : -1.0;
  f.constant = obj.constant;
  std::vector<double> cost(f.cols, 0.0);
  for (const Term& t : obj.lin) {
    const ColumnMap& c = f.map[t.var];
    cost[c.col] += f.obj_sign * c.sign * t.coef;
    if (c.neg) cost[*c.neg] -= f.obj_sign * t.coef;
  }
  f.simplex = std::make_unique<lp::DenseSimplex>(m, f.cols, std::move(a), std::move(senses), std::move(b),
                                                 std::move(cost), std::move(lo), std::move(hi), tol);
  return f;
}

inline long elapsed_ms_since(lp::Clock::time_point start) {
  return static_cast<long>(
      std::chrono::duration_cast<std::chrono::milliseconds>(lp::Clock::now() - start).count());
}

}  // namespace detail

/// Solves the LP relaxation (integrality dropped).
inline SolveResult solve_lp(const MilpModel& model, lp::Tolerances tol = {}) {
  const auto start = lp::Clock::now();
  detail::LpForm f = detail::build_lp(model, tol);
  SolveResult r;
  r.nodes = 1;
  const lp::LpStatus st = f.simplex->solve_from_scratch();
  r.elapsed_ms = detail::elapsed_ms_since(start);
  switch (st) {
    case lp::LpStatus::optimal: {
      r.status = SolveStatus::optimal;
      r.values = f.model_values(*f.simplex);
      r.objective = objective_value(model, r.values);
      r.bound = r.objective;
      return r;
    }
    case lp::LpStatus::infeasible: r.status = SolveStatus::infeasible; return r;
    case lp::LpStatus::unbounded: r.status = SolveStatus::unbounded; return r;
    case lp::LpStatus::time_limit: r.status = SolveStatus::time_limit; return r;
    case lp::LpStatus::iteration_limit:
      throw Error(ErrorCode::solver_error, "simplex iteration limit reached on '" + model.name() + "'");
  }
  return r;
}

/// Best-first branch-and-bound. Branches on the most fractional integer
/// variable (ties: smallest id), explores the open node with the smallest
/// bound first (ties: creation order). Every accepted incumbent is audited
/// against the model.
inline SolveResult solve_milp(const MilpModel& model, const MilpOptions& opt = {}) {
  const auto start = lp::Clock::now();
  const auto deadline = start + std::chrono::duration_cast<lp::Clock::duration>(
                                    std::chrono::duration<double>(opt.time_limit_s));
  detail::LpForm f = detail::build_lp(model, opt.lp);
  f.simplex->set_deadline(deadline);

  std::vector<VarId> ints;
  for (const Variable& v : model.variables())
    if (v.is_integral()) ints.push_back(v.id);

  using Bounds = std::vector<std::pair<double, double>>;
  struct Snapshot {
    lp::DenseSimplex lp;
    std::size_t bytes;
    std::size_t* live;
    Snapshot(const lp::DenseSimplex& s, std::size_t b, std::size_t* l) : lp(s), bytes(b), live(l) { *live += bytes; }
    ~Snapshot() { *live -= bytes; }
    Snapshot(const Snapshot&) = delete;
    Snapshot& operator=(const Snapshot&) = delete;
  };
  struct Node {
    double bound;
    long id;
    Bounds bounds;
    std::shared_ptr<const Snapshot> parent;
    std::shared_ptr<const lp::DenseSimplex::Basis> basis;
    std::size_t branched = SIZE_MAX;  // position in `ints` of the variable branched on
    bool up = false;
    double frac = 0.0;  // distance the branching bound moved the variable
  };
  struct Worse {
    bool operator()(const Node& a, const Node& b) const {
      if (a.bound != b.bound) return a.bound > b.bound;
      return a.id > b.id;
    }
  };

  std::size_t live_bytes = 0;
  const std::size_t m = model.num_linear();
  const std::size_t snapshot_bytes = (m * (f.cols + 2 * m) + 8 * (f.cols + 2 * m)) * sizeof(double);

  Bounds root_bounds;
  for (VarId v : ints) root_bounds.emplace_back(model.var(v).lb, model.var(v).ub);

  SolveResult res;
  double incumbent = kInf;  // min-form objective
  std::vector<double> best_values;

  auto finish = [&](SolveStatus status, double open_bound) {
    res.status = status;
    if (!best_values.empty()) {
      res.values = best_values;
      res.objective = objective_value(model, best_values);
    }
    const double b = std::min(open_bound, incumbent);
    res.bound = b == kInf ? (f.obj_sign > 0 ? kInf : -kInf) : f.obj_sign * b + f.constant;
    if (status == SolveStatus::optimal) res.bound = res.objective;
    res.elapsed_ms = detail::elapsed_ms_since(start);
    return res;
  };

  std::priority_queue<Node, std::vector<Node>, Worse> open;
  open.push(Node{-kInf, 0, root_bounds, nullptr, nullptr});
  // pseudocosts per direction (0 down, 1 up): summed bound gain per unit change
  std::vector<double> pc_sum[2] = {std::vector<double>(ints.size(), 0.0), std::vector<double>(ints.size(), 0.0)};
  std::vector<long> pc_n[2] = {std::vector<long>(ints.size(), 0), std::vector<long>(ints.size(), 0)};
  long next_id = 1;
  bool root = true;

  while (!open.empty()) {
    if (lp::Clock::now() > deadline) return finish(SolveStatus::time_limit, open.top().bound);
    if (res.nodes >= opt.node_limit) return finish(SolveStatus::node_limit, open.top().bound);
    Node node = open.top();
    open.pop();
    if (node.bound >= incumbent - opt.gap) continue;

    lp::DenseSimplex* lp_ptr = f.simplex.get();
    std::unique_ptr<lp::DenseSimplex> local;
    lp::LpStatus st;
    if (node.parent) {
      local = std::make_unique<lp::DenseSimplex>(node.parent->lp);
      node.parent.reset();
      lp_ptr = local.get();
    }
    for (std::size_t k = 0; k < ints.size(); ++k) f.set_var_bounds(*lp_ptr, ints[k], node.bounds[k].first, node.bounds[k].second);
    if (root)
      st = lp_ptr->solve_from_scratch();
    else if (local)
      st = lp_ptr->reoptimize();
    else
      st = lp_ptr->solve_warm(*node.basis);
    root = false;
    ++res.nodes;

    if (st == lp::LpStatus::time_limit) return finish(SolveStatus::time_limit, node.bound);
    if (st == lp::LpStatus::iteration_limit)
      throw Error(ErrorCode::solver_error, "simplex iteration limit reached on '" + model.name() + "'");
    if (node.branched != SIZE_MAX && st == lp::LpStatus::optimal && node.frac > 0.0 && std::isfinite(node.bound)) {
      pc_sum[node.up][node.branched] += std::max(0.0, lp_ptr->objective() - node.bound) / node.frac;
      ++pc_n[node.up][node.branched];
    }
    if (st == lp::LpStatus::infeasible) continue;
    if (st == lp::LpStatus::unbounded) {
      if (res.nodes == 1) return finish(SolveStatus::unbounded, -kInf);
      continue;
    }
    const double lp_obj = lp_ptr->objective();
    if (lp_obj >= incumbent - opt.gap) continue;

    std::vector<double> x = f.model_values(*lp_ptr);
    // pseudocost branching, product score; unobserved variables use the mean
    double mean[2] = {1.0, 1.0};
    for (int d = 0; d < 2; ++d) {
      double sum = 0.0;
      long seen = 0;
      for (std::size_t k = 0; k < ints.size(); ++k)
        if (pc_n[d][k]) {
          sum += pc_sum[d][k] / static_cast<double>(pc_n[d][k]);
          ++seen;
        }
      if (seen) mean[d] = sum / static_cast<double>(seen);
    }
    auto unit_gain = [&](int d, std::size_t k) {
      return pc_n[d][k] ? pc_sum[d][k] / static_cast<double>(pc_n[d][k]) : mean[d];
    };
    std::size_t branch = ints.size();
    double best_score = -1.0;
    for (std::size_t k = 0; k < ints.size(); ++k) {
      const double v = x[ints[k]];
      const double frac = std::abs(v - std::round(v));
      if (frac <= opt.integrality_tol) continue;
      if (opt.branching == BranchRule::most_fractional) {
        // ties go to the smallest id
        if (frac > best_score + 1e-12) {
          best_score = frac;
          branch = k;
        }
        continue;
      }
      const double down = (v - std::floor(v)) * unit_gain(0, k);
      const double up = (std::ceil(v) - v) * unit_gain(1, k);
      const double score = std::max(down, 1e-6) * std::max(up, 1e-6);
      if (score > best_score * (1 + 1e-12)) {
        best_score = score;
        branch = k;
      }
    }
    if (branch == ints.size()) {
      std::vector<double> rounded = x;
      for (VarId v : ints) rounded[v] = std::round(rounded[v]);
      const std::vector<double>* candidate = nullptr;
      if (max_violation(model, rounded) <= opt.audit_tol)
        candidate = &rounded;
      else if (max_violation(model, x) <= opt.audit_tol)
        candidate = &x;
      if (candidate) {
        const double val = f.obj_sign * (objective_value(model, *candidate) - f.constant);
        if (val < incumbent) {
          incumbent = val;
          best_values = *candidate;
        }
      }
      continue;
    }

    const VarId bv = ints[branch];
    const double v = x[bv];
    std::shared_ptr<const Snapshot> snap;
    std::shared_ptr<const lp::DenseSimplex::Basis> basis;
    if (live_bytes + snapshot_bytes <= opt.snapshot_budget_bytes)
      snap = std::make_shared<const Snapshot>(*lp_ptr, snapshot_bytes, &live_bytes);
    else
      basis = std::make_shared<const lp::DenseSimplex::Basis>(lp_ptr->basis());

    Node down{lp_obj, next_id++, node.bounds, snap, basis, branch, false, v - std::floor(v)};
    down.bounds[branch].second = std::floor(v);
    Node up{lp_obj, next_id++, std::move(node.bounds), snap, basis, branch, true, std::ceil(v) - v};
    up.bounds[branch].first = std::ceil(v);
    open.push(std::move(down));
    open.push(std::move(up));
  }
  if (best_values.empty()) return finish(SolveStatus::infeasible, kInf);
  return finish(SolveStatus::optimal, incumbent);
}

}  // namespace ddro
