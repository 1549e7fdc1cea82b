#pragma once

// In-memory representation of (bilevel) mixed-integer models.
//
// Variables and constraints carry category tags so that model sizes can be
// reported in the usual tabulated form: nonnegativity
// bounds declared through `counted_bounds` are counted as constraints even
// though the solver stores them as plain variable bounds.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "ddro/error.hpp"

namespace ddro {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

using VarId = std::size_t;
using ConId = std::size_t;

enum class VarKind { continuous, binary, integer };

enum class VarTag { decision, hedging, uncertainty, dual, mccormick_aux, compl_aux, epigraph };

enum class Sense { le, eq, ge };

enum class ConTag {
  structural,
  dual_feasibility,
  uncertainty_set,
  strong_duality,
  mccormick,
  compl_bigM,
  stationarity,
  epigraph,
};

enum class ObjSense { minimize, maximize };

inline std::string_view to_string(VarKind k) {
  switch (k) {
    case VarKind::continuous: return "continuous";
    case VarKind::binary: return "binary";
    case VarKind::integer: return "integer";
  }
  return "?";
}

inline std::string_view to_string(VarTag t) {
  switch (t) {
    case VarTag::decision: return "decision";
    case VarTag::hedging: return "hedging";
    case VarTag::uncertainty: return "uncertainty";
    case VarTag::dual: return "dual";
    case VarTag::mccormick_aux: return "mccormick_aux";
    case VarTag::compl_aux: return "compl_aux";
    case VarTag::epigraph: return "epigraph";
  }
  return "?";
}

inline std::string_view to_string(ConTag t) {
  switch (t) {
    case ConTag::structural: return "structural";
    case ConTag::dual_feasibility: return "dual_feasibility";
    case ConTag::uncertainty_set: return "uncertainty_set";
    case ConTag::strong_duality: return "strong_duality";
    case ConTag::mccormick: return "mccormick";
    case ConTag::compl_bigM: return "compl_bigM";
    case ConTag::stationarity: return "stationarity";
    case ConTag::epigraph: return "epigraph";
  }
  return "?";
}

inline std::string_view to_string(Sense s) {
  switch (s) {
    case Sense::le: return "<=";
    case Sense::eq: return "=";
    case Sense::ge: return ">=";
  }
  return "?";
}

struct Term {
  VarId var;
  double coef;
  friend bool operator==(const Term&, const Term&) = default;
};

/// coef * x_i * x_j; (i, j, c) and (j, i, c) denote the same product.
struct QuadTerm {
  VarId i;
  VarId j;
  double coef;
  friend bool operator==(const QuadTerm&, const QuadTerm&) = default;
};

struct Variable {
  VarId id = 0;
  std::string name;
  double lb = 0.0;
  double ub = kInf;
  VarKind kind = VarKind::continuous;
  VarTag tag = VarTag::decision;
  // Number of bound rows (0, 1 or 2) that size reports count as constraints.
  int counted_bounds = 0;

  bool is_integral() const { return kind != VarKind::continuous; }
};

struct LinConstraint {
  ConId id = 0;
  std::string name;
  std::vector<Term> terms;
  Sense sense = Sense::le;
  double rhs = 0.0;
  ConTag tag = ConTag::structural;
};

struct QuadConstraint {
  ConId id = 0;
  std::string name;
  std::vector<QuadTerm> quad;
  std::vector<Term> lin;
  Sense sense = Sense::le;
  double rhs = 0.0;
  ConTag tag = ConTag::structural;
};

/// Records that `aux` stands for the product a * b (set by linearization passes).
struct ProductLink {
  VarId aux;
  VarId a;
  VarId b;
  friend bool operator==(const ProductLink&, const ProductLink&) = default;
};

struct Objective {
  ObjSense sense = ObjSense::minimize;
  std::vector<Term> lin;
  std::vector<QuadTerm> quad;
  double constant = 0.0;
};

namespace detail {

// Sums duplicate variable ids, keeps first-appearance order, drops exact zeros.
inline std::vector<Term> merge_terms(std::vector<Term> terms) {
  std::vector<Term> out;
  out.reserve(terms.size());
  std::unordered_map<VarId, std::size_t> pos;
  for (const Term& t : terms) {
    auto [it, fresh] = pos.emplace(t.var, out.size());
    if (fresh)
      out.push_back(t);
    else
      out[it->second].coef += t.coef;
  }
  std::erase_if(out, [](const Term& t) { return t.coef == 0.0; });
  return out;
}

inline bool has_whitespace(std::string_view s) {
  return std::any_of(s.begin(), s.end(), [](char c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r'; });
}

}  // namespace detail

class MilpModel {
 public:
  explicit MilpModel(std::string name = "") : name_(std::move(name)) {}

  const std::string& name() const { return name_; }
  void set_name(std::string name) { name_ = std::move(name); }

  VarId add_variable(std::string name, double lb, double ub, VarKind kind, VarTag tag, int counted_bounds = 0) {
    if (kind == VarKind::binary) {
      lb = std::max(lb, 0.0);
      ub = std::min(ub, 1.0);
    }
    if (!(lb <= ub)) throw Error(ErrorCode::inverted_bounds, "variable '" + name + "'");
    if (name_index_.contains(name)) throw Error(ErrorCode::duplicate_name, "variable '" + name + "'");
    const VarId id = vars_.size();
    name_index_.emplace(name, id);
    vars_.push_back(Variable{id, std::move(name), lb, ub, kind, tag, counted_bounds});
    return id;
  }

  ConId add_linear_constraint(std::vector<Term> terms, Sense sense, double rhs, ConTag tag, std::string name = "") {
    for (const Term& t : terms) check_var(t.var);
    const ConId id = lin_.size();
    if (name.empty()) name = "c" + std::to_string(id);
    lin_.push_back(LinConstraint{id, std::move(name), detail::merge_terms(std::move(terms)), sense, rhs, tag});
    return id;
  }

  ConId add_quad_constraint(std::vector<QuadTerm> quad, std::vector<Term> lin, Sense sense, double rhs, ConTag tag,
                            std::string name = "") {
    for (const QuadTerm& q : quad) {
      check_var(q.i);
      check_var(q.j);
    }
    for (const Term& t : lin) check_var(t.var);
    const ConId id = quad_.size();
    if (name.empty()) name = "q" + std::to_string(id);
    quad_.push_back(QuadConstraint{id, std::move(name), std::move(quad), detail::merge_terms(std::move(lin)), sense,
                                   rhs, tag});
    return id;
  }

  void set_objective(Objective obj) {
    for (const Term& t : obj.lin) check_var(t.var);
    for (const QuadTerm& q : obj.quad) {
      check_var(q.i);
      check_var(q.j);
    }
    obj.lin = detail::merge_terms(std::move(obj.lin));
    objective_ = std::move(obj);
  }

  const Objective& objective() const { return objective_; }
  Objective& mutable_objective() { return objective_; }

  std::size_t num_vars() const { return vars_.size(); }
  std::size_t num_linear() const { return lin_.size(); }
  std::size_t num_quadratic() const { return quad_.size(); }

  const std::vector<Variable>& variables() const { return vars_; }
  const std::vector<LinConstraint>& linear_constraints() const { return lin_; }
  const std::vector<QuadConstraint>& quad_constraints() const { return quad_; }

  const Variable& var(VarId id) const { return vars_.at(id); }
  Variable& mutable_var(VarId id) { return vars_.at(id); }
  const LinConstraint& linear(ConId id) const { return lin_.at(id); }
  LinConstraint& mutable_linear(ConId id) { return lin_.at(id); }
  std::vector<LinConstraint>& mutable_linear_constraints() { return lin_; }
  std::vector<QuadConstraint>& mutable_quad_constraints() { return quad_; }

  std::optional<VarId> find_variable(std::string_view name) const {
    auto it = name_index_.find(std::string(name));
    if (it == name_index_.end()) return std::nullopt;
    return it->second;
  }

  void add_product_link(VarId aux, VarId a, VarId b) {
    check_var(aux);
    check_var(a);
    check_var(b);
    products_.push_back(ProductLink{aux, a, b});
  }
  const std::vector<ProductLink>& products() const { return products_; }

  bool has_quadratic_content() const { return !quad_.empty() || !objective_.quad.empty(); }

  /// Checked lookup used by builders: terms on ids that do not exist are rejected.
  void check_var(VarId id) const {
    if (id >= vars_.size())
      throw Error(ErrorCode::unknown_var, "variable id " + std::to_string(id) + " in model with " +
                                              std::to_string(vars_.size()) + " variables");
  }

 private:
  std::string name_;
  std::vector<Variable> vars_;
  std::vector<LinConstraint> lin_;
  std::vector<QuadConstraint> quad_;
  Objective objective_;
  std::vector<ProductLink> products_;
  std::unordered_map<std::string, VarId> name_index_;
};

inline MilpModel new_model(std::string name) { return MilpModel(std::move(name)); }

/// A MilpModel plus a leader/follower partition. The base objective is the
/// leader's; the follower objective may hold bilinear terms until linearized.
struct BilevelModel {
  MilpModel base;
  std::set<VarId> lower_vars;
  std::set<ConId> lower_cons;  // ids of linear constraints
  Objective lower_objective{ObjSense::maximize, {}, {}, 0.0};

  bool is_lower_var(VarId v) const { return lower_vars.contains(v); }
  bool is_lower_con(ConId c) const { return lower_cons.contains(c); }
};

struct SizeReport {
  std::size_t continuous_vars = 0;
  std::size_t binary_vars = 0;
  std::size_t continuous_aux = 0;
  std::size_t binary_aux = 0;
  std::size_t constraints = 0;
  std::size_t mccormick_constraints = 0;
  std::size_t compl_constraints = 0;

  friend bool operator==(const SizeReport&, const SizeReport&) = default;
};

inline bool is_aux(VarTag t) {
  return t == VarTag::mccormick_aux || t == VarTag::compl_aux || t == VarTag::epigraph;
}

inline SizeReport size_report(const MilpModel& model) {
  SizeReport r;
  for (const Variable& v : model.variables()) {
    const bool aux = is_aux(v.tag);
    if (v.kind == VarKind::continuous)
      ++(aux ? r.continuous_aux : r.continuous_vars);
    else
      ++(aux ? r.binary_aux : r.binary_vars);
    if (v.tag == VarTag::mccormick_aux)
      r.mccormick_constraints += static_cast<std::size_t>(v.counted_bounds);
    else
      r.constraints += static_cast<std::size_t>(v.counted_bounds);
  }
  auto count_row = [&r](ConTag tag) {
    if (tag == ConTag::mccormick)
      ++r.mccormick_constraints;
    else if (tag == ConTag::compl_bigM)
      ++r.compl_constraints;
    else
      ++r.constraints;
  };
  for (const LinConstraint& c : model.linear_constraints()) count_row(c.tag);
  for (const QuadConstraint& c : model.quad_constraints()) count_row(c.tag);
  return r;
}

inline std::vector<std::string> validate_model(const MilpModel& model) {
  std::vector<std::string> out;
  const std::size_t n = model.num_vars();
  std::set<std::string> names;
  for (std::size_t i = 0; i < n; ++i) {
    const Variable& v = model.variables()[i];
    if (v.id != i) out.push_back("variable '" + v.name + "' has non-dense id");
    if (!(v.lb <= v.ub)) out.push_back("variable '" + v.name + "' has lb > ub");
    if (v.kind == VarKind::binary && (v.lb < 0.0 || v.ub > 1.0))
      out.push_back("binary variable '" + v.name + "' has bounds outside [0,1]");
    if (!names.insert(v.name).second) out.push_back("duplicate variable name '" + v.name + "'");
    if (v.name.empty() || detail::has_whitespace(v.name)) out.push_back("variable " + std::to_string(i) + " has an unusable name");
  }
  std::set<std::string> row_names;
  auto check_terms = [&](const std::string& where, const std::vector<Term>& terms) {
    std::set<VarId> seen;
    for (const Term& t : terms) {
      if (t.var >= n) out.push_back(where + " references unknown variable " + std::to_string(t.var));
      if (!std::isfinite(t.coef)) out.push_back(where + " has a non-finite coefficient");
      if (!seen.insert(t.var).second) out.push_back(where + " repeats variable " + std::to_string(t.var));
    }
  };
  for (const LinConstraint& c : model.linear_constraints()) {
    check_terms("constraint '" + c.name + "'", c.terms);
    if (!std::isfinite(c.rhs)) out.push_back("constraint '" + c.name + "' has a non-finite rhs");
    if (!row_names.insert(c.name).second) out.push_back("duplicate constraint name '" + c.name + "'");
  }
  for (const QuadConstraint& c : model.quad_constraints()) {
    check_terms("constraint '" + c.name + "'", c.lin);
    for (const QuadTerm& q : c.quad)
      if (q.i >= n || q.j >= n) out.push_back("constraint '" + c.name + "' references an unknown variable");
    if (!row_names.insert(c.name).second) out.push_back("duplicate constraint name '" + c.name + "'");
  }
  check_terms("objective", model.objective().lin);
  for (const QuadTerm& q : model.objective().quad)
    if (q.i >= n || q.j >= n) out.push_back("objective references an unknown variable");
  return out;
}

inline double eval_terms(std::span<const Term> terms, std::span<const double> x) {
  double s = 0.0;
  for (const Term& t : terms) s += t.coef * x[t.var];
  return s;
}

inline double eval_quad(std::span<const QuadTerm> terms, std::span<const double> x) {
  double s = 0.0;
  for (const QuadTerm& q : terms) s += q.coef * x[q.i] * x[q.j];
  return s;
}

inline double objective_value(const MilpModel& model, std::span<const double> x) {
  const Objective& o = model.objective();
  return o.constant + eval_terms(o.lin, x) + eval_quad(o.quad, x);
}

/// Positive amount by which `lhs (sense) rhs` is violated, 0 if satisfied.
inline double violation(double lhs, Sense sense, double rhs) {
  switch (sense) {
    case Sense::le: return std::max(0.0, lhs - rhs);
    case Sense::ge: return std::max(0.0, rhs - lhs);
    case Sense::eq: return std::abs(lhs - rhs);
  }
  return 0.0;
}

/// Largest bound, row or integrality violation of `x`, rows scaled by max(1, |rhs|, max |coef * x|).
inline double max_violation(const MilpModel& model, std::span<const double> x, bool check_integrality = true) {
  double worst = 0.0;
  for (const Variable& v : model.variables()) {
    const double val = x[v.id];
    worst = std::max({worst, v.lb - val, val - v.ub});
    if (check_integrality && v.is_integral()) worst = std::max(worst, std::abs(val - std::round(val)));
  }
  auto scale_of = [&](std::span<const Term> terms, double rhs) {
    double s = std::max(1.0, std::abs(rhs));
    for (const Term& t : terms) s = std::max(s, std::abs(t.coef * x[t.var]));
    return s;
  };
  for (const LinConstraint& c : model.linear_constraints()) {
    const double lhs = eval_terms(c.terms, x);
    worst = std::max(worst, violation(lhs, c.sense, c.rhs) / scale_of(c.terms, c.rhs));
  }
  for (const QuadConstraint& c : model.quad_constraints()) {
    const double lhs = eval_terms(c.lin, x) + eval_quad(c.quad, x);
    worst = std::max(worst, violation(lhs, c.sense, c.rhs) / scale_of(c.lin, c.rhs));
  }
  return worst;
}

/// Moves the objective into a constraint bounded by a fresh free variable t.
/// min f(x) becomes min t s.t. t >= f(x); max f(x) becomes max t s.t. t <= f(x).
inline MilpModel to_epigraph(const MilpModel& model) {
  MilpModel out = model;
  std::string tname = "t_epi";
  while (out.find_variable(tname)) tname += "_";
  const VarId t = out.add_variable(tname, -kInf, kInf, VarKind::continuous, VarTag::epigraph);
  const Objective& obj = model.objective();
  // t - f(x) >= c  (min)  or  t - f(x) <= c  (max)
  std::vector<Term> lin{{t, 1.0}};
  for (const Term& term : obj.lin) lin.push_back({term.var, -term.coef});
  std::vector<QuadTerm> quad;
  for (const QuadTerm& q : obj.quad) quad.push_back({q.i, q.j, -q.coef});
  const Sense sense = obj.sense == ObjSense::minimize ? Sense::ge : Sense::le;
  if (quad.empty())
    out.add_linear_constraint(std::move(lin), sense, obj.constant, ConTag::epigraph, "epigraph");
  else
    out.add_quad_constraint(std::move(quad), std::move(lin), sense, obj.constant, ConTag::epigraph, "epigraph");
  out.set_objective(Objective{obj.sense, {{t, 1.0}}, {}, 0.0});
  return out;
}

}  // namespace ddro
