#include <gtest/gtest.h>

#include <random>

#include "ddro/milp.hpp"

namespace ddro {
namespace {

TEST(SolveLp, SmallMax) {
  MilpModel m("lp");
  auto u1 = m.add_variable("u1", 0, 1, VarKind::continuous, VarTag::uncertainty);
  auto u2 = m.add_variable("u2", 0, 1, VarKind::continuous, VarTag::uncertainty);
  m.add_linear_constraint({{u1, 1}, {u2, 1}}, Sense::le, 1, ConTag::uncertainty_set);
  m.set_objective({ObjSense::maximize, {{u1, 3}, {u2, 2}}, {}, 0});
  auto r = solve_lp(m);
  ASSERT_EQ(r.status, SolveStatus::optimal);
  EXPECT_NEAR(r.objective, 3.0, 1e-9);
}

// Small pure-integer program: max c.x s.t. A x <= b, 0 <= x <= ub.
struct SmallIp {
  std::vector<double> c, b;
  std::vector<std::vector<double>> A;
  std::vector<int> ub;
};

SmallIp random_ip(std::uint64_t seed) {
  std::mt19937_64 g(seed);
  std::uniform_int_distribution<int> coef(-5, 9);
  SmallIp p;
  const std::size_t n = 2 + g() % 4, m = 1 + g() % 4;
  for (std::size_t j = 0; j < n; ++j) {
    p.c.push_back(coef(g));
    p.ub.push_back(1 + static_cast<int>(g() % 3));
  }
  for (std::size_t i = 0; i < m; ++i) {
    std::vector<double> row;
    for (std::size_t j = 0; j < n; ++j) row.push_back(coef(g));
    p.A.push_back(row);
    p.b.push_back(static_cast<double>(g() % 15) - 3);
  }
  return p;
}

std::optional<double> enumerate(const SmallIp& p) {
  std::optional<double> best;
  std::vector<int> x(p.c.size(), 0);
  while (true) {
    bool ok = true;
    for (std::size_t i = 0; i < p.A.size() && ok; ++i) {
      double lhs = 0;
      for (std::size_t j = 0; j < x.size(); ++j) lhs += p.A[i][j] * x[j];
      ok = lhs <= p.b[i] + 1e-9;
    }
    if (ok) {
      double v = 0;
      for (std::size_t j = 0; j < x.size(); ++j) v += p.c[j] * x[j];
      if (!best || v > *best) best = v;
    }
    std::size_t j = 0;
    while (j < x.size() && x[j] == p.ub[j]) x[j++] = 0;
    if (j == x.size()) return best;
    ++x[j];
  }
}

MilpModel to_model(const SmallIp& p) {
  MilpModel m("ip");
  std::vector<Term> obj;
  for (std::size_t j = 0; j < p.c.size(); ++j) {
    const VarKind k = p.ub[j] == 1 ? VarKind::binary : VarKind::integer;
    const VarId v = m.add_variable("x" + std::to_string(j), 0, p.ub[j], k, VarTag::decision);
    obj.push_back({v, p.c[j]});
  }
  for (std::size_t i = 0; i < p.A.size(); ++i) {
    std::vector<Term> row;
    for (std::size_t j = 0; j < p.c.size(); ++j)
      if (p.A[i][j] != 0) row.push_back({j, p.A[i][j]});
    if (row.empty()) row.push_back({0, 0.0});
    m.add_linear_constraint(row, Sense::le, p.b[i], ConTag::structural);
  }
  m.set_objective({ObjSense::maximize, obj, {}, 0});
  return m;
}

TEST(SolveMilp, MatchesEnumeration) {
  for (std::uint64_t seed = 0; seed < 300; ++seed) {
    const SmallIp p = random_ip(seed);
    const auto expected = enumerate(p);
    const SolveResult r = solve_milp(to_model(p));
    if (!expected) {
      EXPECT_EQ(r.status, SolveStatus::infeasible) << seed;
      continue;
    }
    ASSERT_EQ(r.status, SolveStatus::optimal) << seed;
    EXPECT_NEAR(r.objective, *expected, 1e-6) << seed;
    MilpOptions mf;
    mf.branching = BranchRule::most_fractional;
    const SolveResult f = solve_milp(to_model(p), mf);
    ASSERT_EQ(f.status, SolveStatus::optimal) << seed;
    EXPECT_NEAR(f.objective, *expected, 1e-6) << seed;
    for (std::size_t j = 0; j < p.c.size(); ++j)
      EXPECT_NEAR(r.values[j], std::round(r.values[j]), 1e-6) << seed;
    EXPECT_GE(r.bound, r.objective - 1e-6) << seed;
  }
}

TEST(SolveMilp, Infeasible) {
  MilpModel m("inf");
  auto x = m.add_variable("x", 0, 1, VarKind::binary, VarTag::decision);
  auto y = m.add_variable("y", 0, 1, VarKind::binary, VarTag::decision);
  m.add_linear_constraint({{x, 2}, {y, 2}}, Sense::eq, 1, ConTag::structural);
  m.set_objective({ObjSense::minimize, {{x, 1}}, {}, 0});
  EXPECT_EQ(solve_milp(m).status, SolveStatus::infeasible);
}

TEST(SolveMilp, Unbounded) {
  MilpModel m("unb");
  auto x = m.add_variable("x", 0, kInf, VarKind::continuous, VarTag::decision);
  auto y = m.add_variable("y", 0, 1, VarKind::binary, VarTag::decision);
  m.add_linear_constraint({{x, 1}, {y, -1}}, Sense::ge, 0, ConTag::structural);
  m.set_objective({ObjSense::maximize, {{x, 1}}, {}, 0});
  EXPECT_EQ(solve_milp(m).status, SolveStatus::unbounded);
}

TEST(SolveMilp, NodeLimitReportsIncumbentAndBound) {
  // Equal-weight knapsack with an odd capacity needs many nodes to close the gap.
  MilpModel m("knap");
  std::vector<Term> w, c;
  for (int j = 0; j < 30; ++j) {
    const VarId v = m.add_variable("x" + std::to_string(j), 0, 1, VarKind::binary, VarTag::decision);
    w.push_back({v, 2.0});
    c.push_back({v, 2.0 + 1e-3 * j});
  }
  m.add_linear_constraint(w, Sense::le, 31, ConTag::structural);
  m.set_objective({ObjSense::maximize, c, {}, 0});
  MilpOptions opt;
  opt.node_limit = 5;
  const SolveResult r = solve_milp(m, opt);
  ASSERT_EQ(r.status, SolveStatus::node_limit);
  EXPECT_EQ(r.nodes, 5);
  EXPECT_GE(r.bound, r.objective - 1e-9);
}

TEST(SolveMilp, RejectsQuadratic) {
  MilpModel m("q");
  auto x = m.add_variable("x", 0, 1, VarKind::continuous, VarTag::decision);
  m.set_objective({ObjSense::minimize, {}, {{x, x, 1.0}}, 0});
  try {
    solve_milp(m);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::quadratic_content);
  }
}

TEST(SolveLp, MinimizeWithEqualityAndNegativeBounds) {
  MilpModel m("lp2");
  auto x = m.add_variable("x", -5, 5, VarKind::continuous, VarTag::decision);
  auto y = m.add_variable("y", -kInf, kInf, VarKind::continuous, VarTag::decision);
  m.add_linear_constraint({{x, 1}, {y, 1}}, Sense::eq, 2, ConTag::structural);
  m.add_linear_constraint({{y, 1}}, Sense::le, 10, ConTag::structural);
  m.set_objective({ObjSense::minimize, {{x, 1}, {y, 3}}, {}, 1});
  const SolveResult r = solve_lp(m);
  ASSERT_EQ(r.status, SolveStatus::optimal);
  // x = 5, y = -3 gives 5 - 9 + 1.
  EXPECT_NEAR(r.objective, -3.0, 1e-9);
  EXPECT_NEAR(r.values[x], 5.0, 1e-9);
  EXPECT_NEAR(r.values[y], -3.0, 1e-9);
}

}  // namespace
}  // namespace ddro
