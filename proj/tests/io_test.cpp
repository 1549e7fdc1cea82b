#include <gtest/gtest.h>

#include <filesystem>
#include <random>

#include "ddro/io.hpp"
#include "ddro/milp.hpp"
#include "random_models.hpp"

using namespace ddro;

namespace {

using test::pick_value;
using test::random_model;

void expect_equivalent(const MilpModel& a, const MilpModel& b) {
  const auto diff = test::model_difference(a, b);
  EXPECT_FALSE(diff) << *diff;
}

std::filesystem::path tmp(const std::string& name) {
  return std::filesystem::temp_directory_path() / ("ddro_io_test_" + name);
}

}  // namespace

TEST(Numbers, ShortestRoundTrip) {
  std::mt19937_64 g(5);
  for (int i = 0; i < 2000; ++i) {
    const double v = pick_value(g);
    EXPECT_EQ(*parse_number(format_number(v)), v);
  }
  EXPECT_EQ(format_number(0.1), "0.1");
  EXPECT_EQ(*parse_number("-inf"), -kInf);
  EXPECT_FALSE(parse_number("1.2.3"));
}

TEST(Mps, RandomRoundTrip) {
  for (std::uint64_t s = 0; s < 100; ++s) {
    const MilpModel m = random_model(s, false);
    const MilpModel back = parse_mps(mps_string(m));
    SCOPED_TRACE("seed " + std::to_string(s));
    expect_equivalent(m, back);
  }
}

TEST(Mps, ObjectiveConstantViaRhs) {
  MilpModel m("k");
  const VarId x = m.add_variable("x", 0, 4, VarKind::continuous, VarTag::decision);
  m.set_objective(Objective{ObjSense::minimize, {{x, 1.0}}, {}, 7.5});
  const std::string text = mps_string(m);
  EXPECT_NE(text.find("RHS  obj  -7.5"), std::string::npos);
  EXPECT_EQ(parse_mps(text).objective().constant, 7.5);
}

TEST(Mps, IntegerMarkersAndFile) {
  MilpModel m("markers");
  const VarId a = m.add_variable("a", 0, 1, VarKind::binary, VarTag::decision);
  const VarId b = m.add_variable("b", 0, 2.5, VarKind::continuous, VarTag::decision);
  const VarId c = m.add_variable("c", 0, 7, VarKind::integer, VarTag::decision);
  m.add_linear_constraint({{a, 1}, {b, 1}, {c, 1}}, Sense::le, 4, ConTag::structural, "cap");
  m.set_objective(Objective{ObjSense::maximize, {{a, 3}, {b, 1}, {c, 1}}, {}, 0});
  const std::string text = mps_string(m);
  EXPECT_NE(text.find("'INTORG'"), std::string::npos);
  EXPECT_NE(text.find("OBJSENSE"), std::string::npos);
  write_mps(m, tmp("markers.mps"));
  const MilpModel back = read_mps(tmp("markers.mps"));
  expect_equivalent(m, back);
  EXPECT_NEAR(solve_milp(back).objective, solve_milp(m).objective, 1e-9);
  std::filesystem::remove(tmp("markers.mps"));
}

TEST(Mps, QuadraticRejected) {
  MilpModel m("q");
  const VarId x = m.add_variable("x", 0, 1, VarKind::continuous, VarTag::decision);
  m.add_quad_constraint({{x, x, 1.0}}, {}, Sense::le, 1, ConTag::structural, "q");
  try {
    mps_string(m);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::quadratic_content);
  }
}

TEST(Mps, DuplicateOrUnsafeNamesFallBack) {
  MilpModel m("names");
  m.add_variable("has space", 0, 1, VarKind::continuous, VarTag::decision);
  m.add_variable("ok", 0, 1, VarKind::continuous, VarTag::decision);
  m.set_objective(Objective{});
  const MilpModel back = parse_mps(mps_string(m));
  EXPECT_EQ(back.var(0).name, "C0");
  EXPECT_EQ(back.var(1).name, "C1");
}

TEST(Mps, MalformedInputs) {
  EXPECT_THROW(parse_mps("NAME x\nROWS\n N obj\nCOLUMNS\n"), Error);
  EXPECT_THROW(parse_mps("NAME x\nROWS\n N obj\nCOLUMNS\n    x  nope  1\nENDATA\n"), Error);
  EXPECT_THROW(parse_mps("NAME x\nROWS\n N obj\nCOLUMNS\n    x  obj  abc\nENDATA\n"), Error);
}

TEST(LpFormat, RandomRoundTrip) {
  for (std::uint64_t s = 0; s < 100; ++s) {
    const MilpModel m = random_model(1000 + s, s % 2 == 0);
    const std::string text = lp_string(m);
    SCOPED_TRACE("seed " + std::to_string(s) + "\n" + text);
    expect_equivalent(m, parse_lp(text));
  }
}

TEST(LpFormat, QuadraticBlocks) {
  MilpModel m("pf");
  const VarId y0 = m.add_variable("y_0", 0, kInf, VarKind::continuous, VarTag::decision);
  const VarId y1 = m.add_variable("y_1", 0, kInf, VarKind::continuous, VarTag::decision);
  m.add_quad_constraint({{y0, y0, 2.0}, {y0, y1, 1.0}}, {}, Sense::le, 0.5, ConTag::structural, "variance");
  m.set_objective(Objective{ObjSense::maximize, {{y0, 1.0}}, {{y0, y1, -3.0}}, 0.0});
  const std::string text = lp_string(m);
  EXPECT_NE(text.find("variance: [ 2 y_0 ^ 2 + 1 y_0 * y_1 ] <= 0.5"), std::string::npos) << text;
  EXPECT_NE(text.find("[ - 6 y_0 * y_1 ] / 2"), std::string::npos) << text;
  write_lp_format(m, tmp("pf.lp"));
  expect_equivalent(m, read_lp_format(tmp("pf.lp")));
  std::filesystem::remove(tmp("pf.lp"));
}

TEST(LpFormat, MissingEnd) { EXPECT_THROW(parse_lp("Minimize\n obj: x\nSubject To\n c: x >= 1\n"), Error); }

TEST(Sol, RoundTripAndComments) {
  const MilpModel m = random_model(3, false);
  SolveResult r;
  r.status = SolveStatus::optimal;
  r.values.assign(m.num_vars(), 0.25);
  r.objective = objective_value(m, r.values);
  const SolveResult back = parse_sol(sol_string(m, r) + "# trailing comment\n", m);
  EXPECT_EQ(back.status, SolveStatus::optimal);
  EXPECT_EQ(back.values, r.values);
  EXPECT_EQ(back.objective, r.objective);
  EXPECT_THROW(parse_sol("nosuchvar 1\n", m), Error);
}

TEST(External, FakeSolverFixture) {
  MilpModel m("fake");
  const VarId x = m.add_variable("x", 0, 1, VarKind::binary, VarTag::decision);
  const VarId y = m.add_variable("y", 0, 5, VarKind::continuous, VarTag::decision);
  m.set_objective(Objective{ObjSense::maximize, {{x, 2.0}, {y, 1.0}}, {}, 0.0});
  ExternalSolver s;
  s.command = "test -s {input} && printf 'x 1\\ny 5\\n' > {output}";
  const SolveResult r = external_solve(m, s);
  EXPECT_EQ(r.status, SolveStatus::optimal);
  EXPECT_EQ(r.values, (std::vector<double>{1.0, 5.0}));
  EXPECT_EQ(r.objective, 7.0);
}

TEST(External, MissingOutputIsParseFailure) {
  MilpModel m("fake");
  m.add_variable("x", 0, 1, VarKind::binary, VarTag::decision);
  m.set_objective(Objective{});
  ExternalSolver s;
  s.command = "true {input} {output}";
  try {
    external_solve(m, s);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::parse_failure);
  }
  s.command = "exit 3 {input}";
  try {
    external_solve(m, s);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::solver_error);
  }
}

TEST(External, TimeoutKillsProcessGroup) {
  MilpModel m("slow");
  m.add_variable("x", 0, 1, VarKind::binary, VarTag::decision);
  m.set_objective(Objective{});
  ExternalSolver s;
  s.command = "sleep 5; echo {input} {output}";
  s.timeout_s = 0.2;
  const auto t0 = std::chrono::steady_clock::now();
  const SolveResult r = external_solve(m, s);
  EXPECT_EQ(r.status, SolveStatus::time_limit);
  EXPECT_LT(std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count(), 3.0);
}

TEST(External, MibsLogScrape) {
  MilpModel m("b");
  m.add_variable("x_0", 0, 1, VarKind::binary, VarTag::decision);
  m.add_variable("x_1", 0, 1, VarKind::binary, VarTag::decision);
  m.set_objective(Objective{});
  const SolveResult r = parse_mibs_log("Some banner\nCost = -12.5\nx[1] = 1\n", m);
  EXPECT_EQ(r.status, SolveStatus::optimal);
  EXPECT_EQ(r.objective, -12.5);
  EXPECT_EQ(r.values, (std::vector<double>{0.0, 1.0}));
  EXPECT_EQ(parse_mibs_log("problem is infeasible\n", m).status, SolveStatus::infeasible);
  EXPECT_THROW(parse_mibs_log("nothing here\n", m), Error);
}
