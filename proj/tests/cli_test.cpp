#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <sys/wait.h>

#include "ddro/harness.hpp"
#include "ddro/io.hpp"

using namespace ddro;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  int code = 0;
  std::string out, err;
};

class Cli : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() / ("ddro_cli_test_" + std::to_string(::getpid()));
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  std::string path(const std::string& name) const { return (dir_ / name).string(); }

  Outcome run(const std::string& args) const {
    const std::string cmd = std::string(DDRO_CLI) + " " + args + " > " + path("stdout") + " 2> " + path("stderr");
    const int status = std::system(cmd.c_str());
    Outcome r;
    r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    r.out = read_file(path("stdout"));
    r.err = read_file(path("stderr"));
    return r;
  }

  fs::path dir_;
};

}  // namespace

TEST_F(Cli, GenerateIsDeterministic) {
  ASSERT_EQ(run("generate sp-budgeted --nodes 8 --seed 7 -o " + path("a.json")).code, 0);
  ASSERT_EQ(run("generate sp-budgeted --nodes 8 --seed 7 -o " + path("b.json")).code, 0);
  EXPECT_EQ(read_file(path("a.json")), read_file(path("b.json")));
  EXPECT_EQ(read_instance(path("a.json")), generate("sp-budgeted", 8, 7));
}

TEST_F(Cli, BuildWritesModels) {
  ASSERT_EQ(run("generate kp-budgeted --items 12 --seed 2 -o " + path("k.json")).code, 0);
  const Outcome mps = run("build --approach robust --instance " + path("k.json") + " -o " + path("m.mps"));
  ASSERT_EQ(mps.code, 0) << mps.err;
  const Outcome lp = run("build --approach bilevel_duality --instance " + path("k.json") + " -o " + path("m.lp"));
  ASSERT_EQ(lp.code, 0) << lp.err;
  EXPECT_NO_THROW(read_mps(path("m.mps")));
  EXPECT_NO_THROW(read_lp_format(path("m.lp")));
  const Outcome rep = run("build --approach robust --instance " + path("k.json"));
  ASSERT_EQ(rep.code, 0);
  EXPECT_EQ(json::parse(rep.out).at("size").at("binary_vars"), 24);
}

TEST_F(Cli, VerifyAgrees) {
  ASSERT_EQ(run("generate sp-budgeted --nodes 7 --seed 3 -o " + path("i.json")).code, 0);
  const Outcome v = run("verify --instance " + path("i.json") + " --approaches robust,bilevel_duality,bilevel_kkt");
  EXPECT_EQ(v.code, 0) << v.err;
  EXPECT_NE(v.out.find("values agree within 1e-05"), std::string::npos);
}

TEST_F(Cli, ExternalSolverRoundTripThroughFiles) {
  // The CLI itself acts as the external MILP solver: MPS in, .sol out.
  ASSERT_EQ(run("generate kp-contknap --items 10 --k 3 --seed 5 -o " + path("k.json")).code, 0);
  const std::string ext = "'" + std::string(DDRO_CLI) + " solve --model {input} --sol {output} -o /dev/null'";
  const Outcome e = run("solve --instance " + path("k.json") + " --approach external --external " + ext);
  ASSERT_EQ(e.code, 0) << e.err;
  const Outcome r = run("solve --instance " + path("k.json") + " --approach robust");
  ASSERT_EQ(r.code, 0) << r.err;
  const json je = json::parse(e.out), jr = json::parse(r.out);
  EXPECT_EQ(je.at("status"), "optimal");
  EXPECT_NEAR(je.at("objective").get<double>(), jr.at("objective").get<double>(), 1e-9);
  EXPECT_EQ(je.at("decisions").at("x"), jr.at("decisions").at("x"));
}

TEST_F(Cli, WorstCaseMatchesSolve) {
  ASSERT_EQ(run("generate sp-discrete --nodes 4 --seed 4 -o " + path("d.json")).code, 0);
  const Outcome s = run("solve --instance " + path("d.json") + " --approach bilevel_discrete_enum -o " + path("r.json"));
  ASSERT_EQ(s.code, 0) << s.err;
  const json r = json::parse(read_file(path("r.json")));
  if (r.at("status") != "optimal") GTEST_SKIP() << "instance has no feasible path";
  const Outcome w = run("worst-case --instance " + path("d.json") + " --decisions " + path("r.json"));
  ASSERT_EQ(w.code, 0) << w.err;
  EXPECT_NEAR(json::parse(w.out).at("value").get<double>(), r.at("objective").get<double>(), 1e-9);
}

TEST_F(Cli, ExperimentAndEcdf) {
  write_file(path("c.json"), R"({"problem":"sp","uncertainty":"budgeted","sizes":[5,6],"seeds_per_size":3,
    "approaches":["robust","bilevel_duality"],"time_limit_s":30})");
  const Outcome e = run("experiment --config " + path("c.json") + " -o " + path("e.csv"));
  ASSERT_EQ(e.code, 0) << e.err;
  const auto records = read_csv(path("e.csv"));
  EXPECT_EQ(records.size(), 12u);
  const Outcome c = run("ecdf --csv " + path("e.csv") + " --metric nodes --solved-by-all");
  ASSERT_EQ(c.code, 0) << c.err;
  EXPECT_EQ(c.out.substr(0, c.out.find('\n')), "approach,value,fraction");

  write_file(path("t.csv"), std::string(kCsvHeader) + "\na,sp,budgeted,robust,5,1,time_limit,,,60000,9\n");
  const Outcome empty = run("ecdf --csv " + path("t.csv") + " --solved-by-all");
  EXPECT_NE(empty.code, 0);
  EXPECT_EQ(json::parse(empty.err).at("error"), "empty-selection");
}

TEST_F(Cli, ExportMibs) {
  ASSERT_EQ(run("generate kp-discrete --items 8 --seed 1 -o " + path("k.json")).code, 0);
  const Outcome r = run("export-mibs --instance " + path("k.json") + " -o " + path("kp"));
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_TRUE(fs::exists(path("kp.mps")));
  EXPECT_TRUE(fs::exists(path("kp.aux")));
}

TEST_F(Cli, ErrorsAreMachineReadable) {
  const Outcome missing = run("build --approach robust --instance " + path("none.json"));
  EXPECT_NE(missing.code, 0);
  EXPECT_EQ(json::parse(missing.err).at("error"), "io");
  const Outcome usage = run("solve --approach robust");
  EXPECT_NE(usage.code, 0);
  EXPECT_EQ(json::parse(usage.err).at("error"), "usage");
  write_file(path("bad.json"), "{\"problem\":\"sp\"}");
  const Outcome cfg = run("experiment --config " + path("bad.json"));
  EXPECT_NE(cfg.code, 0);
  EXPECT_EQ(json::parse(cfg.err).at("error"), "config-parse");
  ASSERT_EQ(run("generate kp-discrete --items 8 --seed 1 -o " + path("k.json")).code, 0);
  const Outcome disc = run("build --approach robust --instance " + path("k.json"));
  EXPECT_EQ(json::parse(disc.err).at("error"), "discrete-set-unsupported");
  EXPECT_NE(run("frobnicate").code, 0);
  EXPECT_EQ(run("--help").code, 0);
}
