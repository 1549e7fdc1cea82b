#include <gtest/gtest.h>

#include <filesystem>
#include <random>

#include "ddro/harness.hpp"

using namespace ddro;

namespace {

ExperimentRecord record(std::string id, std::string approach, std::string status, long time_ms, long nodes = 0) {
  ExperimentRecord r;
  r.instance_id = std::move(id);
  r.problem = "sp";
  r.uncertainty = "budgeted";
  r.approach = std::move(approach);
  r.size = 8;
  r.seed = 8000;
  r.status = std::move(status);
  r.time_ms = time_ms;
  r.nodes = nodes;
  return r;
}

std::vector<ExperimentRecord> random_records(std::mt19937_64& gen) {
  std::uniform_int_distribution<int> count(0, 30), pick(0, 5), small(0, 100000);
  std::uniform_real_distribution<double> real(-1e6, 1e6);
  const auto& statuses = record_statuses();
  std::vector<ExperimentRecord> out;
  const int n = count(gen);
  for (int i = 0; i < n; ++i) {
    ExperimentRecord r;
    r.instance_id = "inst-" + std::to_string(small(gen));
    r.problem = pick(gen) % 2 ? "sp" : "kp";
    r.uncertainty = pick(gen) % 2 ? "budgeted" : "discrete_knapsack";
    r.approach = std::string(to_string(static_cast<Approach>(pick(gen) % 5)));
    r.size = small(gen);
    r.seed = gen();
    r.status = statuses[static_cast<std::size_t>(pick(gen))];
    if (pick(gen) % 3) r.objective = real(gen) / (1 + small(gen));
    if (pick(gen) % 3) r.bound = pick(gen) == 0 ? -std::numeric_limits<double>::infinity() : real(gen);
    r.time_ms = small(gen);
    r.nodes = small(gen);
    out.push_back(std::move(r));
  }
  return out;
}

std::vector<ExperimentRecord> without_time(std::vector<ExperimentRecord> v) {
  for (auto& r : v) r.time_ms = 0;
  return v;
}

}  // namespace

TEST(Csv, RandomRoundTrip) {
  std::mt19937_64 gen(3);
  for (int rep = 0; rep < 100; ++rep) {
    const auto records = random_records(gen);
    const std::string text = csv_string(records);
    ASSERT_EQ(text.substr(0, text.find('\n')), kCsvHeader);
    EXPECT_EQ(parse_csv(text), records);
  }
}

TEST(Csv, FileRoundTripAndMalformed) {
  const auto path = std::filesystem::temp_directory_path() / "ddro_harness_test.csv";
  std::vector<ExperimentRecord> rs{record("a", "robust", "optimal", 5), record("b", "robust", "error", 0)};
  rs[0].objective = 12.5;
  rs[0].bound = 12.5;
  write_csv(rs, path);
  EXPECT_EQ(read_csv(path), rs);
  std::filesystem::remove(path);

  const std::string header(kCsvHeader);
  EXPECT_THROW(parse_csv(""), Error);
  EXPECT_THROW(parse_csv("id,problem\n"), Error);
  EXPECT_THROW(parse_csv(header + "\na,sp,budgeted,robust,8,1,solved,1,1,3,0\n"), Error);
  EXPECT_THROW(parse_csv(header + "\na,sp,budgeted,robust,8,1,optimal,1,1,3\n"), Error);
  EXPECT_THROW(parse_csv(header + "\na,sp,budgeted,robust,x,1,optimal,1,1,3,0\n"), Error);
  EXPECT_THROW(parse_csv(header + "\na,sp,budgeted,robust,8,1,optimal,abc,1,3,0\n"), Error);
  EXPECT_TRUE(parse_csv(header + "\r\n").empty());
  auto bad = rs;
  bad[0].instance_id = "a,b";
  EXPECT_THROW(csv_string(bad), Error);
}

TEST(Ecdf, StepDefinition) {
  const auto pts = ecdf_points({4, 2, 1, 2});
  const std::vector<EcdfPoint> expected{{1, 0.25}, {2, 0.75}, {4, 1.0}};
  EXPECT_EQ(pts, expected);
  EXPECT_THROW(ecdf_points({}), Error);
}

TEST(Ecdf, MonotoneEndsAtOne) {
  std::mt19937_64 gen(9);
  std::uniform_int_distribution<int> d(0, 50);
  for (int rep = 0; rep < 50; ++rep) {
    std::vector<double> v(static_cast<std::size_t>(1 + d(gen)));
    for (double& x : v) x = d(gen);
    const auto pts = ecdf_points(v);
    EXPECT_EQ(pts.back().fraction, 1.0);
    EXPECT_EQ(pts.back().value, *std::max_element(v.begin(), v.end()));
    for (std::size_t i = 1; i < pts.size(); ++i) {
      EXPECT_LT(pts[i - 1].value, pts[i].value);
      EXPECT_LT(pts[i - 1].fraction, pts[i].fraction);
    }
    for (const auto& p : pts) {
      const auto below = std::count_if(v.begin(), v.end(), [&](double x) { return x <= p.value; });
      EXPECT_DOUBLE_EQ(p.fraction, static_cast<double>(below) / static_cast<double>(v.size()));
    }
  }
}

TEST(Ecdf, SolvedByAllIntersection) {
  std::vector<ExperimentRecord> rs{
      record("i1", "robust", "optimal", 10, 1),          record("i1", "bilevel_duality", "optimal", 30, 5),
      record("i2", "robust", "optimal", 20, 2),          record("i2", "bilevel_duality", "time_limit", 60000, 9),
      record("i3", "robust", "infeasible", 5, 1),        record("i3", "bilevel_duality", "infeasible", 7, 1),
  };
  const auto all = ecdf(rs, Metric::time_ms);
  ASSERT_EQ(all.size(), 2u);
  EXPECT_EQ(all.at("robust").size(), 3u);
  EXPECT_EQ(all.at("bilevel_duality").size(), 2u);

  const auto both = ecdf(rs, Metric::time_ms, {{}, true});
  const std::vector<EcdfPoint> robust{{5, 0.5}, {10, 1.0}};
  EXPECT_EQ(both.at("robust"), robust);
  const auto nodes = ecdf(rs, Metric::nodes, {{"bilevel_duality"}, false});
  ASSERT_EQ(nodes.size(), 1u);
  const std::vector<EcdfPoint> dn{{1, 0.5}, {5, 1.0}};
  EXPECT_EQ(nodes.at("bilevel_duality"), dn);

  std::vector<ExperimentRecord> timeouts{record("i1", "robust", "time_limit", 60000),
                                         record("i1", "bilevel_duality", "optimal", 3)};
  try {
    ecdf(timeouts, Metric::time_ms, {{}, true});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::empty_selection);
  }
  const std::string csv = ecdf_csv(both);
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "approach,value,fraction");
}

TEST(Config, ParsesAndRejects) {
  const json ok = json::parse(R"({"problem":"sp","uncertainty":"budgeted","sizes":[5,6],"seeds_per_size":3,
    "approaches":["robust","bilevel_duality"],"time_limit_s":10,"node_limit":5000})");
  const ExperimentConfig c = config_from_json(ok);
  EXPECT_EQ(c.sizes, (std::vector<int>{5, 6}));
  EXPECT_EQ(c.node_limit, 5000);
  EXPECT_FALSE(c.external_command.has_value());

  auto expect_config_error = [](json j) {
    try {
      config_from_json(j);
      FAIL() << j.dump();
    } catch (const Error& e) {
      EXPECT_EQ(e.code(), ErrorCode::config_parse) << j.dump();
    }
  };
  json j = ok;
  j.erase("sizes");
  expect_config_error(j);
  j = ok;
  j["approaches"] = {"robust", "simulated_annealing"};
  expect_config_error(j);
  j = ok;
  j["uncertainty"] = "ellipsoidal";
  expect_config_error(j);
  j = ok;
  j["problem"] = "tsp";
  expect_config_error(j);
  j = ok;
  j["approaches"] = {"external"};
  expect_config_error(j);
  j = ok;
  j["seeds_per_size"] = "three";
  expect_config_error(j);
  j = ok;
  j["sizes"] = json::array();
  expect_config_error(j);

  const auto path = std::filesystem::temp_directory_path() / "ddro_bad_config.json";
  write_file(path, "{not json");
  EXPECT_THROW(read_config(path), Error);
  std::filesystem::remove(path);
  EXPECT_THROW(read_config("/nonexistent/config.json"), Error);
}

TEST(Plan, SeedsAndIds) {
  ExperimentConfig c;
  c.problem = "kp";
  c.uncertainty = UncertaintyKind::continuous_knapsack;
  c.sizes = {10, 12};
  c.seeds_per_size = 22;
  c.approaches = {Approach::robust};
  const auto plan = plan_instances(c);
  ASSERT_EQ(plan.size(), 44u);
  EXPECT_EQ(plan[0].seed, 10000u);
  EXPECT_EQ(plan[21].seed, 10021u);
  EXPECT_EQ(plan[22].seed, 12000u);
  EXPECT_EQ(plan[0].k, 1);
  EXPECT_EQ(plan[19].k, 20);
  EXPECT_EQ(plan[20].k, 1);
  std::set<std::string> ids;
  for (const auto& p : plan) ids.insert(p.id);
  EXPECT_EQ(ids.size(), plan.size());
}

TEST(Experiment, CardinalityAndDeterminism) {
  ExperimentConfig c;
  c.problem = "sp";
  c.uncertainty = UncertaintyKind::budgeted;
  c.sizes = {5, 6};
  c.seeds_per_size = 3;
  c.approaches = {Approach::robust, Approach::bilevel_duality};
  c.time_limit_s = 30;
  const auto a = run_experiment(c);
  ASSERT_EQ(a.size(), 12u);
  for (std::size_t i = 1; i < a.size(); ++i)
    EXPECT_LE(std::tie(a[i - 1].instance_id, a[i - 1].approach), std::tie(a[i].instance_id, a[i].approach));
  c.workers = 4;
  const auto b = run_experiment(c);
  EXPECT_EQ(without_time(a), without_time(b));
  EXPECT_EQ(csv_string(without_time(a)), csv_string(without_time(b)));

  std::map<std::string, std::optional<double>> objective;
  for (const auto& r : a) {
    EXPECT_NE(r.status, "error") << r.instance_id;
    if (r.status != "optimal") continue;
    auto [it, fresh] = objective.emplace(r.instance_id, r.objective);
    if (!fresh) {
      EXPECT_NEAR(*it->second, *r.objective, 1e-5) << r.instance_id;
    }
  }
  const auto counts = solved_counts(a);
  EXPECT_EQ(counts.size(), 4u);
  for (const auto& [key, n] : counts) EXPECT_EQ(n, 3) << key.first << " " << key.second;
}

TEST(Experiment, FailuresBecomeErrorRecords) {
  ExperimentConfig c;
  c.problem = "kp";
  c.uncertainty = UncertaintyKind::discrete_knapsack;
  c.sizes = {8};
  c.seeds_per_size = 2;
  c.approaches = {Approach::robust, Approach::bilevel_discrete_enum};
  const auto rs = run_experiment(c);
  ASSERT_EQ(rs.size(), 4u);
  for (const auto& r : rs) {
    if (r.approach == "robust") {
      EXPECT_EQ(r.status, "error");
      EXPECT_FALSE(r.objective.has_value());
    } else {
      EXPECT_EQ(r.status, "optimal");
      EXPECT_TRUE(r.objective.has_value());
    }
    EXPECT_EQ(r.problem, "kp");
    EXPECT_EQ(r.uncertainty, "discrete_knapsack");
  }
}
