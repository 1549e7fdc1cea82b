#include <gtest/gtest.h>

#include <Eigen/Dense>
#include <filesystem>
#include <numeric>
#include <set>

#include "ddro/instgen.hpp"
#include "ddro/milp.hpp"
#include "ddro/problems.hpp"
#include "oracles.hpp"

using namespace ddro;

namespace {

struct Moments {
  double sum = 0.0;
  std::size_t n = 0;
  void add(double v) {
    sum += v;
    ++n;
  }
  double mean() const { return sum / static_cast<double>(n); }
};

// Empirical mean of n draws from a distribution with the given mean and sd lies within 3 sigma.
void expect_mean(const Moments& m, double mu, double sd) {
  ASSERT_GT(m.n, 0u);
  const double sigma = sd / std::sqrt(static_cast<double>(m.n));
  EXPECT_NEAR(m.mean(), mu, 3 * sigma) << "over " << m.n << " draws";
}

double uniform_sd(double a, double b) { return (b - a) / std::sqrt(12.0); }
double uniform_int_sd(int a, int b) { return std::sqrt((std::pow(b - a + 1.0, 2) - 1.0) / 12.0); }

double total(const std::vector<double>& v) { return std::accumulate(v.begin(), v.end(), 0.0); }

}  // namespace

TEST(Rng, UniformMeans) {
  Rng rng(11);
  Moments r, i;
  for (int k = 0; k < 10000; ++k) {
    const double v = rng.uniform_real(0.0, 100.0);
    ASSERT_GE(v, 0.0);
    ASSERT_LT(v, 100.0);
    r.add(v);
    const auto w = rng.uniform_int(1, 100);
    ASSERT_GE(w, 1);
    ASSERT_LE(w, 100);
    i.add(static_cast<double>(w));
  }
  expect_mean(r, 50.0, uniform_sd(0, 100));
  expect_mean(i, 50.5, uniform_int_sd(1, 100));
}

TEST(Rng, SameSeedSameStream) {
  Rng a(5), b(5), c(6);
  bool differs = false;
  for (int k = 0; k < 100; ++k) {
    const auto x = a.next();
    EXPECT_EQ(x, b.next());
    differs |= x != c.next();
  }
  EXPECT_TRUE(differs);
}

TEST(GenSp, BudgetedFields) {
  for (int nodes : {5, 20, 50}) {
    const SpInstance s = gen_sp_budgeted(nodes, 3);
    EXPECT_TRUE(validate(s).empty());
    EXPECT_EQ(s.Gamma, 2);
    EXPECT_EQ(s.num_arcs(), (static_cast<std::size_t>(nodes) * (nodes - 1) * 400 + 500) / 1000);
    for (std::size_t a = 0; a < s.num_arcs(); ++a) {
      EXPECT_EQ(s.c[a], 1.0);
      EXPECT_EQ(s.gamma[a], 0.2);
      EXPECT_EQ(s.d_hat[a], s.d_bar[a]);
    }
    EXPECT_FALSE(s.discrete.has_value());
  }
  EXPECT_EQ(gen_sp_budgeted(50, 1).num_arcs(), 980u);
  EXPECT_EQ(gen_sp_discrete(5, 1).num_arcs(), 16u);
}

TEST(GenSp, GeometryReplayed) {
  // Points are the first 2|V| draws of the stream; arcs are the shortest
  // ordered pairs; s,t is the farthest pair.
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    const int nodes = 15;
    Rng rng(seed);
    std::vector<double> px, py;
    for (int v = 0; v < nodes; ++v) {
      px.push_back(rng.uniform_real(0.0, 100.0));
      py.push_back(rng.uniform_real(0.0, 100.0));
    }
    auto dist = [&](int i, int j) { return std::hypot(px[i] - px[j], py[i] - py[j]); };
    const SpInstance s = gen_sp_budgeted(nodes, seed);
    double far = 0;
    for (int i = 0; i < nodes; ++i)
      for (int j = 0; j < nodes; ++j) far = std::max(far, dist(i, j));
    EXPECT_DOUBLE_EQ(dist(s.source, s.target), far);
    std::set<std::pair<int, int>> kept;
    double longest_kept = 0;
    for (std::size_t a = 0; a < s.num_arcs(); ++a) {
      EXPECT_DOUBLE_EQ(s.d_bar[a], dist(s.arcs[a].tail, s.arcs[a].head));
      kept.insert({s.arcs[a].tail, s.arcs[a].head});
      longest_kept = std::max(longest_kept, s.d_bar[a]);
    }
    EXPECT_EQ(kept.size(), s.num_arcs());
    for (int i = 0; i < nodes; ++i)
      for (int j = 0; j < nodes; ++j)
        if (i != j && !kept.count({i, j})) {
          EXPECT_GE(dist(i, j), longest_kept);
        }
  }
}

TEST(GenSp, DiscreteFieldsAndStatistics) {
  const int nodes = 100;
  const SpInstance s = gen_sp_discrete(nodes, 9);
  ASSERT_TRUE(s.discrete.has_value());
  EXPECT_TRUE(validate(s).empty());
  const auto& k = *s.discrete;
  EXPECT_DOUBLE_EQ(k.b, 0.1 * total(k.f));
  Moments f, w;
  for (std::size_t a = 0; a < s.num_arcs(); ++a) {
    f.add(k.f[a]);
    ASSERT_GE(k.w[a], 0.0);
    ASSERT_LT(k.w[a], k.b / nodes);
    w.add(k.w[a] / (k.b / nodes));
  }
  ASSERT_GE(f.n, 7000u);
  expect_mean(f, 50.5, uniform_int_sd(1, 100));
  expect_mean(w, 0.5, uniform_sd(0, 1));
}

TEST(GenSp, BudgetNonNegativeForAtMostNodesArcs) {
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    const int nodes = 6 + static_cast<int>(seed % 5);
    const SpInstance s = gen_sp_discrete(nodes, seed);
    const auto& k = *s.discrete;
    std::vector<double> w = k.w;
    std::sort(w.rbegin(), w.rend());
    const double heaviest = std::accumulate(w.begin(), w.begin() + nodes, 0.0);
    EXPECT_GE(k.b - heaviest, 0.0);
  }
}

TEST(GenKp, BudgetedFieldsAndStatistics) {
  const KpInstance k = gen_kp_budgeted(10000, 4);
  EXPECT_TRUE(validate(k).empty());
  ASSERT_TRUE(k.budgeted.has_value());
  EXPECT_EQ(k.budgeted->Gamma, 100);
  EXPECT_DOUBLE_EQ(k.d, 0.35 * total(k.a_bar));
  Moments a, h;
  for (std::size_t i = 0; i < k.size(); ++i) {
    EXPECT_EQ(k.c[i], k.a_bar[i] + 10);
    EXPECT_DOUBLE_EQ(k.a_hat[i], 0.1 * k.a_bar[i]);
    EXPECT_EQ(k.budgeted->gamma[i], 0.2);
    a.add(k.a_bar[i]);
    h.add(k.budgeted->h[i] / k.c[i]);
  }
  expect_mean(a, 50.5, uniform_int_sd(1, 100));
  expect_mean(h, 0.15, uniform_sd(0.1, 0.2));
}

TEST(GenKp, BudgetedGammaRounding) {
  EXPECT_EQ(gen_kp_budgeted(10, 1).budgeted->Gamma, 1);
  EXPECT_EQ(gen_kp_budgeted(149, 1).budgeted->Gamma, 1);
  EXPECT_EQ(gen_kp_budgeted(150, 1).budgeted->Gamma, 2);
  EXPECT_EQ(gen_kp_budgeted(1000, 1).budgeted->Gamma, 10);
}

TEST(GenKp, ContinuousKnapsackFields) {
  for (int kidx : {1, 5, 20}) {
    const KpInstance k = gen_kp_contknap(100, kidx, 8);
    EXPECT_TRUE(validate(k).empty());
    ASSERT_TRUE(k.knapsack.has_value());
    const double expected = std::max(total(k.a_bar) / kidx, *std::max_element(k.a_bar.begin(), k.a_bar.end()));
    EXPECT_DOUBLE_EQ(k.d, expected);
    EXPECT_EQ(k.knapsack->b, k.d);
    EXPECT_EQ(k.knapsack->f, k.a_bar);
    for (double w : k.knapsack->w) EXPECT_EQ(w, 0.0);
  }
  EXPECT_THROW(gen_kp_contknap(10, 0, 1), Error);
  EXPECT_THROW(gen_kp_contknap(10, 21, 1), Error);
}

TEST(GenKp, DiscreteFieldsAndStatistics) {
  const KpInstance k = gen_kp_discrete(10000, 5);
  EXPECT_TRUE(validate(k).empty());
  ASSERT_TRUE(k.knapsack.has_value());
  EXPECT_DOUBLE_EQ(k.d, 0.1 * total(k.a_bar));
  EXPECT_DOUBLE_EQ(k.knapsack->b, 0.1 * total(k.knapsack->f));
  Moments c, f;
  for (std::size_t i = 0; i < k.size(); ++i) {
    EXPECT_DOUBLE_EQ(k.a_hat[i], 0.1 * k.a_bar[i]);
    EXPECT_EQ(k.knapsack->w[i], 0.0);
    c.add(k.c[i]);
    f.add(k.knapsack->f[i]);
  }
  expect_mean(c, 50.5, uniform_int_sd(1, 100));
  expect_mean(f, 50.5, uniform_int_sd(1, 100));
}

TEST(GenPortfolio, FieldsAndStatistics) {
  Moments mu, hat, cost, v0, w;
  for (std::uint64_t seed = 1; seed <= 1000; ++seed) {
    const PortfolioInstance p = gen_portfolio(10, seed, true);
    ASSERT_TRUE(validate(p).empty());
    ASSERT_EQ(p.k, 10);
    ASSERT_EQ(p.Gamma, 20);
    ASSERT_TRUE(p.discrete.has_value());
    const double mean = total(p.Sigma) / 100.0;
    const double max = *std::max_element(p.Sigma.begin(), p.Sigma.end());
    ASSERT_GE(p.V0, mean);
    ASSERT_LT(p.V0, max);
    v0.add((p.V0 - mean) / (max - mean));
    for (int i = 0; i < p.N; ++i) {
      ASSERT_EQ(p.gamma[i], 0.2);
      mu.add(p.mu_bar[i]);
      hat.add(p.mu_hat[i] / p.mu_bar[i]);
      cost.add(p.c[i] / p.mu_bar[i]);
      w.add(p.discrete->w[i] / (p.discrete->b / p.N));
    }
  }
  expect_mean(mu, 1.0, uniform_sd(0.5, 1.5));
  expect_mean(hat, 0.75, uniform_sd(0.5, 1.0));
  expect_mean(cost, 0.15, uniform_sd(0.1, 0.2));
  expect_mean(v0, 0.5, uniform_sd(0, 1));
  expect_mean(w, 0.5, uniform_sd(0, 1));
}

TEST(GenPortfolio, CovarianceSymmetricPositiveDefinite) {
  for (int N : {10, 25, 60}) {
    const PortfolioInstance p = gen_portfolio(N, 17);
    EXPECT_FALSE(p.discrete.has_value());
    Eigen::MatrixXd S(N, N);
    for (int i = 0; i < N; ++i)
      for (int j = 0; j < N; ++j) {
        S(i, j) = p.sigma(i, j);
        EXPECT_EQ(p.sigma(i, j), p.sigma(j, i));
      }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(S);
    EXPECT_GE(es.eigenvalues().minCoeff(), 0.1 - 1e-9);
  }
  EXPECT_THROW(gen_portfolio(9, 1), Error);
}

TEST(Generate, DeterministicBytesAndRoundTrip) {
  const auto dir = std::filesystem::temp_directory_path() / "ddro_instgen_test";
  std::filesystem::create_directories(dir);
  for (const auto& family : generator_names()) {
    const int size = family.rfind("sp", 0) == 0 ? 8 : family == "portfolio" ? 12 : 30;
    const InstanceFile a = generate(family, size, 42, 3);
    const InstanceFile b = generate(family, size, 42, 3);
    EXPECT_EQ(dump_instance(a), dump_instance(b)) << family;
    EXPECT_NE(dump_instance(a), dump_instance(generate(family, size, 43, 3))) << family;
    EXPECT_EQ(instance_from_json(json::parse(dump_instance(a))), a) << family;
    const std::string path = (dir / (family + ".json")).string();
    write_instance(a, path);
    EXPECT_EQ(read_instance(path), a) << family;
    EXPECT_EQ(a.seed, 42u);
  }
  EXPECT_EQ(generate("sp-discrete", 8, 1).uncertainty, UncertaintyKind::discrete_knapsack);
  EXPECT_EQ(generate("kp-contknap", 8, 1, 4).params.at("k"), 4);
  EXPECT_THROW(generate("tsp", 8, 1), Error);
  std::filesystem::remove_all(dir);
}

TEST(Instances, RejectsMalformed) {
  json j = json::parse(dump_instance(generate("kp-budgeted", 10, 1)));
  j["data"]["c"].erase(0);
  EXPECT_THROW(instance_from_json(j), Error);
  EXPECT_THROW(read_instance("/nonexistent/instance.json"), Error);
  EXPECT_THROW(uncertainty_from_string("ellipsoidal"), Error);
  SpInstance s = gen_sp_budgeted(5, 1);
  s.source = 99;
  EXPECT_FALSE(validate(s).empty());
}

TEST(Nominal, ShortestPathMatchesDijkstra) {
  int solved = 0;
  for (std::uint64_t seed = 1; seed <= 15; ++seed) {
    const SpInstance s = seed % 2 ? gen_sp_budgeted(8 + static_cast<int>(seed), seed) : test::random_sp(12, 40, seed);
    const double expected = test::dijkstra(s);
    const SolveResult r = solve_milp(build_sp_nominal(s));
    if (expected == test::inf) {
      EXPECT_EQ(r.status, SolveStatus::infeasible);
      continue;
    }
    ASSERT_EQ(r.status, SolveStatus::optimal);
    EXPECT_NEAR(r.objective, expected, 1e-6);
    ++solved;
  }
  EXPECT_GE(solved, 8);
}

TEST(Nominal, KnapsackMatchesTableDp) {
  for (std::uint64_t seed = 1; seed <= 15; ++seed) {
    const KpInstance k = seed % 2 ? gen_kp_discrete(25, seed) : gen_kp_budgeted(25, seed);
    const SolveResult r = solve_milp(build_kp_nominal(k));
    ASSERT_EQ(r.status, SolveStatus::optimal);
    EXPECT_NEAR(r.objective, test::knapsack_dp(k.c, k.a_bar, k.d), 1e-6);
  }
}

TEST(Evaluate, KnapsackBudgetedByHand) {
  KpInstance k;
  k.c = {10, 8, 6};
  k.a_bar = {5, 4, 3};
  k.a_hat = {2, 1, 3};
  k.d = 10.5;
  k.variant = KpVariant::budgeted;
  k.budgeted = KpBudgeted{{1, 1, 1}, 1, {0.5, 0.5, 0.5}};
  // x = (1,0,1), item 3 hedged: half of item 3 (1.5) plus half of item 1 (1).
  const auto e = evaluate_robust_objective(k, Decisions{{1, 0, 1}, {0, 0, 1}, {}});
  EXPECT_DOUBLE_EQ(e.value, 8 + 2.5);
  EXPECT_DOUBLE_EQ(e.objective, 16 - 1);
  EXPECT_TRUE(e.feasible);
  const auto u = evaluate_robust_objective(k, Decisions{{1, 0, 1}, {0, 0, 0}, {}});
  EXPECT_DOUBLE_EQ(u.value, 11);
  EXPECT_FALSE(u.feasible);
}

TEST(Evaluate, ShortestPathRejectsBadPaths) {
  const SpInstance s = gen_sp_discrete(6, 2);
  const std::size_t m = s.num_arcs();
  try {
    evaluate_robust_objective(s, Decisions{std::vector<double>(m, 0), std::vector<double>(m, 0), {}});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::infeasible_decision);
  }
  EXPECT_THROW(evaluate_robust_objective(s, Decisions{std::vector<double>(m, 0.5), std::vector<double>(m, 0), {}}),
               Error);
  const auto paths = test::simple_paths(s);
  ASSERT_FALSE(paths.empty());
  std::vector<double> y(m, 0), x(m, 1);
  for (auto a : paths.front()) y[a] = 1;
  try {
    evaluate_robust_objective(s, Decisions{x, y, {}}, true);
    FAIL() << "hedging every arc should empty the discrete set";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::infeasible_decision);
  }
}

TEST(Evaluate, PortfolioChecks) {
  const PortfolioInstance p = gen_portfolio(12, 3, true);
  const auto n = static_cast<std::size_t>(p.N);
  std::vector<double> y(n, 0), x(n, 0);
  std::size_t best = 0;
  for (std::size_t i = 0; i < n; ++i)
    if (p.sigma(static_cast<int>(i), static_cast<int>(i)) < p.sigma(static_cast<int>(best), static_cast<int>(best)))
      best = i;
  y[best] = 1;
  if (p.sigma(static_cast<int>(best), static_cast<int>(best)) <= p.V0) {
    const auto e = evaluate_robust_objective(p, Decisions{x, y, {}});
    // Unhedged single asset with Gamma >= 1: full deviation.
    EXPECT_NEAR(e.value, p.mu_bar[best] - p.mu_hat[best], 1e-12);
  }
  std::vector<double> spread(n, 1.0 / static_cast<double>(n));
  try {
    evaluate_robust_objective(p, Decisions{x, spread, {}});
    FAIL() << "12 assets exceed the cardinality limit";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::infeasible_decision);
  }
  std::vector<double> half(n, 0);
  half[0] = 0.5;
  EXPECT_THROW(evaluate_robust_objective(p, Decisions{x, half, {}}), Error);
}
