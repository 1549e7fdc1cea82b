#pragma once

// Seeded instance generators for the three applications.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <string>
#include <tuple>
#include <vector>

#include "ddro/error.hpp"
#include "ddro/instances.hpp"
#include "ddro/rng.hpp"

namespace ddro {

namespace detail {

/// round-half-up(n (n - 1) * permille / 1000), in exact integer arithmetic.
inline std::size_t kept_arc_count(std::size_t n, std::size_t permille) {
  return (n * (n - 1) * permille + 500) / 1000;
}

struct Geometry {
  std::vector<double> px, py;
  int s = 0, t = 1;
  std::vector<Arc> arcs;
  std::vector<double> length;
};

// Random points in [0,100)^2, s/t = farthest pair, keep the shortest arcs of the
// complete digraph (ties by tail, then head), emitted in (tail, head) order.
inline Geometry random_geometric_digraph(int nodes, std::size_t keep_permille, Rng& rng) {
  if (nodes < 2) throw Error(ErrorCode::invalid_argument, "graph needs at least 2 nodes");
  Geometry g;
  for (int v = 0; v < nodes; ++v) {
    g.px.push_back(rng.uniform_real(0.0, 100.0));
    g.py.push_back(rng.uniform_real(0.0, 100.0));
  }
  auto dist = [&](int i, int j) { return std::hypot(g.px[i] - g.px[j], g.py[i] - g.py[j]); };
  double far = -1.0;
  for (int i = 0; i < nodes; ++i)
    for (int j = i + 1; j < nodes; ++j)
      if (dist(i, j) > far) {
        far = dist(i, j);
        g.s = i;
        g.t = j;
      }
  std::vector<std::tuple<double, int, int>> all;
  for (int i = 0; i < nodes; ++i)
    for (int j = 0; j < nodes; ++j)
      if (i != j) all.emplace_back(dist(i, j), i, j);
  std::sort(all.begin(), all.end());
  all.resize(kept_arc_count(static_cast<std::size_t>(nodes), keep_permille));
  std::sort(all.begin(), all.end(),
            [](const auto& a, const auto& b) { return std::tie(std::get<1>(a), std::get<2>(a)) < std::tie(std::get<1>(b), std::get<2>(b)); });
  for (const auto& [len, i, j] : all) {
    g.arcs.push_back(Arc{i, j});
    g.length.push_back(len);
  }
  return g;
}

inline double sum(const std::vector<double>& v) { return std::accumulate(v.begin(), v.end(), 0.0); }

}  // namespace detail

/// Budgeted shortest path: 40 % of the complete digraph's arcs survive,
/// c = 1, d_hat = d_bar, Gamma = 2, gamma = 0.2.
inline SpInstance gen_sp_budgeted(int nodes, std::uint64_t seed) {
  Rng rng(seed);
  detail::Geometry g = detail::random_geometric_digraph(nodes, 400, rng);
  SpInstance s;
  s.num_nodes = nodes;
  s.arcs = std::move(g.arcs);
  s.source = g.s;
  s.target = g.t;
  s.d_bar = g.length;
  s.d_hat = g.length;
  s.c.assign(s.arcs.size(), 1.0);
  s.gamma.assign(s.arcs.size(), 0.2);
  s.Gamma = 2;
  return s;
}

/// Discrete-knapsack shortest path: 80 % of arcs survive, f uniform integer in
/// [1,100], b = 0.1 sum f, w_a uniform in [0, b/|V|).
inline SpInstance gen_sp_discrete(int nodes, std::uint64_t seed) {
  Rng rng(seed);
  detail::Geometry g = detail::random_geometric_digraph(nodes, 800, rng);
  SpInstance s;
  s.num_nodes = nodes;
  s.arcs = std::move(g.arcs);
  s.source = g.s;
  s.target = g.t;
  s.d_bar = g.length;
  s.d_hat = g.length;
  s.c.assign(s.arcs.size(), 1.0);
  s.gamma.assign(s.arcs.size(), 0.2);
  s.Gamma = 2;
  KnapsackData k;
  for (std::size_t a = 0; a < s.arcs.size(); ++a) k.f.push_back(static_cast<double>(rng.uniform_int(1, 100)));
  k.b = 0.1 * detail::sum(k.f);
  for (std::size_t a = 0; a < s.arcs.size(); ++a) k.w.push_back(rng.uniform_real(0.0, k.b / nodes));
  s.discrete = std::move(k);
  return s;
}

namespace detail {

// Strongly correlated items: weight uniform in [1,100], value = weight + 10.
inline void strongly_correlated(std::size_t n, Rng& rng, std::vector<double>& value, std::vector<double>& weight) {
  for (std::size_t i = 0; i < n; ++i) {
    const auto w = static_cast<double>(rng.uniform_int(1, 100));
    weight.push_back(w);
    value.push_back(w + 10.0);
  }
}

inline std::vector<double> tenth(const std::vector<double>& v) {
  std::vector<double> out;
  for (double x : v) out.push_back(0.1 * x);
  return out;
}

}  // namespace detail

/// Budgeted knapsack: strongly correlated items, d = 0.35 sum a_bar,
/// h_i uniform in [c_i/10, c_i/5), Gamma = max(1, round(n/100)), gamma = 0.2, a_hat = 0.1 a_bar.
inline KpInstance gen_kp_budgeted(int n, std::uint64_t seed) {
  if (n < 1) throw Error(ErrorCode::invalid_argument, "need at least one item");
  Rng rng(seed);
  KpInstance k;
  detail::strongly_correlated(static_cast<std::size_t>(n), rng, k.c, k.a_bar);
  k.a_hat = detail::tenth(k.a_bar);
  k.d = 0.35 * detail::sum(k.a_bar);
  k.variant = KpVariant::budgeted;
  KpBudgeted b;
  for (int i = 0; i < n; ++i) b.h.push_back(rng.uniform_real(k.c[i] / 10.0, k.c[i] / 5.0));
  b.Gamma = std::max(1, (n + 50) / 100);
  b.gamma.assign(static_cast<std::size_t>(n), 0.2);
  k.budgeted = std::move(b);
  return k;
}

/// Continuous knapsack set: strongly correlated items, d = b = max(sum a_bar / k, max a_bar),
/// f = a_bar, w = 0, a_hat = 0.1 a_bar.
inline KpInstance gen_kp_contknap(int n, int kidx, std::uint64_t seed) {
  if (n < 1) throw Error(ErrorCode::invalid_argument, "need at least one item");
  if (kidx < 1 || kidx > 20) throw Error(ErrorCode::invalid_argument, "k must lie in [1,20]");
  Rng rng(seed);
  KpInstance k;
  detail::strongly_correlated(static_cast<std::size_t>(n), rng, k.c, k.a_bar);
  k.a_hat = detail::tenth(k.a_bar);
  k.d = std::max(detail::sum(k.a_bar) / kidx, *std::max_element(k.a_bar.begin(), k.a_bar.end()));
  k.variant = KpVariant::continuous_knapsack;
  k.knapsack = KnapsackData{k.a_bar, k.d, std::vector<double>(static_cast<std::size_t>(n), 0.0)};
  return k;
}

/// Discrete knapsack set: two uncorrelated draws (values and weights uniform in
/// [1,100]); the second supplies f. d = 0.1 sum a_bar, b = 0.1 sum f, w = 0, a_hat = 0.1 a_bar.
inline KpInstance gen_kp_discrete(int n, std::uint64_t seed) {
  if (n < 1) throw Error(ErrorCode::invalid_argument, "need at least one item");
  Rng rng(seed);
  KpInstance k;
  for (int i = 0; i < n; ++i) {
    k.a_bar.push_back(static_cast<double>(rng.uniform_int(1, 100)));
    k.c.push_back(static_cast<double>(rng.uniform_int(1, 100)));
  }
  KnapsackData kd;
  for (int i = 0; i < n; ++i) kd.f.push_back(static_cast<double>(rng.uniform_int(1, 100)));
  kd.b = 0.1 * detail::sum(kd.f);
  kd.w.assign(static_cast<std::size_t>(n), 0.0);
  k.a_hat = detail::tenth(k.a_bar);
  k.d = 0.1 * detail::sum(k.a_bar);
  k.variant = KpVariant::discrete_knapsack;
  k.knapsack = std::move(kd);
  return k;
}

/// Portfolio: Sigma = F'F + D (F 5xN uniform in [-1,1), D diagonal uniform in
/// [0.1,1)), mu_bar uniform in [0.5,1.5), V0 uniform in [mean Sigma, max Sigma),
/// mu_hat_i in [mu_bar_i/2, mu_bar_i), c_i in [mu_bar_i/10, mu_bar_i/5), k = 10,
/// Gamma = 20, gamma = 0.2. With `discrete`, also f in [1,100], b = 0.1 sum f,
/// w_i in [0, b/N).
inline PortfolioInstance gen_portfolio(int N, std::uint64_t seed, bool discrete = false) {
  if (N < 10) throw Error(ErrorCode::invalid_argument, "portfolio generator needs N >= 10");
  Rng rng(seed);
  PortfolioInstance p;
  p.N = N;
  const auto n = static_cast<std::size_t>(N);
  constexpr std::size_t factors = 5;
  std::vector<double> F(factors * n);
  for (double& v : F) v = rng.uniform_real(-1.0, 1.0);
  std::vector<double> D(n);
  for (double& v : D) v = rng.uniform_real(0.1, 1.0);
  p.Sigma.assign(n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j <= i; ++j) {
      double s = 0.0;
      for (std::size_t f = 0; f < factors; ++f) s += F[f * n + i] * F[f * n + j];
      if (i == j) s += D[i];
      p.Sigma[i * n + j] = s;
      p.Sigma[j * n + i] = s;
    }
  for (std::size_t i = 0; i < n; ++i) p.mu_bar.push_back(rng.uniform_real(0.5, 1.5));
  const double mean = detail::sum(p.Sigma) / static_cast<double>(n * n);
  const double max = *std::max_element(p.Sigma.begin(), p.Sigma.end());
  p.V0 = rng.uniform_real(mean, max);
  for (std::size_t i = 0; i < n; ++i) p.mu_hat.push_back(rng.uniform_real(p.mu_bar[i] / 2.0, p.mu_bar[i]));
  for (std::size_t i = 0; i < n; ++i) p.c.push_back(rng.uniform_real(p.mu_bar[i] / 10.0, p.mu_bar[i] / 5.0));
  p.k = 10;
  p.Gamma = 20;
  p.gamma.assign(n, 0.2);
  if (discrete) {
    KnapsackData kd;
    for (std::size_t i = 0; i < n; ++i) kd.f.push_back(static_cast<double>(rng.uniform_int(1, 100)));
    kd.b = 0.1 * detail::sum(kd.f);
    for (std::size_t i = 0; i < n; ++i) kd.w.push_back(rng.uniform_real(0.0, kd.b / N));
    p.discrete = std::move(kd);
  }
  return p;
}

/// Generator families addressable by name (CLI and experiment configs).
inline const std::vector<std::string>& generator_names() {
  static const std::vector<std::string> names{"sp-budgeted", "sp-discrete", "kp-budgeted",
                                              "kp-contknap", "kp-discrete", "portfolio"};
  return names;
}

/// Builds a complete instance file. `size` is |V|, n or N; `k` only matters
/// for kp-contknap.
inline InstanceFile generate(const std::string& family, int size, std::uint64_t seed, int k = 1) {
  InstanceFile f;
  f.seed = seed;
  if (family == "sp-budgeted") {
    f.uncertainty = UncertaintyKind::budgeted;
    f.params = json{{"nodes", size}};
    f.data = gen_sp_budgeted(size, seed);
  } else if (family == "sp-discrete") {
    f.uncertainty = UncertaintyKind::discrete_knapsack;
    f.params = json{{"nodes", size}};
    f.data = gen_sp_discrete(size, seed);
  } else if (family == "kp-budgeted") {
    f.uncertainty = UncertaintyKind::budgeted;
    f.params = json{{"items", size}};
    f.data = gen_kp_budgeted(size, seed);
  } else if (family == "kp-contknap") {
    f.uncertainty = UncertaintyKind::continuous_knapsack;
    f.params = json{{"items", size}, {"k", k}};
    f.data = gen_kp_contknap(size, k, seed);
  } else if (family == "kp-discrete") {
    f.uncertainty = UncertaintyKind::discrete_knapsack;
    f.params = json{{"items", size}};
    f.data = gen_kp_discrete(size, seed);
  } else if (family == "portfolio") {
    f.uncertainty = UncertaintyKind::budgeted;
    f.params = json{{"assets", size}};
    f.data = gen_portfolio(size, seed, true);
  } else {
    throw Error(ErrorCode::invalid_argument, "unknown generator '" + family + "'");
  }
  return f;
}

}  // namespace ddro
