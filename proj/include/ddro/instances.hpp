#pragma once

// Problem data for the three applications and the instance JSON schema:
//   {"problem": "...", "uncertainty": "...", "seed": u64, "params": {...}, "data": {...}}

#include <cmath>
#include <cstdint>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

#include "ddro/error.hpp"
#include "ddro/uncertainty.hpp"

namespace ddro {

using json = nlohmann::json;

struct Arc {
  int tail = 0;
  int head = 0;
  friend bool operator==(const Arc&, const Arc&) = default;
};

/// Discrete or continuous knapsack uncertainty payload: f'u <= b - w'x.
struct KnapsackData {
  std::vector<double> f;
  double b = 0.0;
  std::vector<double> w;
  friend bool operator==(const KnapsackData&, const KnapsackData&) = default;
};

struct SpInstance {
  int num_nodes = 0;
  std::vector<Arc> arcs;
  int source = 0;
  int target = 1;
  std::vector<double> d_bar;
  std::vector<double> d_hat;
  std::vector<double> c;
  std::vector<double> gamma;
  int Gamma = 0;
  std::optional<KnapsackData> discrete;

  std::size_t num_arcs() const { return arcs.size(); }
  BudgetedSet budgeted_set() const { return BudgetedSet{Gamma, gamma, {}}; }
  friend bool operator==(const SpInstance&, const SpInstance&) = default;
};

enum class KpVariant { nominal, budgeted, continuous_knapsack, discrete_knapsack };

struct KpBudgeted {
  std::vector<double> h;
  int Gamma = 0;
  std::vector<double> gamma;
  friend bool operator==(const KpBudgeted&, const KpBudgeted&) = default;
};

struct KpInstance {
  std::vector<double> c;
  std::vector<double> a_bar;
  std::vector<double> a_hat;
  double d = 0.0;
  KpVariant variant = KpVariant::nominal;
  std::optional<KpBudgeted> budgeted;
  std::optional<KnapsackData> knapsack;

  std::size_t size() const { return c.size(); }
  friend bool operator==(const KpInstance&, const KpInstance&) = default;
};

struct PortfolioInstance {
  int N = 0;
  std::vector<double> mu_bar;
  std::vector<double> mu_hat;
  std::vector<double> Sigma;  // row-major N x N
  double V0 = 0.0;
  int k = 1;
  std::vector<double> c;
  int Gamma = 0;
  std::vector<double> gamma;
  std::optional<KnapsackData> discrete;

  double sigma(int i, int j) const { return Sigma[static_cast<std::size_t>(i) * N + j]; }
  friend bool operator==(const PortfolioInstance&, const PortfolioInstance&) = default;
};

using ProblemData = std::variant<SpInstance, KpInstance, PortfolioInstance>;

/// Uncertainty family an instance file is meant to be solved under.
enum class UncertaintyKind { nominal, budgeted, continuous_knapsack, discrete_knapsack };

inline std::string_view to_string(UncertaintyKind u) {
  switch (u) {
    case UncertaintyKind::nominal: return "nominal";
    case UncertaintyKind::budgeted: return "budgeted";
    case UncertaintyKind::continuous_knapsack: return "continuous_knapsack";
    case UncertaintyKind::discrete_knapsack: return "discrete_knapsack";
  }
  return "?";
}

inline UncertaintyKind uncertainty_from_string(std::string_view s) {
  for (auto u : {UncertaintyKind::nominal, UncertaintyKind::budgeted, UncertaintyKind::continuous_knapsack,
                 UncertaintyKind::discrete_knapsack})
    if (to_string(u) == s) return u;
  throw Error(ErrorCode::parse_failure, "unknown uncertainty '" + std::string(s) + "'");
}

struct InstanceFile {
  UncertaintyKind uncertainty = UncertaintyKind::budgeted;
  std::uint64_t seed = 0;
  json params = json::object();
  ProblemData data;

  std::string problem() const {
    if (std::holds_alternative<SpInstance>(data)) return "sp";
    if (std::holds_alternative<KpInstance>(data)) return "kp";
    return "portfolio";
  }
  friend bool operator==(const InstanceFile& a, const InstanceFile& b) {
    return a.uncertainty == b.uncertainty && a.seed == b.seed && a.params == b.params && a.data == b.data;
  }
};

// ---------------------------------------------------------------- validation

inline std::vector<std::string> validate(const SpInstance& s) {
  std::vector<std::string> out;
  const std::size_t m = s.arcs.size();
  if (s.source == s.target) out.push_back("source equals target");
  if (s.source < 0 || s.source >= s.num_nodes || s.target < 0 || s.target >= s.num_nodes)
    out.push_back("source/target out of range");
  for (const Arc& a : s.arcs) {
    if (a.tail == a.head) out.push_back("self-loop at node " + std::to_string(a.tail));
    if (a.tail < 0 || a.tail >= s.num_nodes || a.head < 0 || a.head >= s.num_nodes) out.push_back("arc endpoint out of range");
  }
  for (const auto* v : {&s.d_bar, &s.d_hat, &s.c, &s.gamma})
    if (v->size() != m) out.push_back("arc data length mismatch");
  for (std::size_t a = 0; a < std::min(m, s.d_bar.size()); ++a)
    if (s.d_bar[a] < 0 || s.d_hat.at(a) < 0 || s.c.at(a) < 0) out.push_back("negative arc data");
  for (double g : s.gamma)
    if (g < 0 || g > 1) out.push_back("gamma outside [0,1]");
  if (s.Gamma < 0) out.push_back("negative Gamma");
  if (s.discrete && (s.discrete->f.size() != m || s.discrete->w.size() != m)) out.push_back("discrete data length mismatch");
  return out;
}

inline std::vector<std::string> validate(const KpInstance& k) {
  std::vector<std::string> out;
  const std::size_t n = k.c.size();
  if (k.a_bar.size() != n || k.a_hat.size() != n) out.push_back("item data length mismatch");
  for (std::size_t i = 0; i < std::min({n, k.a_bar.size(), k.a_hat.size()}); ++i)
    if (k.c[i] < 0 || k.a_bar[i] < 0 || k.a_hat[i] < 0) out.push_back("negative item data");
  if (k.d < 0) out.push_back("negative capacity");
  if (k.variant == KpVariant::budgeted && (!k.budgeted || k.budgeted->h.size() != n || k.budgeted->gamma.size() != n))
    out.push_back("budgeted payload missing or mis-sized");
  if ((k.variant == KpVariant::continuous_knapsack || k.variant == KpVariant::discrete_knapsack) &&
      (!k.knapsack || k.knapsack->f.size() != n || k.knapsack->w.size() != n))
    out.push_back("knapsack payload missing or mis-sized");
  return out;
}

inline std::vector<std::string> validate(const PortfolioInstance& p) {
  std::vector<std::string> out;
  const auto n = static_cast<std::size_t>(p.N);
  if (p.mu_bar.size() != n || p.mu_hat.size() != n || p.c.size() != n || p.gamma.size() != n)
    out.push_back("asset data length mismatch");
  if (p.Sigma.size() != n * n) {
    out.push_back("covariance size mismatch");
    return out;
  }
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < i; ++j)
      if (std::abs(p.Sigma[i * n + j] - p.Sigma[j * n + i]) > 1e-12) out.push_back("covariance not symmetric");
  if (p.k < 1 || p.k > p.N) out.push_back("cardinality outside [1,N]");
  if (!(p.V0 > 0)) out.push_back("V0 must be positive");
  return out;
}

// ---------------------------------------------------------------- JSON

inline json knapsack_to_json(const KnapsackData& k) { return json{{"f", k.f}, {"b", k.b}, {"w", k.w}}; }

inline KnapsackData knapsack_from_json(const json& j) {
  return KnapsackData{j.at("f").get<std::vector<double>>(), j.at("b").get<double>(), j.at("w").get<std::vector<double>>()};
}

inline json data_to_json(const SpInstance& s) {
  json arcs = json::array();
  for (const Arc& a : s.arcs) arcs.push_back({a.tail, a.head});
  json j{{"nodes", s.num_nodes}, {"arcs", arcs},      {"source", s.source}, {"target", s.target},
         {"d_bar", s.d_bar},     {"d_hat", s.d_hat},  {"c", s.c},           {"gamma", s.gamma},
         {"Gamma", s.Gamma}};
  if (s.discrete) j["discrete"] = knapsack_to_json(*s.discrete);
  return j;
}

inline std::string_view to_string(KpVariant v) {
  switch (v) {
    case KpVariant::nominal: return "nominal";
    case KpVariant::budgeted: return "budgeted";
    case KpVariant::continuous_knapsack: return "continuous_knapsack";
    case KpVariant::discrete_knapsack: return "discrete_knapsack";
  }
  return "?";
}

inline json data_to_json(const KpInstance& k) {
  json j{{"c", k.c}, {"a_bar", k.a_bar}, {"a_hat", k.a_hat}, {"d", k.d}, {"variant", to_string(k.variant)}};
  if (k.budgeted) j["budgeted"] = json{{"h", k.budgeted->h}, {"Gamma", k.budgeted->Gamma}, {"gamma", k.budgeted->gamma}};
  if (k.knapsack) j["knapsack"] = knapsack_to_json(*k.knapsack);
  return j;
}

inline json data_to_json(const PortfolioInstance& p) {
  json j{{"N", p.N}, {"mu_bar", p.mu_bar}, {"mu_hat", p.mu_hat}, {"Sigma", p.Sigma}, {"V0", p.V0},
         {"k", p.k}, {"c", p.c},           {"Gamma", p.Gamma},   {"gamma", p.gamma}};
  if (p.discrete) j["discrete"] = knapsack_to_json(*p.discrete);
  return j;
}

inline SpInstance sp_from_json(const json& j) {
  SpInstance s;
  s.num_nodes = j.at("nodes").get<int>();
  for (const json& a : j.at("arcs")) s.arcs.push_back(Arc{a.at(0).get<int>(), a.at(1).get<int>()});
  s.source = j.at("source").get<int>();
  s.target = j.at("target").get<int>();
  s.d_bar = j.at("d_bar").get<std::vector<double>>();
  s.d_hat = j.at("d_hat").get<std::vector<double>>();
  s.c = j.at("c").get<std::vector<double>>();
  s.gamma = j.at("gamma").get<std::vector<double>>();
  s.Gamma = j.at("Gamma").get<int>();
  if (j.contains("discrete")) s.discrete = knapsack_from_json(j.at("discrete"));
  return s;
}

inline KpInstance kp_from_json(const json& j) {
  KpInstance k;
  k.c = j.at("c").get<std::vector<double>>();
  k.a_bar = j.at("a_bar").get<std::vector<double>>();
  k.a_hat = j.at("a_hat").get<std::vector<double>>();
  k.d = j.at("d").get<double>();
  const std::string v = j.at("variant").get<std::string>();
  bool found = false;
  for (auto cand : {KpVariant::nominal, KpVariant::budgeted, KpVariant::continuous_knapsack, KpVariant::discrete_knapsack})
    if (to_string(cand) == v) {
      k.variant = cand;
      found = true;
    }
  if (!found) throw Error(ErrorCode::parse_failure, "unknown knapsack variant '" + v + "'");
  if (j.contains("budgeted")) {
    const json& b = j.at("budgeted");
    k.budgeted = KpBudgeted{b.at("h").get<std::vector<double>>(), b.at("Gamma").get<int>(),
                            b.at("gamma").get<std::vector<double>>()};
  }
  if (j.contains("knapsack")) k.knapsack = knapsack_from_json(j.at("knapsack"));
  return k;
}

inline PortfolioInstance portfolio_from_json(const json& j) {
  PortfolioInstance p;
  p.N = j.at("N").get<int>();
  p.mu_bar = j.at("mu_bar").get<std::vector<double>>();
  p.mu_hat = j.at("mu_hat").get<std::vector<double>>();
  p.Sigma = j.at("Sigma").get<std::vector<double>>();
  p.V0 = j.at("V0").get<double>();
  p.k = j.at("k").get<int>();
  p.c = j.at("c").get<std::vector<double>>();
  p.Gamma = j.at("Gamma").get<int>();
  p.gamma = j.at("gamma").get<std::vector<double>>();
  if (j.contains("discrete")) p.discrete = knapsack_from_json(j.at("discrete"));
  return p;
}

inline json to_json(const InstanceFile& f) {
  json j;
  j["problem"] = f.problem();
  j["uncertainty"] = to_string(f.uncertainty);
  j["seed"] = f.seed;
  j["params"] = f.params;
  j["data"] = std::visit([](const auto& d) { return data_to_json(d); }, f.data);
  return j;
}

inline InstanceFile instance_from_json(const json& j) {
  try {
    InstanceFile f;
    f.uncertainty = uncertainty_from_string(j.at("uncertainty").get<std::string>());
    f.seed = j.at("seed").get<std::uint64_t>();
    f.params = j.value("params", json::object());
    const std::string problem = j.at("problem").get<std::string>();
    const json& d = j.at("data");
    if (problem == "sp")
      f.data = sp_from_json(d);
    else if (problem == "kp")
      f.data = kp_from_json(d);
    else if (problem == "portfolio")
      f.data = portfolio_from_json(d);
    else
      throw Error(ErrorCode::parse_failure, "unknown problem '" + problem + "'");
    const auto problems = std::visit([](const auto& x) { return validate(x); }, f.data);
    if (!problems.empty()) throw Error(ErrorCode::parse_failure, "instance json: " + problems.front());
    return f;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::parse_failure, std::string("instance json: ") + e.what());
  }
}

inline std::string dump_instance(const InstanceFile& f) { return to_json(f).dump() + "\n"; }

inline void write_instance(const InstanceFile& f, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::io, "cannot open '" + path + "' for writing");
  out << dump_instance(f);
}

inline InstanceFile read_instance(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::io, "cannot open '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  json j;
  try {
    j = json::parse(ss.str());
  } catch (const json::exception& e) {
    throw Error(ErrorCode::parse_failure, "'" + path + "': " + e.what());
  }
  return instance_from_json(j);
}

}  // namespace ddro
