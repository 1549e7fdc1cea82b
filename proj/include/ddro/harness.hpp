#pragma once

// Experiment sweeps: one record per (instance, approach), CSV in and out, and
// ECDF tables over the recorded runtimes and node counts.

#include <algorithm>
#include <atomic>
#include <charconv>
#include <chrono>
#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "ddro/bilevel.hpp"
#include "ddro/error.hpp"
#include "ddro/instgen.hpp"
#include "ddro/io.hpp"
#include "ddro/milp.hpp"
#include "ddro/reformulate.hpp"

namespace ddro {

enum class Approach { robust, bilevel_duality, bilevel_kkt, bilevel_discrete_enum, external };

inline std::string_view to_string(Approach a) {
  switch (a) {
    case Approach::robust: return "robust";
    case Approach::bilevel_duality: return "bilevel_duality";
    case Approach::bilevel_kkt: return "bilevel_kkt";
    case Approach::bilevel_discrete_enum: return "bilevel_discrete_enum";
    case Approach::external: return "external";
  }
  return "?";
}

inline std::optional<Approach> approach_from_string(std::string_view s) {
  for (auto a : {Approach::robust, Approach::bilevel_duality, Approach::bilevel_kkt, Approach::bilevel_discrete_enum,
                 Approach::external})
    if (to_string(a) == s) return a;
  return std::nullopt;
}

/// Solver statuses plus "error" for runs that threw.
inline const std::vector<std::string>& record_statuses() {
  static const std::vector<std::string> v{"optimal", "infeasible", "unbounded", "node_limit", "time_limit", "error"};
  return v;
}

struct ExperimentRecord {
  std::string instance_id;
  std::string problem;
  std::string uncertainty;
  std::string approach;
  int size = 0;
  std::uint64_t seed = 0;
  std::string status;
  std::optional<double> objective;  // empty when no solution is known
  std::optional<double> bound;
  long time_ms = 0;
  long nodes = 0;

  bool solved() const { return status == "optimal" || status == "infeasible"; }
  friend bool operator==(const ExperimentRecord&, const ExperimentRecord&) = default;
};

inline constexpr std::string_view kCsvHeader =
    "instance_id,problem,uncertainty,approach,size,seed,status,objective,bound,time_ms,nodes";

namespace detail {

inline bool csv_safe(const std::string& s) { return s.find_first_of(",\"\r\n") == std::string::npos; }

inline std::string opt_number(const std::optional<double>& v) { return v ? format_number(*v) : std::string(); }

inline std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : line) {
    if (ch == ',') {
      out.push_back(std::move(cur));
      cur.clear();
    } else {
      cur.push_back(ch);
    }
  }
  out.push_back(std::move(cur));
  return out;
}

template <class T>
T parse_integer(const std::string& s, const char* what) {
  T v{};
  const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size())
    throw Error(ErrorCode::parse_failure, std::string("csv: bad ") + what + " '" + s + "'");
  return v;
}

}  // namespace detail

inline std::string csv_string(const std::vector<ExperimentRecord>& records) {
  std::ostringstream out;
  out << kCsvHeader << '\n';
  for (const auto& r : records) {
    for (const std::string* s : {&r.instance_id, &r.problem, &r.uncertainty, &r.approach, &r.status})
      if (!detail::csv_safe(*s)) throw Error(ErrorCode::invalid_argument, "csv field needs quoting: '" + *s + "'");
    out << r.instance_id << ',' << r.problem << ',' << r.uncertainty << ',' << r.approach << ',' << r.size << ','
        << r.seed << ',' << r.status << ',' << detail::opt_number(r.objective) << ',' << detail::opt_number(r.bound)
        << ',' << r.time_ms << ',' << r.nodes << '\n';
  }
  return out.str();
}

inline std::vector<ExperimentRecord> parse_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line)) throw Error(ErrorCode::parse_failure, "csv: empty input");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != kCsvHeader) throw Error(ErrorCode::parse_failure, "csv: unexpected header '" + line + "'");
  std::vector<ExperimentRecord> out;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto f = detail::split_csv(line);
    if (f.size() != 11)
      throw Error(ErrorCode::parse_failure, "csv line " + std::to_string(lineno) + ": expected 11 fields");
    ExperimentRecord r;
    r.instance_id = f[0];
    r.problem = f[1];
    r.uncertainty = f[2];
    r.approach = f[3];
    r.size = detail::parse_integer<int>(f[4], "size");
    r.seed = detail::parse_integer<std::uint64_t>(f[5], "seed");
    r.status = f[6];
    const auto& st = record_statuses();
    if (std::find(st.begin(), st.end(), r.status) == st.end())
      throw Error(ErrorCode::parse_failure, "csv line " + std::to_string(lineno) + ": unknown status '" + r.status + "'");
    for (auto [field, target] : {std::pair{&f[7], &r.objective}, std::pair{&f[8], &r.bound}}) {
      if (field->empty()) continue;
      *target = parse_number(*field);
      if (!*target) throw Error(ErrorCode::parse_failure, "csv line " + std::to_string(lineno) + ": bad number");
    }
    r.time_ms = detail::parse_integer<long>(f[9], "time_ms");
    r.nodes = detail::parse_integer<long>(f[10], "nodes");
    out.push_back(std::move(r));
  }
  return out;
}

inline void write_csv(const std::vector<ExperimentRecord>& records, const std::filesystem::path& path) {
  write_file(path, csv_string(records));
}

inline std::vector<ExperimentRecord> read_csv(const std::filesystem::path& path) { return parse_csv(read_file(path)); }

// ---------------------------------------------------------------- configs

struct ExperimentConfig {
  std::string problem;  // sp, kp, portfolio
  UncertaintyKind uncertainty = UncertaintyKind::budgeted;
  std::vector<int> sizes;
  int seeds_per_size = 1;
  std::vector<Approach> approaches;
  double time_limit_s = 60.0;
  long node_limit = 1'000'000;
  std::optional<std::string> external_command;
  unsigned workers = 1;
};

/// Generator family for a problem / uncertainty pair.
inline std::string family_of(const std::string& problem, UncertaintyKind u) {
  if (problem == "sp") {
    if (u == UncertaintyKind::budgeted) return "sp-budgeted";
    if (u == UncertaintyKind::discrete_knapsack) return "sp-discrete";
  } else if (problem == "kp") {
    if (u == UncertaintyKind::budgeted) return "kp-budgeted";
    if (u == UncertaintyKind::continuous_knapsack) return "kp-contknap";
    if (u == UncertaintyKind::discrete_knapsack) return "kp-discrete";
  } else if (problem == "portfolio") {
    if (u == UncertaintyKind::budgeted || u == UncertaintyKind::discrete_knapsack) return "portfolio";
  }
  throw Error(ErrorCode::invalid_argument,
              "no generator for problem '" + problem + "' with " + std::string(to_string(u)) + " uncertainty");
}

inline ExperimentConfig config_from_json(const json& j) {
  try {
    ExperimentConfig c;
    c.problem = j.at("problem").get<std::string>();
    c.uncertainty = uncertainty_from_string(j.at("uncertainty").get<std::string>());
    c.sizes = j.at("sizes").get<std::vector<int>>();
    c.seeds_per_size = j.at("seeds_per_size").get<int>();
    for (const auto& a : j.at("approaches")) {
      const auto ap = approach_from_string(a.get<std::string>());
      if (!ap) throw Error(ErrorCode::config_parse, "unknown approach '" + a.get<std::string>() + "'");
      c.approaches.push_back(*ap);
    }
    c.time_limit_s = j.value("time_limit_s", c.time_limit_s);
    c.node_limit = j.value("node_limit", c.node_limit);
    if (j.contains("external_command") && !j.at("external_command").is_null())
      c.external_command = j.at("external_command").get<std::string>();
    c.workers = j.value("workers", c.workers);
    (void)family_of(c.problem, c.uncertainty);
    if (c.sizes.empty() || c.approaches.empty()) throw Error(ErrorCode::config_parse, "sizes and approaches must be non-empty");
    if (c.seeds_per_size < 1) throw Error(ErrorCode::config_parse, "seeds_per_size must be positive");
    if (c.time_limit_s <= 0 || c.node_limit <= 0) throw Error(ErrorCode::config_parse, "limits must be positive");
    if (std::count(c.approaches.begin(), c.approaches.end(), Approach::external) && !c.external_command)
      throw Error(ErrorCode::config_parse, "approach 'external' needs external_command");
    return c;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::config_parse, std::string("config: ") + e.what());
  } catch (const Error& e) {
    if (e.code() == ErrorCode::config_parse) throw;
    throw Error(ErrorCode::config_parse, e.what());
  }
}

inline ExperimentConfig read_config(const std::filesystem::path& path) {
  std::string text;
  try {
    text = read_file(path);
  } catch (const Error& e) {
    throw Error(ErrorCode::config_parse, e.what());
  }
  json j = json::parse(text, nullptr, false);
  if (j.is_discarded()) throw Error(ErrorCode::config_parse, "config: invalid JSON in " + path.string());
  return config_from_json(j);
}

/// Seed of the j-th instance of a size: 1000 * size + j.
inline std::uint64_t experiment_seed(int size, int j) { return 1000ULL * static_cast<std::uint64_t>(size) + static_cast<std::uint64_t>(j); }

struct PlannedInstance {
  std::string id;
  std::string family;
  int size = 0;
  std::uint64_t seed = 0;
  int k = 1;
};

inline std::vector<PlannedInstance> plan_instances(const ExperimentConfig& c) {
  const std::string family = family_of(c.problem, c.uncertainty);
  std::vector<PlannedInstance> out;
  for (int size : c.sizes)
    for (int j = 0; j < c.seeds_per_size; ++j) {
      PlannedInstance p{"", family, size, experiment_seed(size, j), j % 20 + 1};
      p.id = family + "-" + std::to_string(size) + "-" + std::to_string(p.seed);
      if (family == "kp-contknap") p.id += "-k" + std::to_string(p.k);
      out.push_back(std::move(p));
    }
  return out;
}

// ---------------------------------------------------------------- runs

struct RunLimits {
  double time_limit_s = 60.0;
  long node_limit = 1'000'000;
  std::optional<std::string> external_command;
};

/// Solves one instance with one approach. Time covers the solve call only.
inline SolveResult run_approach(const InstanceFile& f, Approach a, const RunLimits& lim) {
  MilpOptions opt;
  opt.time_limit_s = lim.time_limit_s;
  opt.node_limit = lim.node_limit;
  const bool discrete = f.uncertainty == UncertaintyKind::discrete_knapsack;
  switch (a) {
    case Approach::robust:
    case Approach::bilevel_duality:
    case Approach::bilevel_kkt: {
      const ReformKind kind = a == Approach::robust            ? ReformKind::robust_dual
                              : a == Approach::bilevel_duality ? ReformKind::bilevel_duality
                                                               : ReformKind::bilevel_kkt;
      const MilpModel m = build_reformulation(f, kind);
      return solve_milp(m, opt);
    }
    case Approach::bilevel_discrete_enum: {
      const auto lb = linearize_lower_products(build_bilevel_discrete(f), Placement::lower_only);
      return solve_bilevel_enumeration(lb);
    }
    case Approach::external: {
      if (!lim.external_command) throw Error(ErrorCode::invalid_argument, "no external command configured");
      if (discrete) {
        const auto lb = linearize_lower_products(build_bilevel_discrete(f), Placement::lower_only);
        return solve_mibs_external(lb, *lim.external_command, lim.time_limit_s);
      }
      ExternalSolver s;
      s.command = *lim.external_command;
      s.timeout_s = lim.time_limit_s;
      return external_solve(build_reformulation(f, ReformKind::robust_dual), s);
    }
  }
  throw Error(ErrorCode::invalid_argument, "unknown approach");
}

inline ExperimentRecord run_record(const PlannedInstance& p, const std::string& uncertainty, Approach a,
                                   const RunLimits& lim) {
  ExperimentRecord r;
  r.instance_id = p.id;
  r.approach = std::string(to_string(a));
  r.size = p.size;
  r.seed = p.seed;
  r.uncertainty = uncertainty;
  try {
    InstanceFile f = generate(p.family, p.size, p.seed, p.k);
    if (p.family == "portfolio") f.uncertainty = uncertainty_from_string(uncertainty);
    r.problem = f.problem();
    r.uncertainty = std::string(to_string(f.uncertainty));
    const SolveResult s = run_approach(f, a, lim);
    r.status = std::string(to_string(s.status));
    if (s.has_solution()) r.objective = s.objective;
    if (s.status == SolveStatus::optimal || s.status == SolveStatus::node_limit || s.status == SolveStatus::time_limit)
      r.bound = s.bound;
    r.time_ms = s.elapsed_ms;
    r.nodes = s.nodes;
  } catch (const std::exception&) {
    r.status = "error";
    r.objective.reset();
    r.bound.reset();
  }
  if (r.problem.empty()) r.problem = p.family.substr(0, p.family.find('-'));
  return r;
}

inline void sort_records(std::vector<ExperimentRecord>& records) {
  std::sort(records.begin(), records.end(), [](const auto& a, const auto& b) {
    return std::tie(a.instance_id, a.approach) < std::tie(b.instance_id, b.approach);
  });
}

/// Runs every (instance, approach) pair on up to `workers` threads. Failures
/// become "error" records; the sweep never aborts.
inline std::vector<ExperimentRecord> run_experiment(const ExperimentConfig& c) {
  const auto plan = plan_instances(c);
  const RunLimits lim{c.time_limit_s, c.node_limit, c.external_command};
  const std::string uncertainty(to_string(c.uncertainty));
  std::vector<std::pair<std::size_t, Approach>> jobs;
  for (std::size_t i = 0; i < plan.size(); ++i)
    for (Approach a : c.approaches) jobs.emplace_back(i, a);

  std::vector<ExperimentRecord> records;
  std::mutex mu;
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t j; (j = next++) < jobs.size();) {
      ExperimentRecord r = run_record(plan[jobs[j].first], uncertainty, jobs[j].second, lim);
      std::lock_guard lock(mu);
      records.push_back(std::move(r));
    }
  };
  const unsigned n = std::max(1u, std::min<unsigned>(c.workers, static_cast<unsigned>(jobs.size())));
  std::vector<std::thread> threads;
  for (unsigned t = 1; t < n; ++t) threads.emplace_back(worker);
  worker();
  for (auto& t : threads) t.join();
  sort_records(records);
  return records;
}

/// Solved runs per (approach, size).
inline std::map<std::pair<std::string, int>, int> solved_counts(const std::vector<ExperimentRecord>& records) {
  std::map<std::pair<std::string, int>, int> out;
  for (const auto& r : records) {
    auto& c = out[{r.approach, r.size}];
    if (r.solved()) ++c;
  }
  return out;
}

// ---------------------------------------------------------------- ECDF

enum class Metric { time_ms, nodes };

inline std::optional<Metric> metric_from_string(std::string_view s) {
  if (s == "time_ms") return Metric::time_ms;
  if (s == "nodes") return Metric::nodes;
  return std::nullopt;
}

struct EcdfPoint {
  double value = 0.0;
  double fraction = 0.0;
  friend bool operator==(const EcdfPoint&, const EcdfPoint&) = default;
};

/// Right-continuous step points: one per distinct value, fraction of samples <= value.
inline std::vector<EcdfPoint> ecdf_points(std::vector<double> values) {
  if (values.empty()) throw Error(ErrorCode::empty_selection, "no values to summarize");
  std::sort(values.begin(), values.end());
  std::vector<EcdfPoint> out;
  const double n = static_cast<double>(values.size());
  for (std::size_t i = 0; i < values.size(); ++i)
    if (i + 1 == values.size() || values[i + 1] != values[i])
      out.push_back({values[i], static_cast<double>(i + 1) / n});
  out.back().fraction = 1.0;
  return out;
}

struct EcdfFilter {
  std::vector<std::string> approaches;  // empty: every approach present
  bool solved_by_all = false;
};

/// ECDF per approach over solved runs. With `solved_by_all`, only instances
/// solved by every selected approach count.
inline std::map<std::string, std::vector<EcdfPoint>> ecdf(const std::vector<ExperimentRecord>& records, Metric metric,
                                                         const EcdfFilter& filter = {}) {
  std::set<std::string> approaches(filter.approaches.begin(), filter.approaches.end());
  if (approaches.empty())
    for (const auto& r : records) approaches.insert(r.approach);
  std::map<std::string, std::set<std::string>> solved_by;  // instance -> approaches
  for (const auto& r : records)
    if (approaches.count(r.approach) && r.solved()) solved_by[r.instance_id].insert(r.approach);
  std::map<std::string, std::vector<double>> values;
  for (const auto& r : records) {
    if (!approaches.count(r.approach) || !r.solved()) continue;
    if (filter.solved_by_all && solved_by[r.instance_id].size() != approaches.size()) continue;
    values[r.approach].push_back(metric == Metric::time_ms ? static_cast<double>(r.time_ms) : static_cast<double>(r.nodes));
  }
  if (values.empty()) throw Error(ErrorCode::empty_selection, "no solved runs match the selection");
  std::map<std::string, std::vector<EcdfPoint>> out;
  for (auto& [a, v] : values) out[a] = ecdf_points(std::move(v));
  return out;
}

inline std::string ecdf_csv(const std::map<std::string, std::vector<EcdfPoint>>& table) {
  std::ostringstream out;
  out << "approach,value,fraction\n";
  for (const auto& [a, pts] : table)
    for (const auto& p : pts) out << a << ',' << format_number(p.value) << ',' << format_number(p.fraction) << '\n';
  return out.str();
}

}  // namespace ddro
