// ddro: generate instances, build and solve reformulations, run sweeps.

#include <CLI11.hpp>

#include <cstdlib>
#include <iostream>

#include "ddro/bilevel.hpp"
#include "ddro/harness.hpp"
#include "ddro/instgen.hpp"
#include "ddro/io.hpp"
#include "ddro/problems.hpp"
#include "ddro/reformulate.hpp"

using namespace ddro;
namespace fs = std::filesystem;

namespace {

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

void print_error(std::string_view code, std::string_view message) {
  std::cerr << json{{"error", code}, {"message", message}}.dump() << '\n';
}

void emit(const std::string& text, const std::string& out) {
  if (out.empty() || out == "-")
    std::cout << text;
  else
    write_file(out, text);
}

std::size_t dimension(const InstanceFile& f) {
  if (const auto* s = std::get_if<SpInstance>(&f.data)) return s->num_arcs();
  if (const auto* k = std::get_if<KpInstance>(&f.data)) return k->size();
  return static_cast<std::size_t>(std::get<PortfolioInstance>(f.data).N);
}

Approach parse_approach(const std::string& s) {
  const auto a = approach_from_string(s);
  if (!a) throw UsageError("unknown approach '" + s + "'");
  return *a;
}

ReformKind reform_kind(Approach a) {
  switch (a) {
    case Approach::robust: return ReformKind::robust_dual;
    case Approach::bilevel_duality: return ReformKind::bilevel_duality;
    case Approach::bilevel_kkt: return ReformKind::bilevel_kkt;
    default: throw UsageError("approach '" + std::string(to_string(a)) + "' has no single-level model");
  }
}

bool is_lp_path(const std::string& p) { return fs::path(p).extension() == ".lp"; }

MilpModel read_model(const std::string& path) { return is_lp_path(path) ? read_lp_format(path) : read_mps(path); }

json size_json(const SizeReport& r) {
  return json{{"continuous_vars", r.continuous_vars}, {"binary_vars", r.binary_vars},
              {"continuous_aux", r.continuous_aux},   {"binary_aux", r.binary_aux},
              {"constraints", r.constraints},         {"mccormick_constraints", r.mccormick_constraints},
              {"compl_constraints", r.compl_constraints}};
}

json result_json(const SolveResult& r) {
  json j{{"status", to_string(r.status)}, {"nodes", r.nodes}, {"time_ms", r.elapsed_ms}};
  j["objective"] = r.has_solution() ? json(r.objective) : json(nullptr);
  j["bound"] = json(r.bound);
  if (!std::isfinite(r.bound)) j["bound"] = format_number(r.bound);
  return j;
}

json decisions_json(const Decisions& d) {
  json j = json::object();
  if (!d.x.empty()) j["x"] = d.x;
  if (!d.y.empty()) j["y"] = d.y;
  if (!d.s.empty()) j["s"] = d.s;
  return j;
}

struct Solved {
  SolveResult result;
  json decisions = json::object();
};

Solved solve_instance(const InstanceFile& f, Approach a, const RunLimits& lim) {
  Solved out;
  const std::size_t n = dimension(f);
  if (a == Approach::bilevel_discrete_enum || (a == Approach::external && f.uncertainty == UncertaintyKind::discrete_knapsack)) {
    const auto lb = linearize_lower_products(build_bilevel_discrete(f), Placement::lower_only);
    out.result = run_approach(f, a, lim);
    if (out.result.has_solution()) out.decisions = decisions_json(extract_decisions(lb.model.base, out.result.values, n));
    return out;
  }
  out.result = run_approach(f, a, lim);
  if (out.result.has_solution()) {
    const MilpModel m = build_reformulation(f, a == Approach::external ? ReformKind::robust_dual : reform_kind(a));
    out.decisions = decisions_json(extract_decisions(m, out.result.values, n));
  }
  return out;
}

// ---------------------------------------------------------------- subcommands

struct Common {
  std::string instance;
  std::string out;
  double time_limit = 60.0;
  long node_limit = 1'000'000;
  std::string external;
};

void add_limits(CLI::App* sub, Common& c) {
  sub->add_option("--time-limit", c.time_limit, "Seconds per solve")->check(CLI::PositiveNumber);
  sub->add_option("--node-limit", c.node_limit, "Branch-and-bound node limit")->check(CLI::PositiveNumber);
  sub->add_option("--external", c.external, "External solver command with {input} and {output} placeholders");
}

RunLimits limits(const Common& c) {
  RunLimits l{c.time_limit, c.node_limit, std::nullopt};
  if (!c.external.empty()) l.external_command = c.external;
  return l;
}

int cmd_generate(const std::string& family, int size, std::uint64_t seed, int k, const std::string& out) {
  if (size <= 0) throw UsageError("give the instance size with --nodes, --items, --assets or --size");
  emit(dump_instance(generate(family, size, seed, k)), out);
  return 0;
}

int cmd_build(const Common& c, const std::string& approach, bool report) {
  const InstanceFile f = read_instance(c.instance);
  const MilpModel m = build_reformulation(f, reform_kind(parse_approach(approach)));
  if (!c.out.empty()) {
    if (is_lp_path(c.out))
      write_lp_format(m, c.out);
    else
      write_mps(m, c.out);
  }
  if (report || c.out.empty()) std::cout << json{{"model", m.name()}, {"size", size_json(size_report(m))}}.dump() << '\n';
  return 0;
}

int cmd_solve(const Common& c, const std::string& approach, const std::string& model_path, const std::string& sol) {
  if (c.instance.empty() == model_path.empty()) throw UsageError("give exactly one of --instance and --model");
  json j;
  if (!model_path.empty()) {
    const MilpModel m = read_model(model_path);
    MilpOptions opt;
    opt.time_limit_s = c.time_limit;
    opt.node_limit = c.node_limit;
    SolveResult r;
    if (c.external.empty()) {
      r = solve_milp(m, opt);
    } else {
      ExternalSolver s;
      s.command = c.external;
      s.timeout_s = c.time_limit;
      r = external_solve(m, s);
    }
    j = result_json(r);
    if (r.has_solution()) {
      json vals = json::object();
      for (std::size_t i = 0; i < m.variables().size(); ++i) vals[m.variables()[i].name] = r.values[i];
      j["values"] = vals;
    }
    if (!sol.empty()) write_file(sol, sol_string(m, r));
  } else {
    const InstanceFile f = read_instance(c.instance);
    const Solved s = solve_instance(f, parse_approach(approach), limits(c));
    j = result_json(s.result);
    j["approach"] = approach;
    j["decisions"] = s.decisions;
  }
  emit(j.dump(2) + "\n", c.out);
  return 0;
}

std::vector<double> doubles(const json& j, const char* key) {
  return j.contains(key) ? j.at(key).get<std::vector<double>>() : std::vector<double>{};
}

int cmd_worst_case(const Common& c, const std::string& decisions_path, bool discrete) {
  const InstanceFile f = read_instance(c.instance);
  json dj = json::parse(read_file(decisions_path), nullptr, false);
  if (dj.is_discarded()) throw Error(ErrorCode::parse_failure, "decisions file is not valid JSON");
  if (dj.contains("decisions")) dj = dj.at("decisions");
  Decisions d;
  try {
    d = Decisions{doubles(dj, "x"), doubles(dj, "y"), doubles(dj, "s")};
  } catch (const json::exception& e) {
    throw Error(ErrorCode::parse_failure, std::string("decisions: ") + e.what());
  }
  discrete = discrete || f.uncertainty == UncertaintyKind::discrete_knapsack;
  RobustEvaluation e;
  if (const auto* s = std::get_if<SpInstance>(&f.data))
    e = evaluate_robust_objective(*s, d, discrete);
  else if (const auto* k = std::get_if<KpInstance>(&f.data))
    e = evaluate_robust_objective(*k, d);
  else
    e = evaluate_robust_objective(std::get<PortfolioInstance>(f.data), d, discrete);
  emit(json{{"value", e.value}, {"objective", e.objective}, {"feasible", e.feasible}}.dump(2) + "\n", c.out);
  return 0;
}

int cmd_verify(const Common& c, const std::vector<std::string>& approaches, double tol) {
  const InstanceFile f = read_instance(c.instance);
  std::vector<std::pair<std::string, SolveResult>> results;
  for (const auto& a : approaches) results.emplace_back(a, run_approach(f, parse_approach(a), limits(c)));
  if (const char* mibs = std::getenv("DDRO_MIBS_CMD"); mibs && *mibs && f.uncertainty == UncertaintyKind::discrete_knapsack) {
    RunLimits l = limits(c);
    l.external_command = mibs;
    results.emplace_back("mibs", run_approach(f, Approach::external, l));
  }
  if (results.empty()) throw UsageError("no approaches given");
  json rows = json::array();
  for (const auto& [a, r] : results) {
    json row = result_json(r);
    row["approach"] = a;
    rows.push_back(row);
  }
  const SolveResult& ref = results.front().second;
  bool agree = true;
  for (const auto& [a, r] : results) {
    if (r.status != ref.status || (r.status != SolveStatus::optimal && r.status != SolveStatus::infeasible)) agree = false;
    if (agree && r.status == SolveStatus::optimal && std::abs(r.objective - ref.objective) > tol) agree = false;
  }
  std::cout << rows.dump(2) << '\n';
  if (!agree) {
    print_error("disagreement", "values differ or a run did not finish; tolerance " + format_number(tol));
    return 1;
  }
  std::cout << "values agree within " << format_number(tol) << '\n';
  return 0;
}

int cmd_experiment(const std::string& config, const std::string& out, unsigned jobs) {
  ExperimentConfig c = read_config(config);
  if (jobs > 0) c.workers = jobs;
  const auto records = run_experiment(c);
  if (out.empty()) {
    std::cout << csv_string(records);
    return 0;
  }
  write_csv(records, out);
  std::map<std::pair<std::string, int>, int> total;
  for (const auto& r : records) ++total[{r.approach, r.size}];
  std::cout << "approach,size,solved,runs\n";
  for (const auto& [key, n] : solved_counts(records))
    std::cout << key.first << ',' << key.second << ',' << n << ',' << total[key] << '\n';
  return 0;
}

int cmd_ecdf(const std::string& csv, const std::string& metric, const std::vector<std::string>& approaches,
             bool solved_by_all, const std::string& out) {
  const auto m = metric_from_string(metric);
  if (!m) throw UsageError("metric must be time_ms or nodes");
  emit(ecdf_csv(ecdf(read_csv(csv), *m, EcdfFilter{approaches, solved_by_all})), out);
  return 0;
}

int cmd_export_mibs(const Common& c, const std::string& placement, bool min_form) {
  if (c.out.empty()) throw UsageError("export-mibs needs an output stem (-o)");
  if (placement != "lower_only" && placement != "both_levels") throw UsageError("placement must be lower_only or both_levels");
  const InstanceFile f = read_instance(c.instance);
  const auto lb = linearize_lower_products(build_bilevel_discrete(f),
                                           placement == "lower_only" ? Placement::lower_only : Placement::both_levels);
  const MibsFiles files = export_mibs(lb, c.out, AuxOptions{min_form});
  std::cout << json{{"mps", files.mps.string()}, {"aux", files.aux.string()}}.dump() << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Decision-dependent robust optimization: instances, reformulations, experiments"};
  app.require_subcommand(1);

  Common common;
  std::string approach = "robust";

  auto* gen = app.add_subcommand("generate", "Write a random instance as JSON");
  std::string family;
  int size = 0, k = 1;
  std::uint64_t seed = 1;
  gen->add_option("family", family, "Generator family")->required()->check(CLI::IsMember(generator_names()));
  auto* size_opt = gen->add_option("--size", size, "Instance size");
  gen->add_option("--nodes", size, "Graph nodes (sp)")->excludes(size_opt);
  gen->add_option("--items", size, "Items (kp)")->excludes(size_opt);
  gen->add_option("--assets", size, "Assets (portfolio)")->excludes(size_opt);
  gen->add_option("--seed", seed, "Random seed");
  gen->add_option("--k", k, "Capacity divisor for kp-contknap")->check(CLI::Range(1, 20));
  gen->add_option("-o,--output", common.out, "Output file (default stdout)");

  auto* build = app.add_subcommand("build", "Write a reformulated model as MPS or LP");
  bool report = false;
  build->add_option("--instance", common.instance, "Instance JSON")->required();
  build->add_option("--approach", approach, "robust, bilevel_duality or bilevel_kkt");
  build->add_option("-o,--output", common.out, "Model file; .lp selects LP format");
  build->add_flag("--size-report", report, "Print variable and constraint counts");

  auto* solve = app.add_subcommand("solve", "Solve an instance or a model file");
  std::string model_path, sol_path;
  solve->add_option("--instance", common.instance, "Instance JSON");
  solve->add_option("--model", model_path, "MPS or LP model file");
  solve->add_option("--approach", approach, "Approach for --instance");
  solve->add_option("--sol", sol_path, "Write a solution file (with --model)");
  solve->add_option("-o,--output", common.out, "Result JSON (default stdout)");
  add_limits(solve, common);

  auto* worst = app.add_subcommand("worst-case", "Evaluate fixed decisions against the uncertainty set");
  std::string decisions;
  bool discrete = false;
  worst->add_option("--instance", common.instance, "Instance JSON")->required();
  worst->add_option("--decisions", decisions, "JSON with x, y, s arrays (or a solve result)")->required();
  worst->add_flag("--discrete", discrete, "Use the instance's discrete knapsack set");
  worst->add_option("-o,--output", common.out, "Result JSON (default stdout)");

  auto* verify = app.add_subcommand("verify", "Cross-solve an instance and compare optimal values");
  std::vector<std::string> approaches;
  double tol = 1e-5;
  verify->add_option("--instance", common.instance, "Instance JSON")->required();
  verify->add_option("--approaches", approaches, "Comma-separated approaches")->delimiter(',')->required();
  verify->add_option("--tol", tol, "Absolute tolerance");
  add_limits(verify, common);

  auto* exp = app.add_subcommand("experiment", "Run a sweep from a JSON config");
  std::string config;
  unsigned jobs = 0;
  exp->add_option("--config", config, "Experiment config JSON")->required();
  exp->add_option("-o,--output", common.out, "CSV output (default stdout)");
  exp->add_option("-j,--jobs", jobs, "Worker threads (overrides config)");

  auto* ec = app.add_subcommand("ecdf", "ECDF table from an experiment CSV");
  std::string csv, metric = "time_ms";
  std::vector<std::string> ecdf_approaches;
  bool solved_by_all = false;
  ec->add_option("--csv", csv, "Experiment CSV")->required();
  ec->add_option("--metric", metric, "time_ms or nodes");
  ec->add_option("--approaches", ecdf_approaches, "Restrict to these approaches")->delimiter(',');
  ec->add_flag("--solved-by-all", solved_by_all, "Only instances solved by every selected approach");
  ec->add_option("-o,--output", common.out, "Output CSV (default stdout)");

  auto* mibs = app.add_subcommand("export-mibs", "Write MPS and AUX files of a discrete bilevel instance");
  std::string placement = "lower_only";
  bool min_form = false;
  mibs->add_option("--instance", common.instance, "Instance JSON")->required();
  mibs->add_option("-o,--output", common.out, "Output stem")->required();
  mibs->add_option("--placement", placement, "lower_only or both_levels");
  mibs->add_flag("--follower-min-form", min_form, "Write the follower objective in minimization form");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    print_error("usage", e.what());
    return e.get_exit_code() != 0 ? e.get_exit_code() : 2;
  }

  try {
    if (*gen) return cmd_generate(family, size, seed, k, common.out);
    if (*build) return cmd_build(common, approach, report);
    if (*solve) return cmd_solve(common, approach, model_path, sol_path);
    if (*worst) return cmd_worst_case(common, decisions, discrete);
    if (*verify) return cmd_verify(common, approaches, tol);
    if (*exp) return cmd_experiment(config, common.out, jobs);
    if (*ec) return cmd_ecdf(csv, metric, ecdf_approaches, solved_by_all, common.out);
    if (*mibs) return cmd_export_mibs(common, placement, min_form);
  } catch (const Error& e) {
    print_error(to_string(e.code()), e.what());
    return 2;
  } catch (const UsageError& e) {
    print_error("usage", e.what());
    return 2;
  } catch (const std::exception& e) {
    print_error("internal", e.what());
    return 3;
  }
  return 2;
}
