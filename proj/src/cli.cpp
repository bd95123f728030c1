// SPDX-License-Identifier: Apache-2.0
#include "flowtree/cli.hpp"

#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "flowtree/clients.hpp"
#include "flowtree/errors.hpp"
#include "flowtree/orchestrator.hpp"
#include "flowtree/scenario.hpp"
#include "flowtree/telemetry.hpp"

namespace flowtree {

namespace {

std::string env_or(const char* name, const std::string& fallback) {
  const char* v = std::getenv(name);
  return v ? std::string(v) : fallback;
}

void write_file(const std::filesystem::path& path, const std::string& content) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  out << content;
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw NotFoundError("cannot open " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

int exit_code_for(const std::exception& e) {
  if (dynamic_cast<const ConfigError*>(&e)) return kExitConfig;
  if (dynamic_cast<const NotFoundError*>(&e)) return kExitNotFound;
  return kExitIntegrity;
}

}  // namespace

void RunManifest::validate() const {
  config.validate();
  if (mode == "sim") {
    if (!scenario_path) throw ConfigError("sim mode requires --scenario");
  } else if (mode == "live") {
    if (llm_base_url.empty()) throw ConfigError("live mode requires FT_LLM_BASE_URL");
    if (llm_api_key.empty()) throw ConfigError("live mode requires FT_LLM_API_KEY");
    if (llm_model.empty()) throw ConfigError("live mode requires FT_LLM_MODEL");
    if (search_base_url.empty()) throw ConfigError("live mode requires FT_SEARCH_BASE_URL");
  } else {
    throw ConfigError("mode must be sim or live");
  }
}

std::string derive_run_id(const std::string& query, std::uint64_t seed) {
  Fnv1a h;
  h.add(query).add(seed);
  return "run-" + to_hex(ContentHash{h.value()}).substr(0, 8);
}

TransportFactory& live_transport_factory() {
  static TransportFactory factory = [](const std::string& base, const std::string& bearer) {
    return make_live_transport(base, bearer);
  };
  return factory;
}

// ---------------------------------------------------------------------------
// run

int cmd_run(const std::string& query, const RunManifest& manifest) {
  try {
    manifest.validate();
    if (query.empty()) throw ConfigError("query must be nonempty");
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitConfig;
  }

  try {
    std::string run_id =
        manifest.run_id.empty() ? derive_run_id(query, manifest.seed) : manifest.run_id;
    std::filesystem::create_directories(manifest.output_dir);
    auto artifact = [&](const std::string& suffix) {
      return manifest.output_dir / (run_id + suffix);
    };

    ResearchRunResult result = [&] {
      if (manifest.mode == "sim") {
        Runtime rt(Runtime::Mode::Virtual);
        Scenario scenario = Scenario::from_file(*manifest.scenario_path);
        ScriptedPolicy policy(scenario);
        SimExecutor executor(rt, scenario, manifest.seed);
        EventSink sink(artifact(".events.jsonl"));
        return run_research(query, manifest.config, manifest.scheduling, rt, policy, executor,
                            nullptr, &sink);
      }
      // Clients and policy construct before the runtime: its destructor
      // joins the offload workers, which may still be mid-request.
      auto& transports = live_transport_factory();
      SearchClient search(transports(manifest.search_base_url, manifest.search_api_key));
      LlmClient llm(transports(manifest.llm_base_url, manifest.llm_api_key), manifest.llm_model);
      LlmPolicy policy(llm);
      if (manifest.prompt_dir) policy.load_templates(*manifest.prompt_dir);
      LlmSynthesis synthesis(llm);
      Runtime rt(Runtime::Mode::Real, std::max(2, manifest.config.worker_limit));
      WebExecutor executor(rt, search, llm);
      EventSink sink(artifact(".events.jsonl"));
      TreeConfig config = manifest.config;
      if (config.worker_limit == 0) config.worker_limit = 8;  // backpressure for live APIs
      return run_research(query, config, manifest.scheduling, rt, policy, executor, &synthesis,
                          &sink);
    }();

    write_file(artifact(".stats.json"), stats_to_json(result.stats).dump(2) + "\n");
    write_file(artifact(".tree.json"), export_tree_json(result.tree));
    write_file(artifact(".tree.dot"), export_tree_dot(result.tree));
    write_file(artifact(".schedule.jsonl"), to_jsonl(result.schedule));
    write_file(artifact(".report.md"), result.report.body);
    write_file(artifact(".report.json"), report_sidecar(result.report).dump(2) + "\n");

    std::cout << "run " << run_id << ": " << result.stats.research.completed
              << " research nodes completed, depth " << result.stats.realized_depth
              << ", wall " << result.stats.wall_latency.count() << " ms"
              << (result.budget_cutoff ? " (budget cutoff)" : "") << "\n"
              << "artifacts in " << manifest.output_dir.string() << "/" << run_id << ".*\n";
    return kExitOk;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_code_for(e);
  }
}

// ---------------------------------------------------------------------------
// compare

int cmd_compare(const std::filesystem::path& scenario_path, std::uint64_t seed, Duration budget,
                const std::optional<std::string>& query_override, const TreeConfig& base_config) {
  try {
    Scenario scenario = Scenario::from_file(scenario_path);
    std::string query = query_override.value_or(scenario.root_query().value_or(""));
    if (query.empty()) {
      throw ConfigError("scenario has no root_query; pass --query");
    }
    TreeConfig config = base_config;
    config.t_max = budget;
    config.validate();

    struct Row {
      SchedulingMode mode;
      Duration makespan{0};
      int completed = 0;
      bool cutoff = false;
    };
    std::vector<Row> rows;
    for (auto mode : {SchedulingMode::Sequential, SchedulingMode::LayerParallel,
                      SchedulingMode::Pooled}) {
      Runtime rt(Runtime::Mode::Virtual);
      ScriptedPolicy policy(scenario);
      SimExecutor executor(rt, scenario, seed);
      auto result = run_research(query, config, mode, rt, policy, executor);
      Row row;
      row.mode = mode;
      row.makespan = makespan(result.schedule);
      row.completed = result.stats.research.completed;
      row.cutoff = result.budget_cutoff;
      rows.push_back(row);
    }

    double seq_ms = static_cast<double>(rows[0].makespan.count());
    std::cout << std::left << std::setw(12) << "mode" << std::right << std::setw(14)
              << "makespan_ms" << std::setw(12) << "completed" << std::setw(10) << "speedup"
              << std::setw(9) << "cutoff" << "\n";
    for (const auto& row : rows) {
      double speedup = row.makespan.count() > 0
                           ? seq_ms / static_cast<double>(row.makespan.count())
                           : 0.0;
      std::cout << std::left << std::setw(12) << to_string(row.mode) << std::right
                << std::setw(14) << row.makespan.count() << std::setw(12) << row.completed
                << std::setw(10) << std::fixed << std::setprecision(2) << speedup << std::setw(9)
                << (row.cutoff ? "yes" : "no") << "\n";
    }
    return kExitOk;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_code_for(e);
  }
}

// ---------------------------------------------------------------------------
// export

int cmd_export(const std::filesystem::path& run_dir, const std::string& what,
               const std::string& format, const std::optional<std::filesystem::path>& out_file) {
  try {
    std::string suffix;
    if (what == "tree") {
      suffix = ".tree.json";
    } else if (what == "trace") {
      suffix = ".events.jsonl";
    } else if (what == "stats") {
      suffix = ".stats.json";
    } else {
      throw ConfigError("--what must be tree, trace, or stats");
    }

    std::optional<std::filesystem::path> found;
    if (std::filesystem::is_directory(run_dir)) {
      for (const auto& entry : std::filesystem::directory_iterator(run_dir)) {
        auto name = entry.path().filename().string();
        if (name.size() > suffix.size() &&
            name.compare(name.size() - suffix.size(), suffix.size(), suffix) == 0) {
          if (found) throw ConfigError("multiple " + what + " artifacts in " + run_dir.string() +
                                       "; pass the file directly");
          found = entry.path();
        }
      }
    }
    if (!found) throw NotFoundError("no " + what + " artifact under " + run_dir.string());

    std::string content = read_file(*found);
    std::string rendered;
    if (what == "tree" && format == "dot") {
      rendered = snapshot_to_dot(nlohmann::json::parse(content));
    } else if (format.empty() || format == "json" || format == "jsonl") {
      rendered = content;
    } else {
      throw ConfigError("unsupported format " + format + " for " + what);
    }

    if (out_file) {
      write_file(*out_file, rendered);
    } else {
      std::cout << rendered;
    }
    return kExitOk;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_code_for(e);
  }
}

// ---------------------------------------------------------------------------
// Argument parsing

namespace {

/// Applies config-file values underneath any flags the user did not pass.
void merge_config_file(const std::filesystem::path& path, CLI::App& app, RunManifest& m) {
  auto doc = nlohmann::json::parse(read_file(path), nullptr, false);
  if (doc.is_discarded() || !doc.is_object()) {
    throw ConfigError("config file " + path.string() + " is not a JSON object");
  }
  auto unset = [&](const std::string& flag) {
    auto* opt = app.get_option_no_throw(flag);
    return opt == nullptr || opt->count() == 0;
  };
  auto& c = m.config;
  if (doc.contains("max_depth") && unset("--max-depth")) c.max_depth = doc["max_depth"];
  if (doc.contains("max_breadth") && unset("--max-breadth")) c.max_breadth = doc["max_breadth"];
  if (doc.contains("flex_breadth") && unset("--flex-breadth"))
    c.flex_breadth = doc["flex_breadth"];
  if (doc.contains("phi_min") && unset("--phi-min")) c.phi_min = doc["phi_min"];
  if (doc.contains("psi_min") && unset("--psi-min")) c.psi_min = doc["psi_min"];
  if (doc.contains("tau") && unset("--tau")) c.tau = doc["tau"];
  if (doc.contains("eval_interval_s") && unset("--eval-interval"))
    c.eval_interval = seconds(doc["eval_interval_s"].get<std::int64_t>());
  if (doc.contains("budget_s") && unset("--budget"))
    c.t_max = seconds(doc["budget_s"].get<std::int64_t>());
  if (doc.contains("worker_limit") && unset("--workers")) c.worker_limit = doc["worker_limit"];
  // Endpoints: environment already seeded these; config file ranks below it.
  if (doc.contains("llm_base_url") && m.llm_base_url.empty())
    m.llm_base_url = doc["llm_base_url"];
  if (doc.contains("llm_model") && m.llm_model.empty()) m.llm_model = doc["llm_model"];
  if (doc.contains("search_base_url") && m.search_base_url.empty())
    m.search_base_url = doc["search_base_url"];
}

void add_config_flags(CLI::App* cmd, RunManifest& m, std::int64_t& budget_s,
                      std::int64_t& eval_interval_s) {
  cmd->add_option("--budget", budget_s, "time budget in seconds");
  cmd->add_option("--max-depth", m.config.max_depth, "maximum research depth");
  cmd->add_option("--max-breadth", m.config.max_breadth, "baseline breadth cap");
  cmd->add_option("--flex-breadth", m.config.flex_breadth, "extra breadth headroom");
  cmd->add_option("--phi-min", m.config.phi_min, "goal-satisfaction threshold");
  cmd->add_option("--psi-min", m.config.psi_min, "quality threshold");
  cmd->add_option("--tau", m.config.tau, "deepening threshold");
  cmd->add_option("--eval-interval", eval_interval_s, "monitor interval in seconds");
  cmd->add_option("--workers", m.config.worker_limit, "worker limit (0 = unlimited)");
}

}  // namespace

int run_cli(const std::vector<std::string>& args) {
  CLI::App app{"Adaptive tree-research orchestration engine"};
  app.require_subcommand(1);

  RunManifest manifest;
  manifest.llm_base_url = env_or("FT_LLM_BASE_URL", "");
  manifest.llm_api_key = env_or("FT_LLM_API_KEY", "");
  manifest.llm_model = env_or("FT_LLM_MODEL", "");
  manifest.search_base_url = env_or("FT_SEARCH_BASE_URL", "");
  manifest.search_api_key = env_or("FT_SEARCH_API_KEY", "");

  std::string query;
  std::string sched = "pooled";
  std::string scenario;
  std::string config_file;
  std::string prompt_dir;
  std::int64_t budget_s = 120;
  std::int64_t eval_interval_s = 8;

  auto* run = app.add_subcommand("run", "execute a research run");
  run->add_option("query", query, "root research query")->required();
  run->add_option("--mode", manifest.mode, "sim or live")
      ->check(CLI::IsMember({"sim", "live"}));
  run->add_option("--sched", sched, "sequential, layer, or pooled")
      ->check(CLI::IsMember({"sequential", "layer", "pooled"}));
  run->add_option("--scenario", scenario, "scenario file (sim mode)");
  run->add_option("--seed", manifest.seed, "deterministic content seed");
  run->add_option("--out", manifest.output_dir, "artifact output directory");
  run->add_option("--run-id", manifest.run_id, "artifact id prefix");
  run->add_option("--config", config_file, "JSON config file");
  run->add_option("--prompt-dir", prompt_dir, "prompt template overrides (live mode)");
  add_config_flags(run, manifest, budget_s, eval_interval_s);

  std::string cmp_scenario;
  std::uint64_t cmp_seed = 0;
  std::int64_t cmp_budget_s = 120;
  std::string cmp_query;
  auto* compare = app.add_subcommand("compare", "run one scenario under all scheduling modes");
  compare->add_option("--scenario", cmp_scenario, "scenario file")->required();
  compare->add_option("--seed", cmp_seed, "deterministic content seed");
  compare->add_option("--budget", cmp_budget_s, "time budget in seconds");
  compare->add_option("--query", cmp_query, "override the scenario root query");

  std::string exp_dir;
  std::string exp_what;
  std::string exp_format;
  std::string exp_out;
  auto* exp = app.add_subcommand("export", "re-emit a run artifact");
  exp->add_option("--run-dir", exp_dir, "directory holding run artifacts")->required();
  exp->add_option("--what", exp_what, "tree, trace, or stats")->required();
  exp->add_option("--format", exp_format, "json, jsonl, or dot");
  exp->add_option("--out-file", exp_out, "write here instead of stdout");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (run->parsed()) {
      manifest.config.t_max = seconds(budget_s);
      manifest.config.eval_interval = seconds(eval_interval_s);
      if (!config_file.empty()) merge_config_file(config_file, *run, manifest);
      if (auto m = parse_scheduling_mode(sched)) manifest.scheduling = *m;
      if (!scenario.empty()) manifest.scenario_path = scenario;
      if (!prompt_dir.empty()) manifest.prompt_dir = prompt_dir;
      return cmd_run(query, manifest);
    }
    if (compare->parsed()) {
      return cmd_compare(cmp_scenario, cmp_seed, seconds(cmp_budget_s),
                         cmp_query.empty() ? std::nullopt
                                           : std::optional<std::string>(cmp_query));
    }
    if (exp->parsed()) {
      return cmd_export(exp_dir, exp_what, exp_format,
                        exp_out.empty() ? std::nullopt
                                        : std::optional<std::filesystem::path>(exp_out));
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_code_for(e);
  }
  return kExitConfig;
}

}  // namespace flowtree
