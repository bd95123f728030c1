// SPDX-License-Identifier: Apache-2.0
//
// Acceptance suite: one self-contained check per release criterion, each
// printed as a PASS/FAIL line with its runtime. Exits nonzero if any
// criterion fails.
#include <chrono>
#include <functional>
#include <iomanip>
#include <iostream>
#include <map>
#include <random>
#include <sstream>
#include <vector>

#include "flowtree/orchestrator.hpp"
#include "support/reference_interpreter.hpp"
#include "support/scenario_gen.hpp"
#include "support/schedule_oracle.hpp"

using namespace flowtree;
using namespace flowtree::testsupport;

namespace {

struct Check {
  bool ok = true;
  std::ostringstream detail;

  void expect(bool cond, const std::string& what) {
    if (!cond) {
      ok = false;
      if (detail.tellp() > 0) detail << "; ";
      detail << what;
    }
  }
};

// ---------------------------------------------------------------------------
// Shared fixtures

TaskSpec spec(std::uint64_t id, std::optional<std::uint64_t> parent, int depth) {
  TaskSpec s;
  s.id = NodeId{id};
  if (parent) s.parent = NodeId{*parent};
  s.depth = depth;
  s.query = "t" + std::to_string(id);
  return s;
}

std::vector<std::pair<TaskSpec, Duration>> branching_fixture() {
  return {
      {spec(1, std::nullopt, 1), seconds(2)},  {spec(2, std::nullopt, 1), seconds(3)},
      {spec(3, std::nullopt, 1), seconds(10)}, {spec(4, 1, 2), seconds(2)},
      {spec(5, 1, 2), seconds(2)},             {spec(6, 2, 2), seconds(2)},
  };
}

std::vector<OracleTask> to_oracle(const std::vector<std::pair<TaskSpec, Duration>>& fixture) {
  std::vector<OracleTask> out;
  for (const auto& [s, lat] : fixture) {
    OracleTask t;
    t.id = s.id.value;
    if (s.parent) t.parent = s.parent->value;
    t.depth = s.depth;
    t.latency_ms = lat.count();
    out.push_back(t);
  }
  return out;
}

/// Uniform-latency research scenario: every node takes `latency`, yields
/// one finding, and deepens with breadth 4 down to `levels` layers.
Scenario throughput_scenario(Duration latency, int levels, int breadth = 4) {
  Scenario s;
  std::string root = "throughput study";
  s.set_root_query(root);
  s.set_verdicts("default", {{0, 0.1, 0.1}});
  s.set_exec("default", SimExecEntry{latency, 1, 1, false});

  int counter = 0;
  std::vector<std::pair<std::string, int>> frontier;
  std::vector<std::string> roots;
  for (int i = 0; i < breadth; ++i) {
    std::string q = "tp-" + std::to_string(++counter);
    roots.push_back(q);
    frontier.emplace_back(q, 1);
  }
  s.set_breadth(root, BreadthEntry{roots, 0.8});
  while (!frontier.empty()) {
    auto [q, depth] = frontier.front();
    frontier.erase(frontier.begin());
    if (depth >= levels) continue;
    s.set_depth_gain(q, depth, 0.9);
    std::vector<std::string> subs;
    for (int i = 0; i < breadth; ++i) {
      std::string c = "tp-" + std::to_string(++counter);
      subs.push_back(c);
      frontier.emplace_back(c, depth + 1);
    }
    s.set_breadth(q, BreadthEntry{subs, 0.7});
  }
  return s;
}

ResearchRunResult run_sim(const Scenario& scenario, const std::string& query, Duration budget,
                          SchedulingMode mode, std::uint64_t seed) {
  Runtime rt(Runtime::Mode::Virtual);
  ScriptedPolicy policy(scenario);
  SimExecutor executor(rt, scenario, seed);
  TreeConfig config;
  config.t_max = budget;
  return run_research(query, config, mode, rt, policy, executor);
}

// ---------------------------------------------------------------------------
// Criteria

void criterion_1_branching_makespans(Check& c) {
  auto fixture = branching_fixture();
  auto oracle_tasks = to_oracle(fixture);
  const std::map<SchedulingMode, std::int64_t> expected = {
      {SchedulingMode::Sequential, 21000},
      {SchedulingMode::LayerParallel, 12000},
      {SchedulingMode::Pooled, 10000},
  };
  for (const auto& [mode, want] : expected) {
    Runtime rt(Runtime::Mode::Virtual);
    TaskPool pool(rt, mode);
    auto trace = run_to_completion(rt, pool, fixture);
    auto oracle = simulate_schedule(oracle_tasks, mode);
    c.expect(makespan(trace).count() == want,
             std::string(to_string(mode)) + " makespan != " + std::to_string(want));
    c.expect(oracle.makespan == want, std::string("oracle disagrees for ") + to_string(mode));
    for (const auto& row : trace.rows) {
      const auto& span = oracle.spans.at(row.task_id.value);
      c.expect(row.start && row.start->count() == span.start &&
                   row.end && row.end->count() == span.end,
               "span mismatch vs oracle for task " + std::to_string(row.task_id.value));
    }
  }
}

void criterion_2_mode_ordering(Check& c) {
  std::mt19937_64 rng(2026);
  int violations = 0;
  for (int trial = 0; trial < 200; ++trial) {
    auto tasks = random_task_fixture(rng);
    std::vector<std::pair<TaskSpec, Duration>> fixture;
    for (const auto& t : tasks) {
      fixture.emplace_back(spec(t.id, t.parent, t.depth), ms(t.latency_ms));
    }
    std::map<SchedulingMode, std::int64_t> span;
    for (auto mode : {SchedulingMode::Sequential, SchedulingMode::LayerParallel,
                      SchedulingMode::Pooled}) {
      Runtime rt(Runtime::Mode::Virtual);
      TaskPool pool(rt, mode);
      auto trace = run_to_completion(rt, pool, fixture);
      span[mode] = makespan(trace).count();
      auto oracle = simulate_schedule(tasks, mode);
      if (span[mode] != oracle.makespan) ++violations;
    }
    if (!(span[SchedulingMode::Pooled] <= span[SchedulingMode::LayerParallel] &&
          span[SchedulingMode::LayerParallel] <= span[SchedulingMode::Sequential])) {
      ++violations;
    }
  }
  c.expect(violations == 0, std::to_string(violations) + " ordering/oracle violations");
}

void criterion_3_throughput_ratio(Check& c) {
  // 14s per node: sequential completes exactly 8 research nodes in 120s.
  auto scenario = throughput_scenario(seconds(14), 4);
  {
    auto seq = run_sim(scenario, "throughput study", seconds(120), SchedulingMode::Sequential, 1);
    auto pooled = run_sim(scenario, "throughput study", seconds(120), SchedulingMode::Pooled, 1);
    c.expect(seq.stats.research.completed == 8,
             "sequential completed " + std::to_string(seq.stats.research.completed) +
                 " nodes at 120s (want 8)");
    c.expect(pooled.stats.research.completed >= 2 * seq.stats.research.completed,
             "pooled/sequential < 2x at 120s (" +
                 std::to_string(pooled.stats.research.completed) + "/" +
                 std::to_string(seq.stats.research.completed) + ")");
  }
  {
    auto seq = run_sim(scenario, "throughput study", seconds(600), SchedulingMode::Sequential, 1);
    auto pooled = run_sim(scenario, "throughput study", seconds(600), SchedulingMode::Pooled, 1);
    c.expect(seq.stats.research.completed == 42,
             "sequential completed " + std::to_string(seq.stats.research.completed) +
                 " nodes at 600s (want 42)");
    c.expect(pooled.stats.research.completed >= 3 * seq.stats.research.completed,
             "pooled/sequential < 3x at 600s (" +
                 std::to_string(pooled.stats.research.completed) + "/" +
                 std::to_string(seq.stats.research.completed) + ")");
  }
}

void criterion_4_decision_rule_grid(Check& c) {
  struct GridBackend : PolicyBackend {
    double phi = 0, psi = 0;
    bool blocking() const override { return false; }
    std::optional<BreadthDecision> plan_breadth(const std::string&, const std::vector<Finding>&,
                                                const TreeConfig&) override {
      return std::nullopt;
    }
    std::optional<double> depth_gain(const std::string&, const std::vector<Finding>&, int,
                                     const TreeConfig&) override {
      return std::nullopt;
    }
    std::optional<std::pair<double, double>> progress_scores(const std::string&,
                                                             const std::vector<ContextItem>&,
                                                             const std::vector<Finding>&,
                                                             const TreeConfig&) override {
      return std::make_pair(phi, psi);
    }
  };
  TreeConfig config;  // thresholds 0.8 / 0.8
  GridBackend backend;
  int points = 0;
  for (int i = 0; i <= 20; ++i) {
    for (int j = 0; j <= 20; ++j) {
      backend.phi = i * 0.05;
      backend.psi = j * 0.05;
      auto v = evaluate_progress("q", {}, {}, config, backend);
      int expected = (backend.phi >= config.phi_min && backend.psi >= config.psi_min) ? 0 : 1;
      if (v.delta != expected) {
        c.expect(false, "delta mismatch at phi=" + std::to_string(backend.phi) +
                            " psi=" + std::to_string(backend.psi));
      }
      ++points;
    }
  }
  c.expect(points == 441, "grid did not cover 441 points");
}

void criterion_5_pruning_quiescence(Check& c) {
  for (std::uint64_t seed = 1; seed <= 50; ++seed) {
    std::mt19937_64 rng(seed);
    auto gen = pruning_scenario(rng);
    auto result = run_sim(gen.scenario, gen.root_query, seconds(600), SchedulingMode::Pooled,
                          seed);
    std::optional<TimePoint> terminated_at;
    NodeId parent;
    for (const auto& e : result.log.events) {
      if (e.kind == EventKind::Terminated && !terminated_at) {
        terminated_at = e.at;
        parent = e.node;
      }
    }
    if (!terminated_at) {
      c.expect(false, "seed " + std::to_string(seed) + ": no Terminated event");
      continue;
    }
    auto descendants = result.tree.research_descendants(parent);
    for (const auto& e : result.log.events) {
      if (e.kind == EventKind::ExecutionStarted && e.at > *terminated_at) {
        bool is_descendant =
            std::find(descendants.begin(), descendants.end(), e.node) != descendants.end();
        if (is_descendant) {
          c.expect(false, "seed " + std::to_string(seed) + ": descendant " + to_string(e.node) +
                              " started after the prune");
        }
      }
    }
  }
}

void criterion_6_budget_hard_stop(Check& c) {
  Scenario s;
  s.set_root_query("endless study");
  s.set_breadth("endless study", BreadthEntry{{"fast part", "endless part"}, 0.5});
  s.set_exec("fast part", SimExecEntry{seconds(30), 1, 2, false});
  s.set_exec("endless part", SimExecEntry{seconds(900), 1, 1, false});
  s.set_verdicts("default", {{0, 0.1, 0.1}});

  auto result = run_sim(s, "endless study", seconds(120), SchedulingMode::Pooled, 1);
  bool cutoff_event = false;
  TimePoint latest_start{0};
  for (const auto& e : result.log.events) {
    if (e.kind == EventKind::BudgetCutoff) cutoff_event = true;
    if (e.kind == EventKind::ExecutionStarted) latest_start = std::max(latest_start, e.at);
  }
  c.expect(cutoff_event, "no BudgetCutoff event");
  c.expect(latest_start <= seconds(120), "an execution started after the deadline");
  c.expect(result.report.truncated_by_budget, "report not flagged as truncated");
  c.expect(result.report.findings_used.size() == 2,
           "pre-cutoff findings missing from the report");
}

void criterion_7_determinism(Check& c) {
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    std::mt19937_64 rng(seed * 977);
    auto gen = random_tree_scenario(rng);
    auto once = [&] {
      auto result = run_sim(gen.scenario, gen.root_query, seconds(600), SchedulingMode::Pooled,
                            seed);
      return std::make_pair(to_jsonl(result.log), result.report.body);
    };
    auto a = once();
    auto b = once();
    if (a.first != b.first) {
      c.expect(false, "scenario " + std::to_string(seed) + ": event logs differ");
    }
    if (a.second != b.second) {
      c.expect(false, "scenario " + std::to_string(seed) + ": reports differ");
    }
  }
}

void criterion_8_reference_equivalence(Check& c) {
  std::mt19937_64 rng(4242);
  TreeConfig config;
  config.t_max = seconds(100000);
  for (int trial = 0; trial < 25; ++trial) {
    GenOptions opt;
    opt.max_nodes = 10;
    auto gen = random_tree_scenario(rng, opt);
    std::uint64_t seed = 50 + trial;
    Runtime rt(Runtime::Mode::Virtual);
    ScriptedPolicy policy(gen.scenario);
    SimExecutor executor(rt, gen.scenario, seed);
    auto result = run_research(gen.root_query, config, SchedulingMode::Pooled, rt, policy,
                               executor);
    auto [ctx, fnd] = result.tree.aggregate_all();
    auto got = project_aggregate(ctx, fnd);
    auto expected = interpret_reference(gen.scenario, gen.root_query, config, seed);
    if (got.contexts != expected.contexts || got.findings != expected.findings) {
      c.expect(false, "fixture " + std::to_string(trial) + ": aggregates diverge (" +
                          std::to_string(got.findings.size()) + " vs " +
                          std::to_string(expected.findings.size()) + " findings)");
    }
  }
}

void criterion_9_bounds_conformance(Check& c) {
  // Breadth: arbitrary backend output lands in [1, 6] under defaults.
  struct RawBackend : PolicyBackend {
    BreadthDecision out;
    bool blocking() const override { return false; }
    std::optional<BreadthDecision> plan_breadth(const std::string&, const std::vector<Finding>&,
                                                const TreeConfig&) override {
      return out;
    }
    std::optional<double> depth_gain(const std::string&, const std::vector<Finding>&, int,
                                     const TreeConfig&) override {
      return 0.0;
    }
    std::optional<std::pair<double, double>> progress_scores(const std::string&,
                                                             const std::vector<ContextItem>&,
                                                             const std::vector<Finding>&,
                                                             const TreeConfig&) override {
      return std::make_pair(0.0, 0.0);
    }
  };
  std::mt19937_64 rng(7);
  TreeConfig config;
  RawBackend backend;
  for (int trial = 0; trial < 300; ++trial) {
    backend.out = BreadthDecision{};
    int n = static_cast<int>(rng() % 12);
    for (int i = 0; i < n; ++i) {
      backend.out.subqueries.push_back("sub " + std::to_string(rng() % 9));
    }
    auto d = plan_breadth("q", {}, config, backend);
    if (d.breadth < 1 || d.breadth > 6) {
      c.expect(false, "breadth " + std::to_string(d.breadth) + " escaped [1, 6]");
    }
  }

  // Depth: an always-deepen scenario stops at the cap of 10.
  Scenario deep;
  deep.set_root_query("deep dive");
  deep.set_breadth("default", BreadthEntry{{"{query} x"}, 0.5});
  deep.set_exec("default", SimExecEntry{seconds(1), 1, 1, false});
  deep.set_depth_default("default", 0.9);
  deep.set_verdicts("default", {{0, 0.1, 0.1}});
  auto result = run_sim(deep, "deep dive", seconds(100000), SchedulingMode::Pooled, 1);
  c.expect(result.stats.realized_depth == 10,
           "realized depth " + std::to_string(result.stats.realized_depth) + " != 10");

  // Monitor cadence: consecutive ticks per node are exactly 8s apart.
  std::map<std::uint64_t, std::vector<TimePoint>> ticks;
  for (const auto& e : result.log.events) {
    if (e.kind == EventKind::MonitorTick) ticks[e.node.value].push_back(e.at);
  }
  bool any_pair = false;
  for (const auto& [node, at] : ticks) {
    for (std::size_t i = 1; i < at.size(); ++i) {
      any_pair = true;
      if (at[i] - at[i - 1] != seconds(8)) {
        c.expect(false, "tick spacing " + std::to_string((at[i] - at[i - 1]).count()) + "ms");
      }
    }
  }
  c.expect(any_pair, "no consecutive monitor ticks observed");
}

}  // namespace

int main() {
  struct Criterion {
    int number;
    const char* name;
    double budget_seconds;
    std::function<void(Check&)> fn;
  };
  const std::vector<Criterion> criteria = {
      {1, "branching-fixture makespans 21s/12s/10s match the event oracle", 1.0,
       criterion_1_branching_makespans},
      {2, "makespan(pooled) <= makespan(layer) <= makespan(sequential) on 200 random fixtures",
       30.0, criterion_2_mode_ordering},
      {3, "pooled completes >=2x nodes at 120s and >=3x at 600s vs sequential", 10.0,
       criterion_3_throughput_ratio},
      {4, "delta rule matches the threshold predicate on all 441 grid points", 1.0,
       criterion_4_decision_rule_grid},
      {5, "no descendant execution starts after its subtree terminates (50 seeds)", 5.0,
       criterion_5_pruning_quiescence},
      {6, "budget hard stop at 120s with truncated report and pre-cutoff findings", 2.0,
       criterion_6_budget_hard_stop},
      {7, "byte-identical event logs and reports across reruns of 10 scenarios", 10.0,
       criterion_7_determinism},
      {8, "aggregates equal the sequential reference interpreter on 25 small fixtures", 10.0,
       criterion_8_reference_equivalence},
      {9, "breadth in [1,6], depth <= 10, monitor ticks exactly 8s apart", 10.0,
       criterion_9_bounds_conformance},
  };

  int failures = 0;
  for (const auto& crit : criteria) {
    Check check;
    auto begin = std::chrono::steady_clock::now();
    try {
      crit.fn(check);
    } catch (const std::exception& e) {
      check.expect(false, std::string("exception: ") + e.what());
    }
    double elapsed =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - begin).count();
    if (elapsed > crit.budget_seconds) {
      check.expect(false, "runtime " + std::to_string(elapsed) + "s over budget");
    }
    std::cout << (check.ok ? "PASS" : "FAIL") << "  criterion " << crit.number << "  ["
              << std::fixed << std::setprecision(2) << elapsed << "s]  " << crit.name;
    if (!check.ok) std::cout << "  -- " << check.detail.str();
    std::cout << "\n";
    if (!check.ok) ++failures;
  }
  std::cout << (failures == 0 ? "all criteria passed" : "criteria failed") << "\n";
  return failures == 0 ? 0 : 1;
}
