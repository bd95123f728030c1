// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <functional>
#include <map>
#include <memory>
#include <optional>

#include "flowtree/executor.hpp"
#include "flowtree/policy.hpp"
#include "flowtree/runtime.hpp"
#include "flowtree/synthesis.hpp"
#include "flowtree/task_pool.hpp"
#include "flowtree/telemetry.hpp"
#include "flowtree/tree.hpp"

namespace flowtree {

/// The hard run deadline. No research execution event may carry a
/// timestamp past deadline(); enforcement is infallible and independent
/// of per-node monitors.
struct RunBudget {
  TimePoint started_at{0};
  Duration t_max{0};

  TimePoint deadline() const { return started_at + t_max; }
};

/// Per-subtree termination flag plus monitor bookkeeping. The flag is
/// monotone: once set it never clears, and the node emits no further
/// execution, planning, or monitor events.
struct MonitorHandle {
  NodeId node;
  bool should_terminate = false;
  std::optional<OrchestrationVerdict> last_verdict;
  TimePoint next_eval_at{0};
};

/// Drives one research run end to end: launches execution and child
/// planning for every research node, runs a periodic monitor per subtree,
/// terminates and prunes on satisfaction, detects natural completion, and
/// enforces the global time budget.
///
/// Every callback runs on the runtime loop; cross-thread work (blocking
/// policies, live executors) re-enters through posts, so tree and pool
/// mutations are serialized through a single owner.
class Orchestrator {
 public:
  Orchestrator(Runtime& rt, ResearchTree& tree, TaskPool& pool, PolicyBackend& policy,
               ExecutorBackend& executor, EventSink& sink, RunBudget budget);

  /// Plans the root and spawns the first research layer. The caller then
  /// drives the runtime loop to completion.
  void start();

  /// Spawns the orchestration of a single research node: submits its
  /// task, begins monitoring, and recursively orchestrates any children
  /// it later plans. The node's aggregated results accumulate in its
  /// tree view.
  void orchestrate_node(NodeId research_id);

  bool finished() const { return finished_; }
  bool budget_cutoff_occurred() const { return cutoff_; }
  const MonitorHandle* monitor(NodeId id) const;

 private:
  struct NodeCtx {
    MonitorHandle mon;
    Runtime::TimerId monitor_timer = 0;
    bool exec_resolved = false;
    bool monitor_closed = false;
    bool planning_pending = false;
    bool finalized = false;
  };

  void call_breadth(const std::string& query, std::vector<Finding> findings,
                    std::function<void(BreadthDecision)> then);
  void call_depth(const std::string& query, std::vector<Finding> findings, int depth,
                  std::function<void(DepthDecision)> then);
  void call_verdict(NodeId id, std::function<void(OrchestrationVerdict)> then);

  void on_dispatch(const Task& task);
  void on_exec_done(NodeId id, ExecutionOutcome outcome);
  void maybe_plan_children(NodeId id);
  void schedule_tick(NodeCtx& ctx);
  void on_monitor_tick(NodeId id);
  void terminate_subtree(NodeId id, const OrchestrationVerdict& verdict);
  void close_monitor(NodeCtx& ctx);
  void on_budget_cutoff();
  void finalize_node(NodeId id);
  void check_quiesce();
  void run_complete();

  Runtime& rt_;
  ResearchTree& tree_;
  TaskPool& pool_;
  PolicyBackend& policy_;
  ExecutorBackend& executor_;
  EventSink& sink_;
  RunBudget budget_;

  std::map<NodeId, NodeCtx> nodes_;
  Runtime::TimerId budget_timer_ = 0;
  int active_research_ = 0;
  bool root_settled_ = false;
  bool cutoff_ = false;
  bool finished_ = false;
};

/// Everything one run produces.
struct ResearchRunResult {
  ResearchTree tree;
  TraceLog log;
  ScheduleTrace schedule;
  Report report;
  RunStats stats;
  bool budget_cutoff = false;
};

/// Builds the tree, orchestrates it under the given scheduling mode until
/// natural completion or budget cutoff, synthesizes the report, and
/// computes run statistics. `sink`, when provided, additionally streams
/// events to its configured destination.
ResearchRunResult run_research(const std::string& root_query, const TreeConfig& config,
                               SchedulingMode mode, Runtime& rt, PolicyBackend& policy,
                               ExecutorBackend& executor, SynthesisBackend* synthesis = nullptr,
                               EventSink* sink = nullptr);

}  // namespace flowtree
