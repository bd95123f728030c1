// SPDX-License-Identifier: Apache-2.0
#include "flowtree/orchestrator.hpp"

#include <cassert>

#include <nlohmann/json.hpp>

namespace flowtree {

namespace {

nlohmann::json ids_json(const std::vector<NodeId>& ids) {
  nlohmann::json out = nlohmann::json::array();
  for (auto id : ids) out.push_back(id.value);
  return out;
}

}  // namespace

Orchestrator::Orchestrator(Runtime& rt, ResearchTree& tree, TaskPool& pool,
                           PolicyBackend& policy, ExecutorBackend& executor, EventSink& sink,
                           RunBudget budget)
    : rt_(rt), tree_(tree), pool_(pool), policy_(policy), executor_(executor), sink_(sink),
      budget_(budget) {
  pool_.set_dispatch_handler([this](const Task& t) { on_dispatch(t); });
}

const MonitorHandle* Orchestrator::monitor(NodeId id) const {
  auto it = nodes_.find(id);
  return it == nodes_.end() ? nullptr : &it->second.mon;
}

// ---------------------------------------------------------------------------
// Policy plumbing: scripted backends answer inline (zero virtual time),
// blocking backends run on the offload pool and answer via a post.

// Offloaded work must survive a budget cutoff that ends the run while a
// blocking call is still in flight, so it captures the policy (owned by
// the caller of run_research, which outlives the runtime) plus plain
// values only — never the orchestrator or the tree.

void Orchestrator::call_breadth(const std::string& query, std::vector<Finding> findings,
                                std::function<void(BreadthDecision)> then) {
  if (!policy_.blocking()) {
    then(plan_breadth(query, findings, tree_.config(), policy_));
    return;
  }
  auto result = std::make_shared<BreadthDecision>();
  auto work = [&policy = policy_, config = tree_.config(), query,
               findings = std::move(findings), result] {
    *result = plan_breadth(query, findings, config, policy);
  };
  rt_.offload(std::move(work), [result, then = std::move(then)] { then(std::move(*result)); });
}

void Orchestrator::call_depth(const std::string& query, std::vector<Finding> findings, int depth,
                              std::function<void(DepthDecision)> then) {
  if (!policy_.blocking()) {
    then(decide_depth(query, findings, depth, tree_.config(), policy_));
    return;
  }
  auto result = std::make_shared<DepthDecision>();
  auto work = [&policy = policy_, config = tree_.config(), query,
               findings = std::move(findings), depth, result] {
    *result = decide_depth(query, findings, depth, config, policy);
  };
  rt_.offload(std::move(work), [result, then = std::move(then)] { then(*result); });
}

void Orchestrator::call_verdict(NodeId id, std::function<void(OrchestrationVerdict)> then) {
  const ResearchNode& node = tree_.research(id);
  auto contexts = contexts_of(tree_, id);
  auto findings = findings_of(tree_, id);
  if (!policy_.blocking()) {
    then(evaluate_progress(node.query, contexts, findings, tree_.config(), policy_));
    return;
  }
  auto result = std::make_shared<OrchestrationVerdict>();
  auto work = [&policy = policy_, config = tree_.config(), query = node.query,
               contexts = std::move(contexts), findings = std::move(findings), result] {
    *result = evaluate_progress(query, contexts, findings, config, policy);
  };
  rt_.offload(std::move(work), [result, then = std::move(then)] { then(*result); });
}

// ---------------------------------------------------------------------------
// Run entry

void Orchestrator::start() {
  if (budget_.t_max <= Duration::zero()) {
    // Degenerate budget: nothing may execute; synthesis sees empty unions.
    cutoff_ = true;
    sink_.record(rt_.now(), tree_.root(), EventKind::BudgetCutoff,
                 {{"deadline_ms", budget_.deadline().count()}});
    root_settled_ = true;
    check_quiesce();
    return;
  }
  budget_timer_ = rt_.schedule_at(budget_.deadline(), [this] { on_budget_cutoff(); });

  NodeId root = tree_.root();
  const std::string query = tree_.planning(root).query;
  tree_.set_state(root, NodeState::Eligible);
  tree_.set_state(root, NodeState::Running);
  sink_.record(rt_.now(), root, EventKind::Spawned, {{"query", query}, {"depth", 0}});

  call_breadth(query, {}, [this, root](BreadthDecision decision) {
    if (cutoff_) return;
    auto children = tree_.attach_research_children(root, decision.subqueries);
    tree_.set_state(root, NodeState::Completed);
    sink_.record(rt_.now(), root, EventKind::Planned,
                 {{"children", ids_json(children)},
                  {"breadth", decision.breadth},
                  {"utility", decision.utility_estimate}});
    root_settled_ = true;
    for (NodeId child : children) orchestrate_node(child);
    check_quiesce();
  });
}

void Orchestrator::orchestrate_node(NodeId id) {
  const ResearchNode& node = tree_.research(id);
  assert(!nodes_.count(id));

  NodeCtx& ctx = nodes_[id];
  ctx.mon.node = id;
  ctx.mon.next_eval_at = rt_.now() + tree_.config().eval_interval;
  ++active_research_;

  tree_.set_state(id, NodeState::Eligible);
  sink_.record(rt_.now(), id, EventKind::Spawned,
               {{"query", node.query}, {"depth", node.depth}, {"parent", node.parent.value}});

  schedule_tick(ctx);

  TaskSpec spec;
  spec.id = id;
  spec.depth = node.depth;
  spec.query = node.query;
  const PlanningNode& planner = tree_.planning(node.parent);
  spec.parent = planner.parent;  // research grandparent gates execution
  pool_.submit(spec);
}

// ---------------------------------------------------------------------------
// Execution path

void Orchestrator::on_dispatch(const Task& task) {
  NodeId id = task.spec.id;
  tree_.set_state(id, NodeState::Running);
  sink_.record(rt_.now(), id, EventKind::ExecutionStarted);
  executor_.execute(task.spec.query, NodeRef{id, task.spec.depth}, task.token,
                    [this, id](ExecutionOutcome outcome) { on_exec_done(id, std::move(outcome)); });
}

void Orchestrator::on_exec_done(NodeId id, ExecutionOutcome outcome) {
  NodeCtx& ctx = nodes_.at(id);
  if (ctx.exec_resolved) return;  // a cancelled executor already resolved this node
  ctx.exec_resolved = true;

  if (outcome.interrupted) {
    if (!outcome.contexts.empty() || !outcome.findings.empty()) {
      tree_.record_results(id, outcome.contexts, outcome.findings);
    }
    tree_.set_state(id, NodeState::Interrupted);
    sink_.record(rt_.now(), id, EventKind::Interrupted,
                 {{"elapsed_ms", outcome.elapsed.count()}});
    finalize_node(id);
    return;
  }

  if (outcome.failed) {
    // A failed node completes empty so siblings keep going; the failure is
    // noted as its single finding.
    const ResearchNode& node = tree_.research(id);
    std::vector<Finding> note{Finding::make(
        id, node.depth, "Research failed for: " + node.query + " (" + outcome.error + ")")};
    tree_.record_results(id, {}, note);
    tree_.set_state(id, NodeState::Completed);
    sink_.record(rt_.now(), id, EventKind::ExecutionFinished,
                 {{"error", outcome.error}, {"elapsed_ms", outcome.elapsed.count()}});
    pool_.notify_complete(id);
    return;  // nothing to deepen on
  }

  tree_.record_results(id, outcome.contexts, outcome.findings);
  tree_.set_state(id, NodeState::Completed);
  sink_.record(rt_.now(), id, EventKind::ExecutionFinished,
               {{"n_contexts", outcome.contexts.size()},
                {"n_findings", outcome.findings.size()},
                {"elapsed_ms", outcome.elapsed.count()}});
  pool_.notify_complete(id);
  maybe_plan_children(id);
}

void Orchestrator::maybe_plan_children(NodeId id) {
  NodeCtx& ctx = nodes_.at(id);
  if (ctx.mon.should_terminate || cutoff_) return;
  const ResearchNode& node = tree_.research(id);
  ctx.planning_pending = true;

  call_depth(node.query, findings_of(tree_, id), node.depth, [this, id](DepthDecision dd) {
    NodeCtx& ctx = nodes_.at(id);
    if (ctx.mon.should_terminate || cutoff_ || !dd.go_deeper) {
      ctx.planning_pending = false;
      return;
    }
    const ResearchNode& node = tree_.research(id);
    call_breadth(node.query, findings_of(tree_, id),
                 [this, id, gain = dd.marginal_gain](BreadthDecision bd) {
                   NodeCtx& ctx = nodes_.at(id);
                   ctx.planning_pending = false;
                   if (ctx.mon.should_terminate || cutoff_) return;
                   NodeId planner = tree_.add_child_planner(id);
                   tree_.set_state(planner, NodeState::Eligible);
                   tree_.set_state(planner, NodeState::Running);
                   auto children = tree_.attach_research_children(planner, bd.subqueries);
                   tree_.set_state(planner, NodeState::Completed);
                   sink_.record(rt_.now(), id, EventKind::Planned,
                                {{"planner", planner.value},
                                 {"children", ids_json(children)},
                                 {"breadth", bd.breadth},
                                 {"marginal_gain", gain}});
                   for (NodeId child : children) orchestrate_node(child);
                 });
  });
}

// ---------------------------------------------------------------------------
// Monitoring

void Orchestrator::schedule_tick(NodeCtx& ctx) {
  NodeId id = ctx.mon.node;
  TimePoint at = ctx.mon.next_eval_at;
  if (!rt_.is_virtual() && ctx.monitor_timer == 0) {
    // De-phase first evaluations across nodes (±10%) so live policy calls
    // do not stampede; subsequent ticks keep the exact cadence.
    Fnv1a h;
    h.add(id.value);
    auto jitter = static_cast<std::int64_t>(h.value() % 201);  // 0..200 per mille
    auto interval = tree_.config().eval_interval.count();
    at = rt_.now() + Duration{interval * (900 + jitter) / 1000};
  }
  ctx.monitor_timer = rt_.schedule_at(at, [this, id] { on_monitor_tick(id); });
}

void Orchestrator::on_monitor_tick(NodeId id) {
  NodeCtx& ctx = nodes_.at(id);
  if (ctx.monitor_closed || ctx.mon.should_terminate) return;

  call_verdict(id, [this, id](OrchestrationVerdict verdict) {
    NodeCtx& ctx = nodes_.at(id);
    if (ctx.monitor_closed || ctx.mon.should_terminate) return;  // pruned meanwhile
    ctx.mon.last_verdict = verdict;
    sink_.record(rt_.now(), id, EventKind::MonitorTick,
                 {{"delta", verdict.delta}, {"phi", verdict.phi}, {"psi", verdict.psi}});

    // Natural completion wins over same-tick satisfaction: results are
    // already complete, so the node closes as Completed, not Terminated.
    bool exec_done = tree_.state(id) == NodeState::Completed;
    bool children_settled = true;
    for (NodeId child : tree_.research_children(id)) {
      if (!nodes_.at(child).finalized) {
        children_settled = false;
        break;
      }
    }
    if (exec_done && !ctx.planning_pending && children_settled) {
      close_monitor(ctx);
      sink_.record(rt_.now(), id, EventKind::Completed);
      finalize_node(id);
      return;
    }

    if (verdict.delta == 0) {
      terminate_subtree(id, verdict);
      return;
    }

    ctx.mon.next_eval_at += tree_.config().eval_interval;
    schedule_tick(ctx);
  });
}

void Orchestrator::terminate_subtree(NodeId id, const OrchestrationVerdict& verdict) {
  NodeCtx& ctx = nodes_.at(id);
  close_monitor(ctx);
  sink_.record(rt_.now(), id, EventKind::Terminated,
               {{"phi", verdict.phi}, {"psi", verdict.psi}});

  // Prune every research descendant: close monitors first so nothing
  // reschedules, then cancel the pool subtree (tokens interrupt running
  // executors; queued tasks never dispatch).
  for (NodeId d : tree_.research_descendants(id)) {
    NodeCtx& dctx = nodes_.at(d);
    if (dctx.finalized) continue;
    close_monitor(dctx);
    NodeState s = tree_.state(d);
    if (s == NodeState::Pending || s == NodeState::Eligible) {
      tree_.set_state(d, NodeState::Terminated);
      sink_.record(rt_.now(), d, EventKind::Pruned, {{"by", id.value}});
      dctx.exec_resolved = true;
      finalize_node(d);
    } else if (s == NodeState::Completed) {
      // Execution already finished; the prune merely closes its monitor.
      sink_.record(rt_.now(), d, EventKind::Completed);
      finalize_node(d);
    }
    // Running descendants resolve through their interrupted outcome.
  }
  pool_.cancel_subtree(id);

  NodeState s = tree_.state(id);
  if (s == NodeState::Pending || s == NodeState::Eligible) {
    tree_.set_state(id, NodeState::Terminated);
    ctx.exec_resolved = true;
  }
  finalize_node(id);  // no-op while its execution is still resolving
}

void Orchestrator::close_monitor(NodeCtx& ctx) {
  ctx.mon.should_terminate = true;
  if (!ctx.monitor_closed) {
    ctx.monitor_closed = true;
    if (ctx.monitor_timer != 0) rt_.cancel_timer(ctx.monitor_timer);
  }
}

// ---------------------------------------------------------------------------
// Budget enforcement

void Orchestrator::on_budget_cutoff() {
  if (finished_ || cutoff_) return;
  cutoff_ = true;
  sink_.record(rt_.now(), tree_.root(), EventKind::BudgetCutoff,
               {{"deadline_ms", budget_.deadline().count()}});

  // Monitors close before tasks are cancelled: past this point the trace
  // may only contain Interrupted/Terminated/Completed events.
  for (auto& [id, ctx] : nodes_) close_monitor(ctx);
  pool_.shutdown();

  for (auto& [id, ctx] : nodes_) {
    if (ctx.finalized || ctx.exec_resolved) continue;
    NodeState s = tree_.state(id);
    if (s == NodeState::Pending || s == NodeState::Eligible) {
      tree_.set_state(id, NodeState::Terminated);
      sink_.record(rt_.now(), id, EventKind::Terminated, {{"reason", "budget"}});
      ctx.exec_resolved = true;
      finalize_node(id);
    }
    // Running nodes resolve through their interrupted outcomes, which the
    // pool shutdown just triggered.
  }
  for (auto& [id, ctx] : nodes_) {
    if (ctx.finalized || !ctx.exec_resolved) continue;
    if (tree_.state(id) == NodeState::Completed) {
      sink_.record(rt_.now(), id, EventKind::Completed);
    }
    finalize_node(id);
  }
  if (!root_settled_) {
    if (!is_terminal(tree_.state(tree_.root()))) {
      tree_.set_state(tree_.root(), NodeState::Terminated);
      sink_.record(rt_.now(), tree_.root(), EventKind::Terminated, {{"reason", "budget"}});
    }
    root_settled_ = true;
  }
  check_quiesce();
}

// ---------------------------------------------------------------------------
// Completion

void Orchestrator::finalize_node(NodeId id) {
  NodeCtx& ctx = nodes_.at(id);
  if (ctx.finalized || !ctx.exec_resolved || !ctx.monitor_closed) return;
  ctx.finalized = true;
  --active_research_;
  check_quiesce();
}

void Orchestrator::check_quiesce() {
  if (finished_ || !root_settled_ || active_research_ > 0) return;
  run_complete();
}

void Orchestrator::run_complete() {
  finished_ = true;
  if (budget_timer_ != 0) rt_.cancel_timer(budget_timer_);
  if (!rt_.is_virtual()) rt_.stop();
}

// ---------------------------------------------------------------------------
// Driver

ResearchRunResult run_research(const std::string& root_query, const TreeConfig& config,
                               SchedulingMode mode, Runtime& rt, PolicyBackend& policy,
                               ExecutorBackend& executor, SynthesisBackend* synthesis,
                               EventSink* sink) {
  config.validate();
  ResearchTree tree(root_query, config, rt.now());
  TaskPool pool(rt, mode, config.worker_limit);
  std::optional<EventSink> local_sink;
  if (!sink) local_sink.emplace();
  EventSink& events = sink ? *sink : *local_sink;

  Orchestrator orch(rt, tree, pool, policy, executor, events, RunBudget{rt.now(), config.t_max});
  orch.start();
  rt.run();
  if (!orch.finished()) {
    throw IntegrityError("run loop drained before the orchestrator quiesced");
  }

  auto [contexts, findings] = tree.aggregate_all();
  ResearchRunResult result{std::move(tree), events.log(), pool.trace(), Report{}, RunStats{},
                           orch.budget_cutoff_occurred()};
  result.report = synthesize(root_query, std::move(contexts), std::move(findings),
                             result.budget_cutoff, rt.now(), synthesis);
  result.stats = compute_stats(result.log, result.tree);
  return result;
}

}  // namespace flowtree
