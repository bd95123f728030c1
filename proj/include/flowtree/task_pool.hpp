// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <deque>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "flowtree/ids.hpp"
#include "flowtree/runtime.hpp"
#include "flowtree/time.hpp"

namespace flowtree {

enum class TaskStatus { Blocked, Ready, Dispatched, Done, Cancelled };
const char* to_string(TaskStatus s);

/// Sequential: at most one task in flight. LayerParallel: depth d+1 waits
/// for every depth-d task to finish. Pooled: dispatch as soon as ready
/// and a worker is free.
enum class SchedulingMode { Sequential, LayerParallel, Pooled };
const char* to_string(SchedulingMode m);
std::optional<SchedulingMode> parse_scheduling_mode(const std::string& name);

struct TaskSpec {
  NodeId id;
  std::optional<NodeId> parent;  // research parent; none for first-layer tasks
  int depth = 1;
  std::string query;
};

struct Task {
  TaskSpec spec;
  TaskStatus status = TaskStatus::Blocked;
  std::uint64_t submit_seq = 0;
  CancelToken token;
  std::optional<TimePoint> started_at;
  std::optional<TimePoint> finished_at;
};

struct TraceRow {
  NodeId task_id;
  std::optional<NodeId> parent_id;
  int depth = 1;
  std::optional<TimePoint> start;
  std::optional<TimePoint> end;
  TaskStatus status = TaskStatus::Blocked;
};

struct ScheduleTrace {
  std::vector<TraceRow> rows;  // submission order
};

/// JSON lines, one row per task:
/// {task_id, parent_id, depth, start_ms, end_ms, status}
std::string to_jsonl(const ScheduleTrace& trace);
ScheduleTrace schedule_trace_from_jsonl(const std::string& text);

/// max end - min start over dispatched rows; throws on an empty trace.
Duration makespan(const ScheduleTrace& trace);

/// The global asynchronous task pool. Accepts research tasks as they are
/// planned, gates children on parent completion of the research phase,
/// dispatches under the worker limit and scheduling mode, and cancels
/// subtrees recursively.
///
/// All transitions happen on the runtime loop thread and are totally
/// ordered per task; enqueueing is constant work regardless of how many
/// tasks are in flight. Dispatch calls the handler inline, so handlers
/// must not block.
class TaskPool {
 public:
  TaskPool(Runtime& rt, SchedulingMode mode, int worker_limit = 0 /* 0 = unlimited */);

  void set_dispatch_handler(std::function<void(const Task&)> handler);

  SchedulingMode mode() const { return mode_; }

  /// Enqueues a task; Blocked until its parent is Done, Ready otherwise.
  /// Throws on duplicate ids and unknown parents. Never blocks.
  void submit(const TaskSpec& spec);

  /// Marks a Dispatched task Done and atomically readies its Blocked
  /// children. Idempotent for Done/Cancelled tasks.
  void notify_complete(NodeId id);

  /// Cancels the task and every transitive descendant not already Done.
  /// Dispatched descendants get their cancellation token fired. Returns
  /// the ids actually cancelled, in cancellation (preorder) order.
  std::vector<NodeId> cancel_subtree(NodeId id);

  /// Cancels everything non-terminal and refuses further dispatch.
  std::vector<NodeId> shutdown();

  bool contains(NodeId id) const { return tasks_.count(id) > 0; }
  TaskStatus status(NodeId id) const;
  CancelToken token(NodeId id) const;
  bool all_terminal() const;
  int dispatched_count() const { return dispatched_; }
  std::size_t size() const { return tasks_.size(); }

  ScheduleTrace trace() const;

 private:
  const Task& get(NodeId id) const;
  Task& get(NodeId id);
  bool eligible(const Task& t) const;
  void pump();
  void cancel_one(Task& t, std::vector<NodeId>& out);

  Runtime& rt_;
  SchedulingMode mode_;
  int worker_limit_;
  bool accepting_ = true;
  std::function<void(const Task&)> dispatch_;
  std::map<NodeId, Task> tasks_;
  std::map<NodeId, std::vector<NodeId>> children_;
  std::deque<NodeId> ready_;            // FIFO by submission order
  std::vector<NodeId> submit_order_;
  std::map<int, int> live_per_depth_;   // non-terminal task count per depth
  int dispatched_ = 0;
  std::uint64_t next_seq_ = 1;
  bool pumping_ = false;
};

/// Drives a pool over a fixture of fixed task latencies until quiescent
/// and returns the schedule trace. Deterministic under a virtual clock.
ScheduleTrace run_to_completion(Runtime& rt, TaskPool& pool,
                                const std::vector<std::pair<TaskSpec, Duration>>& tasks);

}  // namespace flowtree
