// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>
#include <fstream>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "flowtree/ids.hpp"
#include "flowtree/task_pool.hpp"
#include "flowtree/time.hpp"
#include "flowtree/tree.hpp"

namespace flowtree {

enum class EventKind {
  Spawned,
  ExecutionStarted,
  ExecutionFinished,
  Planned,
  MonitorTick,
  Terminated,
  Pruned,
  Interrupted,
  BudgetCutoff,
  Completed,
};

const char* to_string(EventKind k);
std::optional<EventKind> parse_event_kind(const std::string& name);

struct OrchestrationEvent {
  std::uint64_t seq = 0;  // ties at equal timestamps break deterministically
  TimePoint at{0};
  NodeId node;
  EventKind kind = EventKind::Spawned;
  nlohmann::json payload;
};

struct TraceLog {
  int schema_version = 1;
  std::vector<OrchestrationEvent> events;
};

/// Append-only event sink. Many producers, one consumer; appends are
/// serialized internally and never block emitters beyond constant work.
/// When given a path, events also stream to disk as JSON lines.
class EventSink {
 public:
  EventSink() = default;
  explicit EventSink(const std::filesystem::path& jsonl_path);
  ~EventSink();

  void record(TimePoint at, NodeId node, EventKind kind, nlohmann::json payload = {});

  const TraceLog& log() const { return log_; }
  std::size_t size() const;
  void flush();

 private:
  mutable std::mutex mu_;
  TraceLog log_;
  std::uint64_t next_seq_ = 1;
  std::optional<std::ofstream> file_;
};

std::string to_jsonl(const TraceLog& log);
TraceLog trace_log_from_jsonl(const std::string& text);

/// Derives run statistics from the event log and the final tree.
/// Counts come from tree state; wall latency is the last event
/// timestamp. Supplying the paired sequential makespan fills the speedup
/// ratio. Throws IntegrityError when a research node was spawned but the
/// log holds no terminal event for it and no budget cutoff occurred.
RunStats compute_stats(const TraceLog& log, const ResearchTree& tree,
                       std::optional<Duration> sequential_makespan = std::nullopt);

nlohmann::json stats_to_json(const RunStats& stats);

/// Tree exports. JSON follows the tree snapshot schema; DOT renders
/// planning nodes as boxes, research nodes as ellipses, and terminated
/// (pruned) nodes dashed.
std::string export_tree_json(const ResearchTree& tree);
std::string export_tree_dot(const ResearchTree& tree);

/// Renders DOT from a previously exported snapshot document.
std::string snapshot_to_dot(const nlohmann::json& snapshot);

}  // namespace flowtree
