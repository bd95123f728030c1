// SPDX-License-Identifier: Apache-2.0
#include "flowtree/telemetry.hpp"

#include <algorithm>
#include <map>
#include <set>
#include <sstream>

#include "flowtree/errors.hpp"

namespace flowtree {

const char* to_string(EventKind k) {
  switch (k) {
    case EventKind::Spawned: return "spawned";
    case EventKind::ExecutionStarted: return "execution_started";
    case EventKind::ExecutionFinished: return "execution_finished";
    case EventKind::Planned: return "planned";
    case EventKind::MonitorTick: return "monitor_tick";
    case EventKind::Terminated: return "terminated";
    case EventKind::Pruned: return "pruned";
    case EventKind::Interrupted: return "interrupted";
    case EventKind::BudgetCutoff: return "budget_cutoff";
    case EventKind::Completed: return "completed";
  }
  return "unknown";
}

std::optional<EventKind> parse_event_kind(const std::string& name) {
  static const std::map<std::string, EventKind> table = {
      {"spawned", EventKind::Spawned},
      {"execution_started", EventKind::ExecutionStarted},
      {"execution_finished", EventKind::ExecutionFinished},
      {"planned", EventKind::Planned},
      {"monitor_tick", EventKind::MonitorTick},
      {"terminated", EventKind::Terminated},
      {"pruned", EventKind::Pruned},
      {"interrupted", EventKind::Interrupted},
      {"budget_cutoff", EventKind::BudgetCutoff},
      {"completed", EventKind::Completed},
  };
  auto it = table.find(name);
  if (it == table.end()) return std::nullopt;
  return it->second;
}

// ---------------------------------------------------------------------------
// EventSink

EventSink::EventSink(const std::filesystem::path& jsonl_path) {
  if (jsonl_path.has_parent_path()) std::filesystem::create_directories(jsonl_path.parent_path());
  file_.emplace(jsonl_path);
  if (!*file_) throw Error("cannot open trace file " + jsonl_path.string());
}

EventSink::~EventSink() { flush(); }

namespace {

nlohmann::json event_to_json(const OrchestrationEvent& e) {
  nlohmann::json j;
  j["seq"] = e.seq;
  j["at_ms"] = e.at.count();
  j["node"] = e.node.value;
  j["kind"] = to_string(e.kind);
  if (!e.payload.is_null() && !(e.payload.is_object() && e.payload.empty())) {
    j["payload"] = e.payload;
  }
  return j;
}

}  // namespace

void EventSink::record(TimePoint at, NodeId node, EventKind kind, nlohmann::json payload) {
  std::lock_guard lk(mu_);
  OrchestrationEvent e;
  e.seq = next_seq_++;
  e.at = at;
  e.node = node;
  e.kind = kind;
  e.payload = std::move(payload);
  if (file_) *file_ << event_to_json(e).dump() << '\n';
  log_.events.push_back(std::move(e));
}

std::size_t EventSink::size() const {
  std::lock_guard lk(mu_);
  return log_.events.size();
}

void EventSink::flush() {
  std::lock_guard lk(mu_);
  if (file_) file_->flush();
}

std::string to_jsonl(const TraceLog& log) {
  std::ostringstream out;
  for (const auto& e : log.events) out << event_to_json(e).dump() << '\n';
  return out.str();
}

TraceLog trace_log_from_jsonl(const std::string& text) {
  TraceLog log;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    auto j = nlohmann::json::parse(line, nullptr, false);
    if (j.is_discarded()) throw ParseError("malformed event line: " + line);
    OrchestrationEvent e;
    e.seq = j.at("seq").get<std::uint64_t>();
    e.at = ms(j.at("at_ms").get<std::int64_t>());
    e.node = NodeId{j.at("node").get<std::uint64_t>()};
    auto kind = parse_event_kind(j.at("kind").get<std::string>());
    if (!kind) throw ParseError("unknown event kind in: " + line);
    e.kind = *kind;
    if (j.contains("payload")) e.payload = j["payload"];
    log.events.push_back(std::move(e));
  }
  return log;
}

// ---------------------------------------------------------------------------
// Stats

RunStats compute_stats(const TraceLog& log, const ResearchTree& tree,
                       std::optional<Duration> sequential_makespan) {
  bool cutoff = false;
  std::set<NodeId> spawned_research;
  std::set<NodeId> finalized;
  TimePoint last{0};
  for (const auto& e : log.events) {
    last = std::max(last, e.at);
    switch (e.kind) {
      case EventKind::BudgetCutoff: cutoff = true; break;
      case EventKind::Spawned:
        if (tree.is_research(e.node)) spawned_research.insert(e.node);
        break;
      case EventKind::Completed:
      case EventKind::Terminated:
      case EventKind::Pruned:
      case EventKind::Interrupted:
        finalized.insert(e.node);
        break;
      default: break;
    }
  }
  if (!cutoff) {
    for (NodeId id : spawned_research) {
      if (!finalized.count(id)) {
        throw IntegrityError("log is incomplete: research node " + to_string(id) +
                             " has no terminal event and no budget cutoff occurred");
      }
    }
  }
  RunStats stats = tree.stats();
  stats.wall_latency = last;
  if (sequential_makespan && last.count() > 0) {
    stats.speedup_vs_sequential =
        static_cast<double>(sequential_makespan->count()) / static_cast<double>(last.count());
  }
  return stats;
}

nlohmann::json stats_to_json(const RunStats& stats) {
  auto counts = [](const StateCounts& c) {
    return nlohmann::json{{"total", c.total},       {"pending", c.pending},
                          {"eligible", c.eligible}, {"running", c.running},
                          {"completed", c.completed}, {"terminated", c.terminated},
                          {"interrupted", c.interrupted}};
  };
  nlohmann::json j;
  j["schema"] = 1;
  j["nodes_total"] = stats.nodes_total;
  j["nodes_completed"] = stats.nodes_completed;
  j["nodes_terminated"] = stats.nodes_terminated;
  j["nodes_interrupted"] = stats.nodes_interrupted;
  j["nodes_pending"] = stats.nodes_pending;
  j["planning"] = counts(stats.planning);
  j["research"] = counts(stats.research);
  j["realized_depth"] = stats.realized_depth;
  j["realized_max_breadth"] = stats.realized_max_breadth;
  j["wall_latency_ms"] = stats.wall_latency.count();
  j["speedup_vs_sequential"] = stats.speedup_vs_sequential
                                   ? nlohmann::json(*stats.speedup_vs_sequential)
                                   : nlohmann::json(nullptr);
  return j;
}

// ---------------------------------------------------------------------------
// Exports

std::string export_tree_json(const ResearchTree& tree) { return tree.snapshot().dump(2) + "\n"; }

namespace {

std::string dot_escape(const std::string& s) {
  std::string out;
  out.reserve(s.size());
  for (char c : s) {
    if (c == '"' || c == '\\') out.push_back('\\');
    out.push_back(c);
  }
  return out;
}

std::string dot_label(const std::string& kind, const nlohmann::json& node) {
  std::string query = node.value("query", "");
  if (query.size() > 40) query = query.substr(0, 37) + "...";
  return kind + ": " + dot_escape(query);
}

}  // namespace

std::string snapshot_to_dot(const nlohmann::json& snapshot) {
  std::ostringstream out;
  out << "digraph research_tree {\n  rankdir=TB;\n  node [fontsize=10];\n";
  for (const auto& n : snapshot.at("nodes")) {
    auto id = n.at("id").get<std::uint64_t>();
    std::string kind = n.at("kind").get<std::string>();
    std::string state = n.at("state").get<std::string>();
    out << "  n" << id << " [shape=" << (kind == "planning" ? "box" : "ellipse") << ", label=\""
        << dot_label(kind == "planning" ? "plan" : "research", n) << "\"";
    if (state == "terminated") out << ", style=dashed";
    out << "];\n";
  }
  for (const auto& n : snapshot.at("nodes")) {
    auto id = n.at("id").get<std::uint64_t>();
    for (const auto& child : n.at("children")) {
      out << "  n" << id << " -> n" << child.get<std::uint64_t>() << ";\n";
    }
  }
  out << "}\n";
  return out.str();
}

std::string export_tree_dot(const ResearchTree& tree) { return snapshot_to_dot(tree.snapshot()); }

}  // namespace flowtree
