// SPDX-License-Identifier: Apache-2.0
#include "flowtree/task_pool.hpp"

#include <algorithm>
#include <sstream>

#include <nlohmann/json.hpp>

#include "flowtree/errors.hpp"

namespace flowtree {

const char* to_string(TaskStatus s) {
  switch (s) {
    case TaskStatus::Blocked: return "blocked";
    case TaskStatus::Ready: return "ready";
    case TaskStatus::Dispatched: return "dispatched";
    case TaskStatus::Done: return "done";
    case TaskStatus::Cancelled: return "cancelled";
  }
  return "unknown";
}

const char* to_string(SchedulingMode m) {
  switch (m) {
    case SchedulingMode::Sequential: return "sequential";
    case SchedulingMode::LayerParallel: return "layer";
    case SchedulingMode::Pooled: return "pooled";
  }
  return "unknown";
}

std::optional<SchedulingMode> parse_scheduling_mode(const std::string& name) {
  if (name == "sequential") return SchedulingMode::Sequential;
  if (name == "layer" || name == "layer-parallel") return SchedulingMode::LayerParallel;
  if (name == "pooled" || name == "pool") return SchedulingMode::Pooled;
  return std::nullopt;
}

namespace {

bool task_terminal(TaskStatus s) { return s == TaskStatus::Done || s == TaskStatus::Cancelled; }

}  // namespace

// ---------------------------------------------------------------------------

TaskPool::TaskPool(Runtime& rt, SchedulingMode mode, int worker_limit)
    : rt_(rt), mode_(mode), worker_limit_(worker_limit) {
  if (worker_limit_ < 0) throw ConfigError("worker_limit must be nonnegative");
}

void TaskPool::set_dispatch_handler(std::function<void(const Task&)> handler) {
  dispatch_ = std::move(handler);
}

const Task& TaskPool::get(NodeId id) const {
  auto it = tasks_.find(id);
  if (it == tasks_.end()) throw NotFoundError("no task " + to_string(id));
  return it->second;
}

Task& TaskPool::get(NodeId id) {
  auto it = tasks_.find(id);
  if (it == tasks_.end()) throw NotFoundError("no task " + to_string(id));
  return it->second;
}

void TaskPool::submit(const TaskSpec& spec) {
  if (tasks_.count(spec.id)) throw LifecycleError("duplicate task id " + to_string(spec.id));
  if (spec.parent && !tasks_.count(*spec.parent)) {
    throw NotFoundError("parent task " + to_string(*spec.parent) + " was never submitted");
  }
  Task t;
  t.spec = spec;
  t.submit_seq = next_seq_++;
  bool parent_done = !spec.parent || get(*spec.parent).status == TaskStatus::Done;
  if (!accepting_ || (spec.parent && get(*spec.parent).status == TaskStatus::Cancelled)) {
    t.status = TaskStatus::Cancelled;
    t.token.request_cancel();
  } else {
    t.status = parent_done ? TaskStatus::Ready : TaskStatus::Blocked;
  }
  if (spec.parent) children_[*spec.parent].push_back(spec.id);
  submit_order_.push_back(spec.id);
  if (t.status == TaskStatus::Ready) ready_.push_back(spec.id);
  if (!task_terminal(t.status)) ++live_per_depth_[spec.depth];
  tasks_.emplace(spec.id, std::move(t));
  pump();
}

void TaskPool::notify_complete(NodeId id) {
  Task& t = get(id);
  if (task_terminal(t.status)) return;  // idempotent
  if (t.status != TaskStatus::Dispatched) {
    throw LifecycleError("notify_complete on a task that was never dispatched: " + to_string(id));
  }
  t.status = TaskStatus::Done;
  t.finished_at = rt_.now();
  --dispatched_;
  if (--live_per_depth_[t.spec.depth] == 0) live_per_depth_.erase(t.spec.depth);
  if (auto it = children_.find(id); it != children_.end()) {
    for (NodeId child : it->second) {
      Task& c = get(child);
      if (c.status == TaskStatus::Blocked) {
        c.status = TaskStatus::Ready;
        ready_.push_back(child);
      }
    }
  }
  pump();
}

void TaskPool::cancel_one(Task& t, std::vector<NodeId>& out) {
  if (task_terminal(t.status)) return;
  if (t.status == TaskStatus::Dispatched) --dispatched_;
  t.status = TaskStatus::Cancelled;
  t.finished_at = rt_.now();
  if (--live_per_depth_[t.spec.depth] == 0) live_per_depth_.erase(t.spec.depth);
  out.push_back(t.spec.id);
  t.token.request_cancel();
}

std::vector<NodeId> TaskPool::cancel_subtree(NodeId id) {
  get(id);  // throws NotFound for unknown ids
  std::vector<NodeId> cancelled;
  std::vector<NodeId> stack{id};
  while (!stack.empty()) {
    NodeId cur = stack.back();
    stack.pop_back();
    cancel_one(get(cur), cancelled);
    if (auto it = children_.find(cur); it != children_.end()) {
      for (auto child = it->second.rbegin(); child != it->second.rend(); ++child) {
        stack.push_back(*child);
      }
    }
  }
  pump();  // freed workers or cleared layers may unblock others
  return cancelled;
}

std::vector<NodeId> TaskPool::shutdown() {
  accepting_ = false;
  std::vector<NodeId> cancelled;
  for (NodeId id : submit_order_) cancel_one(get(id), cancelled);
  ready_.clear();
  return cancelled;
}

bool TaskPool::eligible(const Task& t) const {
  switch (mode_) {
    case SchedulingMode::Sequential:
      return dispatched_ == 0;
    case SchedulingMode::LayerParallel:
      // Dispatch only at the shallowest depth that still has live tasks.
      return !live_per_depth_.empty() && live_per_depth_.begin()->first == t.spec.depth;
    case SchedulingMode::Pooled:
      return true;
  }
  return false;
}

void TaskPool::pump() {
  if (pumping_ || !accepting_) return;  // dispatch handlers may reenter
  pumping_ = true;
  for (;;) {
    if (!dispatch_) break;
    if (worker_limit_ > 0 && dispatched_ >= worker_limit_) break;
    if (mode_ == SchedulingMode::Sequential && dispatched_ > 0) break;
    // Drop tombstones of tasks cancelled while queued.
    while (!ready_.empty() && get(ready_.front()).status != TaskStatus::Ready) {
      ready_.pop_front();
    }
    // First eligible Ready task in submission order. Under LayerParallel a
    // deeper task readied earlier may sit ahead of an eligible shallower
    // one, so the scan cannot stop at the head.
    auto it = std::find_if(ready_.begin(), ready_.end(), [&](NodeId id) {
      const Task& t = get(id);
      return t.status == TaskStatus::Ready && eligible(t);
    });
    if (it == ready_.end()) break;
    NodeId id = *it;
    ready_.erase(it);
    Task& t = get(id);
    t.status = TaskStatus::Dispatched;
    t.started_at = rt_.now();
    ++dispatched_;
    dispatch_(t);
  }
  pumping_ = false;
}

TaskStatus TaskPool::status(NodeId id) const { return get(id).status; }

CancelToken TaskPool::token(NodeId id) const { return get(id).token; }

bool TaskPool::all_terminal() const {
  return std::all_of(tasks_.begin(), tasks_.end(),
                     [](const auto& kv) { return task_terminal(kv.second.status); });
}

ScheduleTrace TaskPool::trace() const {
  ScheduleTrace out;
  out.rows.reserve(submit_order_.size());
  for (NodeId id : submit_order_) {
    const Task& t = get(id);
    TraceRow row;
    row.task_id = id;
    row.parent_id = t.spec.parent;
    row.depth = t.spec.depth;
    row.start = t.started_at;
    row.end = t.finished_at;
    row.status = t.status;
    out.rows.push_back(std::move(row));
  }
  return out;
}

// ---------------------------------------------------------------------------

std::string to_jsonl(const ScheduleTrace& trace) {
  std::ostringstream out;
  for (const auto& row : trace.rows) {
    nlohmann::json j;
    j["task_id"] = row.task_id.value;
    j["parent_id"] = row.parent_id ? nlohmann::json(row.parent_id->value) : nlohmann::json(nullptr);
    j["depth"] = row.depth;
    j["start_ms"] = row.start ? nlohmann::json(row.start->count()) : nlohmann::json(nullptr);
    j["end_ms"] = row.end ? nlohmann::json(row.end->count()) : nlohmann::json(nullptr);
    j["status"] = to_string(row.status);
    out << j.dump() << '\n';
  }
  return out.str();
}

ScheduleTrace schedule_trace_from_jsonl(const std::string& text) {
  ScheduleTrace trace;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    auto j = nlohmann::json::parse(line, nullptr, false);
    if (j.is_discarded()) throw ParseError("malformed schedule trace line: " + line);
    TraceRow row;
    row.task_id = NodeId{j.at("task_id").get<std::uint64_t>()};
    if (!j.at("parent_id").is_null()) row.parent_id = NodeId{j["parent_id"].get<std::uint64_t>()};
    row.depth = j.at("depth").get<int>();
    if (!j.at("start_ms").is_null()) row.start = ms(j["start_ms"].get<std::int64_t>());
    if (!j.at("end_ms").is_null()) row.end = ms(j["end_ms"].get<std::int64_t>());
    std::string status = j.at("status").get<std::string>();
    if (status == "blocked") row.status = TaskStatus::Blocked;
    else if (status == "ready") row.status = TaskStatus::Ready;
    else if (status == "dispatched") row.status = TaskStatus::Dispatched;
    else if (status == "done") row.status = TaskStatus::Done;
    else if (status == "cancelled") row.status = TaskStatus::Cancelled;
    else throw ParseError("unknown task status " + status);
    trace.rows.push_back(std::move(row));
  }
  return trace;
}

Duration makespan(const ScheduleTrace& trace) {
  std::optional<TimePoint> first_start;
  std::optional<TimePoint> last_end;
  for (const auto& row : trace.rows) {
    if (!row.start) continue;
    if (!first_start || *row.start < *first_start) first_start = row.start;
    if (row.end && (!last_end || *row.end > *last_end)) last_end = row.end;
  }
  if (!first_start || !last_end) throw Error("makespan of an empty trace");
  return *last_end - *first_start;
}

ScheduleTrace run_to_completion(Runtime& rt, TaskPool& pool,
                                const std::vector<std::pair<TaskSpec, Duration>>& tasks) {
  std::map<NodeId, Duration> latency;
  for (const auto& [spec, lat] : tasks) latency[spec.id] = lat;
  pool.set_dispatch_handler([&rt, &pool, latency](const Task& t) {
    NodeId id = t.spec.id;
    rt.schedule_after(latency.at(id), [&pool, id] {
      if (pool.status(id) == TaskStatus::Dispatched) pool.notify_complete(id);
    });
  });
  for (const auto& [spec, _] : tasks) pool.submit(spec);
  rt.run();
  return pool.trace();
}

}  // namespace flowtree
