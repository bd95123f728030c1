// SPDX-License-Identifier: Apache-2.0
#include "flowtree/tree.hpp"

#include <algorithm>

#include <nlohmann/json.hpp>

namespace flowtree {

const char* to_string(NodeState s) {
  switch (s) {
    case NodeState::Pending: return "pending";
    case NodeState::Eligible: return "eligible";
    case NodeState::Running: return "running";
    case NodeState::Completed: return "completed";
    case NodeState::Terminated: return "terminated";
    case NodeState::Interrupted: return "interrupted";
  }
  return "unknown";
}

bool is_terminal(NodeState s) {
  return s == NodeState::Completed || s == NodeState::Terminated ||
         s == NodeState::Interrupted;
}

bool legal_transition(NodeState from, NodeState to) {
  if (is_terminal(from)) return false;
  switch (to) {
    case NodeState::Eligible: return from == NodeState::Pending;
    case NodeState::Running: return from == NodeState::Eligible;
    case NodeState::Completed: return from == NodeState::Running;
    case NodeState::Interrupted: return from == NodeState::Running;
    case NodeState::Terminated: return true;  // any non-terminal state
    case NodeState::Pending: return false;
  }
  return false;
}

ContextItem ContextItem::make(std::string source, std::string body, TimePoint retrieved_at) {
  ContextItem item;
  item.id = hash_content(source, body);
  item.source = std::move(source);
  item.body = std::move(body);
  item.retrieved_at = retrieved_at;
  return item;
}

Finding Finding::make(NodeId origin, int depth, std::string body) {
  Finding f;
  Fnv1a h;
  h.add(origin.value).add(body);
  f.id = ContentHash{h.value()};
  f.origin_node = origin;
  f.body = std::move(body);
  f.depth = depth;
  return f;
}

// ---------------------------------------------------------------------------

ResearchTree::ResearchTree(std::string root_query, TreeConfig config, TimePoint created_at)
    : config_(std::move(config)), created_at_(created_at) {
  config_.validate();
  if (root_query.empty()) throw ConfigError("root query must be nonempty");
  root_ = fresh_id();
  PlanningNode root;
  root.id = root_;
  root.query = std::move(root_query);
  planning_.emplace(root_, std::move(root));
}

NodeId ResearchTree::fresh_id() { return NodeId{next_id_++}; }

bool ResearchTree::contains(NodeId id) const {
  return planning_.count(id) > 0 || research_.count(id) > 0;
}

bool ResearchTree::is_planning(NodeId id) const { return planning_.count(id) > 0; }
bool ResearchTree::is_research(NodeId id) const { return research_.count(id) > 0; }

const PlanningNode& ResearchTree::planning(NodeId id) const {
  auto it = planning_.find(id);
  if (it == planning_.end()) throw NotFoundError("no planning node " + to_string(id));
  return it->second;
}

const ResearchNode& ResearchTree::research(NodeId id) const {
  auto it = research_.find(id);
  if (it == research_.end()) throw NotFoundError("no research node " + to_string(id));
  return it->second;
}

int ResearchTree::planner_child_depth(const PlanningNode& p) const {
  if (!p.parent) return 1;  // root planner: children are the first research layer
  return research(*p.parent).depth + 1;
}

std::vector<NodeId> ResearchTree::attach_research_children(
    NodeId planner, std::span<const std::string> subqueries) {
  auto it = planning_.find(planner);
  if (it == planning_.end()) throw NotFoundError("no planning node " + to_string(planner));
  PlanningNode& p = it->second;
  if (!p.children.empty()) throw LifecycleError("planning node already has children");
  auto n = static_cast<int>(subqueries.size());
  if (n < 1 || n > config_.max_total_breadth()) {
    throw BoundsError("breadth " + std::to_string(n) + " outside [1, " +
                      std::to_string(config_.max_total_breadth()) + "]");
  }
  int child_depth = planner_child_depth(p);
  if (child_depth > config_.max_depth) {
    throw BoundsError("depth cap " + std::to_string(config_.max_depth) +
                      " reached; planner is a leaf");
  }
  std::vector<NodeId> ids;
  ids.reserve(subqueries.size());
  for (const auto& q : subqueries) {
    NodeId id = fresh_id();
    ResearchNode node;
    node.id = id;
    node.query = q;
    node.parent = planner;
    node.depth = child_depth;
    research_.emplace(id, std::move(node));
    p.children.push_back(id);
    ids.push_back(id);
  }
  p.breadth = n;
  return ids;
}

NodeId ResearchTree::add_child_planner(NodeId research_id) {
  auto it = research_.find(research_id);
  if (it == research_.end()) throw NotFoundError("no research node " + to_string(research_id));
  ResearchNode& r = it->second;
  if (r.child_planner) throw LifecycleError("research node already has a child planner");
  NodeId id = fresh_id();
  PlanningNode p;
  p.id = id;
  p.query = r.query;
  p.parent = research_id;
  planning_.emplace(id, std::move(p));
  r.child_planner = id;
  return id;
}

void ResearchTree::set_state(NodeId id, NodeState next) {
  NodeState* slot = nullptr;
  if (auto it = planning_.find(id); it != planning_.end()) {
    slot = &it->second.state;
  } else if (auto rit = research_.find(id); rit != research_.end()) {
    slot = &rit->second.state;
  } else {
    throw NotFoundError("no node " + to_string(id));
  }
  if (!legal_transition(*slot, next)) {
    throw LifecycleError(std::string("illegal transition ") + to_string(*slot) + " -> " +
                         to_string(next) + " on " + to_string(id));
  }
  *slot = next;
}

NodeState ResearchTree::state(NodeId id) const {
  if (auto it = planning_.find(id); it != planning_.end()) return it->second.state;
  return research(id).state;
}

void ResearchTree::record_results(NodeId node, std::span<const ContextItem> contexts,
                                  std::span<const Finding> findings) {
  auto it = research_.find(node);
  if (it == research_.end()) throw NotFoundError("no research node " + to_string(node));
  if (is_terminal(it->second.state)) {
    throw LifecycleError("cannot record results on a " +
                         std::string(to_string(it->second.state)) + " node");
  }
  for (const auto& f : findings) {
    if (!research_.count(f.origin_node)) {
      throw NotFoundError("finding origin " + to_string(f.origin_node) + " does not exist");
    }
    if (research_.at(f.origin_node).depth != f.depth) {
      throw IntegrityError("finding depth does not match its origin node");
    }
  }
  // Merge upward: the node itself plus every research ancestor, so monitor
  // views stay fresh without a lazy aggregation pass.
  ResearchNode* current = &it->second;
  for (;;) {
    for (const auto& c : contexts) current->contexts.emplace(c.id, c);
    for (const auto& f : findings) current->findings.emplace(f.id, f);
    const PlanningNode& parent = planning(current->parent);
    if (!parent.parent) break;
    current = &research_.at(*parent.parent);
  }
}

std::pair<std::vector<ContextItem>, std::vector<Finding>> ResearchTree::aggregate_all() const {
  std::map<ContentHash, ContextItem> ctx;
  std::map<ContentHash, Finding> fnd;
  for (const auto& [_, node] : research_) {
    for (const auto& [id, c] : node.contexts) ctx.emplace(id, c);
    for (const auto& [id, f] : node.findings) fnd.emplace(id, f);
  }
  std::pair<std::vector<ContextItem>, std::vector<Finding>> out;
  out.first.reserve(ctx.size());
  out.second.reserve(fnd.size());
  for (auto& [_, c] : ctx) out.first.push_back(c);
  for (auto& [_, f] : fnd) out.second.push_back(f);
  return out;
}

namespace {

void count_state(StateCounts& counts, NodeState s) {
  ++counts.total;
  switch (s) {
    case NodeState::Pending: ++counts.pending; break;
    case NodeState::Eligible: ++counts.eligible; break;
    case NodeState::Running: ++counts.running; break;
    case NodeState::Completed: ++counts.completed; break;
    case NodeState::Terminated: ++counts.terminated; break;
    case NodeState::Interrupted: ++counts.interrupted; break;
  }
}

}  // namespace

RunStats ResearchTree::stats() const {
  RunStats s;
  for (const auto& [_, p] : planning_) {
    count_state(s.planning, p.state);
    s.realized_max_breadth = std::max(s.realized_max_breadth, p.breadth);
  }
  for (const auto& [_, r] : research_) {
    count_state(s.research, r.state);
    s.realized_depth = std::max(s.realized_depth, r.depth);
  }
  s.nodes_total = s.planning.total + s.research.total;
  s.nodes_completed = s.planning.completed + s.research.completed;
  s.nodes_terminated = s.planning.terminated + s.research.terminated;
  s.nodes_interrupted = s.planning.interrupted + s.research.interrupted;
  s.nodes_pending = s.nodes_total - s.nodes_completed - s.nodes_terminated - s.nodes_interrupted;
  return s;
}

std::vector<NodeId> ResearchTree::research_children(NodeId research_id) const {
  const ResearchNode& r = research(research_id);
  if (!r.child_planner) return {};
  return planning(*r.child_planner).children;
}

std::vector<NodeId> ResearchTree::research_descendants(NodeId research_id) const {
  std::vector<NodeId> out;
  std::vector<NodeId> stack = research_children(research_id);
  std::reverse(stack.begin(), stack.end());
  while (!stack.empty()) {
    NodeId id = stack.back();
    stack.pop_back();
    out.push_back(id);
    auto kids = research_children(id);
    std::reverse(kids.begin(), kids.end());
    for (auto k : kids) stack.push_back(k);
  }
  return out;
}

std::vector<NodeId> ResearchTree::all_nodes() const {
  std::vector<NodeId> out;
  out.reserve(planning_.size() + research_.size());
  for (const auto& [id, _] : planning_) out.push_back(id);
  for (const auto& [id, _] : research_) out.push_back(id);
  std::sort(out.begin(), out.end());
  return out;
}

nlohmann::json ResearchTree::snapshot() const {
  nlohmann::json nodes = nlohmann::json::array();
  for (NodeId id : all_nodes()) {
    nlohmann::json n;
    n["id"] = id.value;
    if (is_planning(id)) {
      const PlanningNode& p = planning(id);
      n["kind"] = "planning";
      n["query"] = p.query;
      n["state"] = to_string(p.state);
      n["depth"] = p.parent ? research(*p.parent).depth : 0;
      n["parent"] = p.parent ? nlohmann::json(p.parent->value) : nlohmann::json(nullptr);
      nlohmann::json kids = nlohmann::json::array();
      for (auto c : p.children) kids.push_back(c.value);
      n["children"] = std::move(kids);
      n["n_contexts"] = 0;
      n["n_findings"] = 0;
    } else {
      const ResearchNode& r = research(id);
      n["kind"] = "research";
      n["query"] = r.query;
      n["state"] = to_string(r.state);
      n["depth"] = r.depth;
      n["parent"] = r.parent.value;
      nlohmann::json kids = nlohmann::json::array();
      if (r.child_planner) kids.push_back(r.child_planner->value);
      n["children"] = std::move(kids);
      n["n_contexts"] = r.contexts.size();
      n["n_findings"] = r.findings.size();
    }
    nodes.push_back(std::move(n));
  }
  nlohmann::json doc;
  doc["schema"] = 1;
  doc["root"] = root_.value;
  doc["nodes"] = std::move(nodes);
  return doc;
}

std::vector<Finding> findings_of(const ResearchTree& tree, NodeId research_id) {
  const auto& node = tree.research(research_id);
  std::vector<Finding> out;
  out.reserve(node.findings.size());
  for (const auto& [_, f] : node.findings) out.push_back(f);
  return out;
}

std::vector<ContextItem> contexts_of(const ResearchTree& tree, NodeId research_id) {
  const auto& node = tree.research(research_id);
  std::vector<ContextItem> out;
  out.reserve(node.contexts.size());
  for (const auto& [_, c] : node.contexts) out.push_back(c);
  return out;
}

}  // namespace flowtree
