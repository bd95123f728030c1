// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "flowtree/config.hpp"
#include "flowtree/errors.hpp"
#include "flowtree/ids.hpp"
#include "flowtree/time.hpp"

namespace flowtree {

// ---------------------------------------------------------------------------
// Node lifecycle

enum class NodeState { Pending, Eligible, Running, Completed, Terminated, Interrupted };

const char* to_string(NodeState s);
bool is_terminal(NodeState s);

/// Legal transitions: Pending→Eligible→Running→{Completed, Interrupted},
/// plus any non-terminal state →Terminated. Terminal states are final.
bool legal_transition(NodeState from, NodeState to);

// ---------------------------------------------------------------------------
// Payload types

/// A retrieved piece of source material. Identity is a pure function of
/// (source, body), so re-recording identical content is idempotent.
struct ContextItem {
  ContentHash id;
  std::string source;
  std::string body;
  TimePoint retrieved_at{0};

  static ContextItem make(std::string source, std::string body, TimePoint retrieved_at);
};

/// A reasoning artifact produced at a research node. depth always equals
/// the origin node's depth; identity covers (origin, body).
struct Finding {
  ContentHash id;
  NodeId origin_node;
  std::string body;
  int depth = 0;

  static Finding make(NodeId origin, int depth, std::string body);
};

// ---------------------------------------------------------------------------
// Nodes

struct PlanningNode {
  NodeId id;
  std::string query;
  std::optional<NodeId> parent;  // owning research node; none for the root
  int breadth = 0;               // set once children are attached
  std::vector<NodeId> children;  // research nodes, in planning order
  NodeState state = NodeState::Pending;
};

struct ResearchNode {
  NodeId id;
  std::string query;
  NodeId parent;  // planning node
  int depth = 1;
  std::optional<NodeId> child_planner;  // at most one
  NodeState state = NodeState::Pending;
  // Result view: locally recorded items merged with everything propagated
  // up from descendants. Keyed by content hash, so unions are idempotent.
  std::map<ContentHash, ContextItem> contexts;
  std::map<ContentHash, Finding> findings;
};

// ---------------------------------------------------------------------------
// Run statistics (shared with telemetry)

struct StateCounts {
  int total = 0;
  int pending = 0;
  int eligible = 0;
  int running = 0;
  int completed = 0;
  int terminated = 0;
  int interrupted = 0;
};

struct RunStats {
  StateCounts planning;
  StateCounts research;
  int nodes_total = 0;
  int nodes_completed = 0;
  int nodes_terminated = 0;
  int nodes_interrupted = 0;
  int nodes_pending = 0;  // still pending/eligible/running at cutoff
  int realized_depth = 0;
  int realized_max_breadth = 0;
  Duration wall_latency{0};                       // filled by telemetry
  std::optional<double> speedup_vs_sequential;    // filled by telemetry
};

// ---------------------------------------------------------------------------
// ResearchTree

/// The dynamic tree of alternating planning and research nodes built for
/// one query. Edges alternate strictly; depth counts research layers only.
///
/// The tree is a plain data structure with no internal locking: all
/// mutation is serialized through the runtime loop that owns it. Payload
/// types are value types and safe to move across threads.
class ResearchTree {
 public:
  ResearchTree(std::string root_query, TreeConfig config, TimePoint created_at = kRunStart);

  NodeId root() const { return root_; }
  const TreeConfig& config() const { return config_; }
  TimePoint created_at() const { return created_at_; }

  bool contains(NodeId id) const;
  bool is_planning(NodeId id) const;
  bool is_research(NodeId id) const;

  const PlanningNode& planning(NodeId id) const;
  const ResearchNode& research(NodeId id) const;

  /// Creates one Pending research node per subquery under `planner`.
  /// Child depth = the planner's research-ancestor depth + 1.
  /// Throws BoundsError when the subquery count violates breadth bounds
  /// and a depth-cap BoundsError when children would exceed max_depth.
  std::vector<NodeId> attach_research_children(NodeId planner,
                                               std::span<const std::string> subqueries);

  /// Spawns the single child planning node of a research node.
  NodeId add_child_planner(NodeId research_id);

  /// Applies a lifecycle transition; throws LifecycleError if illegal.
  void set_state(NodeId id, NodeState next);
  NodeState state(NodeId id) const;

  /// Records executor output on a research node and merges the same items
  /// into every ancestor research node's view, including ancestors that
  /// already completed. Rejects nodes in a terminal state.
  void record_results(NodeId node, std::span<const ContextItem> contexts,
                      std::span<const Finding> findings);

  /// Deduplicated unions over all research nodes regardless of state.
  std::pair<std::vector<ContextItem>, std::vector<Finding>> aggregate_all() const;

  RunStats stats() const;

  /// Direct research children (through the child planner, if any).
  std::vector<NodeId> research_children(NodeId research_id) const;

  /// All research descendants of a research node, preorder.
  std::vector<NodeId> research_descendants(NodeId research_id) const;

  /// All node ids in creation order.
  std::vector<NodeId> all_nodes() const;

  /// Stable snapshot document: one entry per node with fields
  /// id, kind, query, state, depth, parent, children, n_contexts, n_findings.
  nlohmann::json snapshot() const;

 private:
  NodeId fresh_id();
  int planner_child_depth(const PlanningNode& p) const;

  TreeConfig config_;
  NodeId root_;
  TimePoint created_at_{0};
  std::uint64_t next_id_ = 1;
  std::map<NodeId, PlanningNode> planning_;
  std::map<NodeId, ResearchNode> research_;
};

/// Convenience used throughout tests and the orchestrator.
std::vector<Finding> findings_of(const ResearchTree& tree, NodeId research_id);
std::vector<ContextItem> contexts_of(const ResearchTree& tree, NodeId research_id);

}  // namespace flowtree
