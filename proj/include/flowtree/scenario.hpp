// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "flowtree/time.hpp"

namespace flowtree {

/// Simulated executor behaviour for one query.
struct SimExecEntry {
  Duration latency{0};
  int yield_contexts = 0;
  int yield_findings = 0;
  bool fail = false;
};

/// One rung of a verdict ladder: applies once the monitored node has
/// accumulated at least `min_findings` findings.
struct VerdictBucket {
  int min_findings = 0;
  double phi = 0.0;
  double psi = 0.0;
};

struct BreadthEntry {
  std::vector<std::string> subqueries;
  double utility = 0.5;
};

/// Deterministic stand-in for the three LLM policies plus the research
/// executor. A scenario is a pure lookup table: identical keys always
/// yield identical outputs. Unmatched keys fall through to per-map
/// `default` entries; "{query}" in scripted subqueries expands to the
/// query being planned.
///
/// Document layout (schema 1):
///
///   {
///     "schema": 1,
///     "root_query": "optional convenience for the CLI",
///     "breadth_script": {
///       "some query": ["sub a", "sub b"],
///       "other query": {"subqueries": ["sub c"], "utility": 0.7},
///       "default": ["{query}"]
///     },
///     "depth_script": {
///       "some query": {"1": 0.3, "default": 0.05},
///       "default": 0.0
///     },
///     "verdict_script": {
///       "some query": [{"min_findings": 0, "phi": 0.2, "psi": 0.2},
///                      {"min_findings": 4, "phi": 0.9, "psi": 0.9}],
///       "default": [{"min_findings": 0, "phi": 0.0, "psi": 0.0}]
///     },
///     "executor_script": {
///       "some query": {"latency_ms": 2000, "contexts": 3, "findings": 2},
///       "default": {"latency_ms": 1000, "contexts": 1, "findings": 1, "fail": false}
///     }
///   }
class Scenario {
 public:
  Scenario() = default;

  static Scenario from_json(const nlohmann::json& doc);
  static Scenario from_file(const std::filesystem::path& path);
  nlohmann::json to_json() const;

  const std::optional<std::string>& root_query() const { return root_query_; }

  /// Scripted subqueries for a planner, or the default entry.
  BreadthEntry breadth_for(const std::string& query) const;

  /// Scripted marginal utility of deepening past `depth` for this query.
  double depth_gain(const std::string& query, int depth) const;

  /// Scripted (phi, psi) for a monitored node with `findings_count`
  /// accumulated findings.
  std::pair<double, double> verdict_for(const std::string& query, int findings_count) const;

  SimExecEntry exec_for(const std::string& query) const;

  // Builder API, used by tests and fixture generators.
  void set_root_query(std::string q) { root_query_ = std::move(q); }
  void set_breadth(const std::string& key, BreadthEntry entry);
  void set_depth_gain(const std::string& key, int depth, double gain);
  void set_depth_default(const std::string& key, double gain);
  void set_verdicts(const std::string& key, std::vector<VerdictBucket> ladder);
  void set_exec(const std::string& key, SimExecEntry entry);

 private:
  struct DepthEntry {
    std::map<int, double> by_depth;
    std::optional<double> fallback;
  };

  std::optional<std::string> root_query_;
  std::map<std::string, BreadthEntry> breadth_;
  std::map<std::string, DepthEntry> depth_;
  std::map<std::string, std::vector<VerdictBucket>> verdicts_;
  std::map<std::string, SimExecEntry> exec_;

  std::optional<BreadthEntry> breadth_default_;
  std::optional<DepthEntry> depth_default_;
  std::optional<std::vector<VerdictBucket>> verdict_default_;
  std::optional<SimExecEntry> exec_default_;
};

}  // namespace flowtree
