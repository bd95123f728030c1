// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "flowtree/config.hpp"
#include "flowtree/scenario.hpp"
#include "flowtree/tree.hpp"

namespace flowtree {

// ---------------------------------------------------------------------------
// Decision types

struct BreadthDecision {
  int breadth = 1;
  std::vector<std::string> subqueries;
  double utility_estimate = 0.0;  // reported expected information gain, [0,1]
};

struct DepthDecision {
  bool go_deeper = false;
  double marginal_gain = 0.0;  // estimated utility of one more level, signed
};

/// delta == 0 (terminate) exactly when phi >= phi_min and psi >= psi_min.
struct OrchestrationVerdict {
  int delta = 1;
  double phi = 0.0;
  double psi = 0.0;
};

// ---------------------------------------------------------------------------
// Backends

/// Raw decision source behind the three policies. Backends may fail
/// (nullopt); the top-level operations below always map failure to a
/// defined fallback so callers are never left undecided.
///
/// Backends must tolerate concurrent in-flight calls. Scripted backends
/// are pure lookups; blocking backends are offloaded by the caller.
class PolicyBackend {
 public:
  virtual ~PolicyBackend() = default;

  /// True when calls may block (network); the orchestrator offloads them.
  virtual bool blocking() const = 0;

  virtual std::optional<BreadthDecision> plan_breadth(const std::string& query,
                                                      const std::vector<Finding>& accumulated,
                                                      const TreeConfig& config) = 0;

  virtual std::optional<double> depth_gain(const std::string& query,
                                           const std::vector<Finding>& local_findings,
                                           int depth, const TreeConfig& config) = 0;

  virtual std::optional<std::pair<double, double>> progress_scores(
      const std::string& query, const std::vector<ContextItem>& contexts,
      const std::vector<Finding>& findings, const TreeConfig& config) = 0;
};

/// Scenario-driven backend: deterministic, pure, never fails.
class ScriptedPolicy final : public PolicyBackend {
 public:
  explicit ScriptedPolicy(Scenario scenario) : scenario_(std::move(scenario)) {}

  bool blocking() const override { return false; }

  std::optional<BreadthDecision> plan_breadth(const std::string& query,
                                              const std::vector<Finding>& accumulated,
                                              const TreeConfig& config) override;
  std::optional<double> depth_gain(const std::string& query,
                                   const std::vector<Finding>& local_findings, int depth,
                                   const TreeConfig& config) override;
  std::optional<std::pair<double, double>> progress_scores(
      const std::string& query, const std::vector<ContextItem>& contexts,
      const std::vector<Finding>& findings, const TreeConfig& config) override;

  const Scenario& scenario() const { return scenario_; }

 private:
  Scenario scenario_;
};

// ---------------------------------------------------------------------------
// Policy operations (bounds, thresholds, and fallbacks live here)

/// Chooses the exploration breadth and subqueries for one planner.
/// Result always satisfies 1 <= breadth <= max_breadth + flex_breadth;
/// over-long lists keep their first entries, near-duplicate subqueries
/// (case/whitespace-normalized) collapse. Backend failure falls back to
/// the identity decomposition (1, [query]).
BreadthDecision plan_breadth(const std::string& query, const std::vector<Finding>& accumulated,
                             const TreeConfig& config, PolicyBackend& backend);

/// Decides whether to deepen a research path. Never deepens at
/// depth >= max_depth regardless of the backend; otherwise
/// go_deeper == (marginal_gain > tau). Backend failure means stop.
DepthDecision decide_depth(const std::string& query, const std::vector<Finding>& local_findings,
                           int depth, const TreeConfig& config, PolicyBackend& backend);

/// Computes the (delta, phi, psi) verdict for a monitored node. Scores
/// clamp into [0,1]; delta follows the threshold rule exactly. Backend
/// failure means continue (delta = 1, zero scores).
OrchestrationVerdict evaluate_progress(const std::string& query,
                                       const std::vector<ContextItem>& contexts,
                                       const std::vector<Finding>& findings,
                                       const TreeConfig& config, PolicyBackend& backend);

// ---------------------------------------------------------------------------
// Structured-output parsing for LLM backends

struct ParsedBreadth {
  std::vector<std::string> subqueries;
  std::optional<double> utility;
};

/// Extracts the first balanced JSON object embedded in `raw` (models
/// often wrap answers in prose or code fences).
std::optional<std::string> extract_json_object(const std::string& raw);

std::optional<ParsedBreadth> parse_breadth_response(const std::string& raw);
std::optional<double> parse_depth_response(const std::string& raw);       // clamped to [-1, 1]
std::optional<std::pair<double, double>> parse_verdict_response(const std::string& raw);

/// Case-folds, trims, and collapses internal whitespace; the engine's
/// notion of near-duplicate subqueries is exact match on this form.
std::string normalize_query(const std::string& q);

double clamp01(double v);

}  // namespace flowtree
