// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "flowtree/time.hpp"
#include "flowtree/tree.hpp"

namespace flowtree {

/// The final response assembled from everything the tree gathered.
struct Report {
  std::string query;
  std::string body;                    // Markdown
  std::vector<ContextItem> sources;    // ordered by (source, id)
  std::vector<Finding> findings_used;  // ordered by (depth, origin, id)
  TimePoint generated_at{0};
  bool truncated_by_budget = false;
};

/// Free-text composition backend (LLM). May fail; synthesis then falls
/// back to the deterministic template, so synthesize() itself is total.
class SynthesisBackend {
 public:
  virtual ~SynthesisBackend() = default;
  virtual std::optional<std::string> compose(const std::string& query,
                                             const std::vector<ContextItem>& contexts,
                                             const std::vector<Finding>& findings) = 0;
};

/// Builds the report from the aggregated unions. The template path is a
/// pure function of its input sets: findings grouped by origin depth,
/// sections ordered by (depth, origin node, id), every cited source id
/// present in the input contexts. Empty inputs produce a minimal report.
Report synthesize(const std::string& query, std::vector<ContextItem> contexts,
                  std::vector<Finding> findings, bool truncated_by_budget,
                  TimePoint generated_at, SynthesisBackend* llm = nullptr);

/// Machine-readable sidecar: query, flags, sources and findings lists.
nlohmann::json report_sidecar(const Report& report);

}  // namespace flowtree
