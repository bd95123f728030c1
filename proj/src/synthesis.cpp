// SPDX-License-Identifier: Apache-2.0
#include "flowtree/synthesis.hpp"

#include <algorithm>
#include <sstream>

#include <nlohmann/json.hpp>

namespace flowtree {

namespace {

void sort_inputs(std::vector<ContextItem>& contexts, std::vector<Finding>& findings) {
  std::sort(contexts.begin(), contexts.end(), [](const ContextItem& a, const ContextItem& b) {
    return std::tie(a.source, a.id) < std::tie(b.source, b.id);
  });
  std::sort(findings.begin(), findings.end(), [](const Finding& a, const Finding& b) {
    return std::tie(a.depth, a.origin_node, a.id) < std::tie(b.depth, b.origin_node, b.id);
  });
}

std::string short_id(ContentHash h) { return to_hex(h).substr(0, 8); }

std::string template_body(const std::string& query, const std::vector<ContextItem>& contexts,
                          const std::vector<Finding>& findings, bool truncated) {
  std::ostringstream out;
  out << "# Research Report: " << query << "\n\n";
  if (truncated) {
    out << "_The time budget was reached before research completed; this report "
           "covers everything gathered up to the cutoff._\n\n";
  }
  if (findings.empty() && contexts.empty()) {
    out << "No findings were gathered for this query.\n";
    return out.str();
  }
  out << findings.size() << " finding" << (findings.size() == 1 ? "" : "s") << " across "
      << contexts.size() << " source" << (contexts.size() == 1 ? "" : "s") << ".\n";

  int current_depth = -1;
  for (const auto& f : findings) {
    if (f.depth != current_depth) {
      current_depth = f.depth;
      out << "\n## Depth " << current_depth << "\n\n";
    }
    out << "- [" << to_string(f.origin_node) << "] " << f.body << "\n";
  }
  if (!contexts.empty()) {
    out << "\n## Sources\n\n";
    for (const auto& c : contexts) {
      out << "- [" << short_id(c.id) << "] " << c.source << "\n";
    }
  }
  return out.str();
}

std::string source_appendix(const std::vector<ContextItem>& contexts) {
  std::ostringstream out;
  out << "\n\n## Sources\n\n";
  for (const auto& c : contexts) {
    out << "- [" << short_id(c.id) << "] " << c.source << "\n";
  }
  return out.str();
}

}  // namespace

Report synthesize(const std::string& query, std::vector<ContextItem> contexts,
                  std::vector<Finding> findings, bool truncated_by_budget,
                  TimePoint generated_at, SynthesisBackend* llm) {
  sort_inputs(contexts, findings);
  Report report;
  report.query = query;
  report.generated_at = generated_at;
  report.truncated_by_budget = truncated_by_budget;

  if (llm) {
    std::optional<std::string> composed;
    try {
      composed = llm->compose(query, contexts, findings);
    } catch (...) {
      composed.reset();
    }
    if (composed) {
      report.body = *composed;
      if (!contexts.empty()) report.body += source_appendix(contexts);
      report.sources = std::move(contexts);
      report.findings_used = std::move(findings);
      return report;
    }
  }

  report.body = template_body(query, contexts, findings, truncated_by_budget);
  report.sources = std::move(contexts);
  report.findings_used = std::move(findings);
  return report;
}

nlohmann::json report_sidecar(const Report& report) {
  nlohmann::json doc;
  doc["schema"] = 1;
  doc["query"] = report.query;
  doc["generated_at_ms"] = report.generated_at.count();
  doc["truncated_by_budget"] = report.truncated_by_budget;
  nlohmann::json sources = nlohmann::json::array();
  for (const auto& c : report.sources) {
    sources.push_back({{"id", to_hex(c.id)},
                       {"source", c.source},
                       {"retrieved_at_ms", c.retrieved_at.count()}});
  }
  doc["sources"] = std::move(sources);
  nlohmann::json findings = nlohmann::json::array();
  for (const auto& f : report.findings_used) {
    findings.push_back({{"id", to_hex(f.id)},
                        {"origin_node", f.origin_node.value},
                        {"depth", f.depth},
                        {"body", f.body}});
  }
  doc["findings"] = std::move(findings);
  doc["n_sources"] = report.sources.size();
  doc["n_findings"] = report.findings_used.size();
  return doc;
}

}  // namespace flowtree
