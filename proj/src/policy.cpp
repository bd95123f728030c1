// SPDX-License-Identifier: Apache-2.0
#include "flowtree/policy.hpp"

#include <algorithm>
#include <cctype>
#include <set>

#include <nlohmann/json.hpp>

namespace flowtree {

double clamp01(double v) { return std::min(1.0, std::max(0.0, v)); }

std::string normalize_query(const std::string& q) {
  std::string out;
  out.reserve(q.size());
  bool in_space = true;  // leading whitespace drops
  for (unsigned char c : q) {
    if (std::isspace(c)) {
      in_space = true;
      continue;
    }
    if (in_space && !out.empty()) out.push_back(' ');
    in_space = false;
    out.push_back(static_cast<char>(std::tolower(c)));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Scripted backend

std::optional<BreadthDecision> ScriptedPolicy::plan_breadth(const std::string& query,
                                                            const std::vector<Finding>&,
                                                            const TreeConfig&) {
  auto entry = scenario_.breadth_for(query);
  BreadthDecision d;
  d.subqueries = std::move(entry.subqueries);
  d.breadth = static_cast<int>(d.subqueries.size());
  d.utility_estimate = clamp01(entry.utility);
  return d;
}

std::optional<double> ScriptedPolicy::depth_gain(const std::string& query,
                                                 const std::vector<Finding>&, int depth,
                                                 const TreeConfig&) {
  return scenario_.depth_gain(query, depth);
}

std::optional<std::pair<double, double>> ScriptedPolicy::progress_scores(
    const std::string& query, const std::vector<ContextItem>&,
    const std::vector<Finding>& findings, const TreeConfig&) {
  return scenario_.verdict_for(query, static_cast<int>(findings.size()));
}

// ---------------------------------------------------------------------------
// Policy operations

BreadthDecision plan_breadth(const std::string& query, const std::vector<Finding>& accumulated,
                             const TreeConfig& config, PolicyBackend& backend) {
  if (query.empty()) throw ConfigError("plan_breadth requires a nonempty query");
  BreadthDecision fallback{1, {query}, 0.0};
  std::optional<BreadthDecision> raw;
  try {
    raw = backend.plan_breadth(query, accumulated, config);
  } catch (const Error&) {
    raw.reset();
  }
  if (!raw) return fallback;

  // Drop near-duplicates (normalized exact match), keep first occurrences,
  // then truncate to the breadth cap.
  BreadthDecision d;
  d.utility_estimate = clamp01(raw->utility_estimate);
  std::set<std::string> seen;
  for (auto& sq : raw->subqueries) {
    if (sq.empty()) continue;
    auto norm = normalize_query(sq);
    if (norm.empty() || !seen.insert(norm).second) continue;
    d.subqueries.push_back(std::move(sq));
    if (static_cast<int>(d.subqueries.size()) == config.max_total_breadth()) break;
  }
  if (d.subqueries.empty()) return fallback;
  d.breadth = static_cast<int>(d.subqueries.size());
  return d;
}

DepthDecision decide_depth(const std::string& query, const std::vector<Finding>& local_findings,
                           int depth, const TreeConfig& config, PolicyBackend& backend) {
  if (depth < 1) throw ConfigError("decide_depth requires depth >= 1");
  std::optional<double> gain;
  try {
    gain = backend.depth_gain(query, local_findings, depth, config);
  } catch (const Error&) {
    gain.reset();
  }
  DepthDecision d;
  if (!gain) {
    d.marginal_gain = 0.0;
    d.go_deeper = false;  // fallback: stop deepening
    return d;
  }
  d.marginal_gain = std::min(1.0, std::max(-1.0, *gain));
  d.go_deeper = depth < config.max_depth && d.marginal_gain > config.tau;
  return d;
}

OrchestrationVerdict evaluate_progress(const std::string& query,
                                       const std::vector<ContextItem>& contexts,
                                       const std::vector<Finding>& findings,
                                       const TreeConfig& config, PolicyBackend& backend) {
  std::optional<std::pair<double, double>> scores;
  try {
    scores = backend.progress_scores(query, contexts, findings, config);
  } catch (const Error&) {
    scores.reset();
  }
  OrchestrationVerdict v;
  if (!scores) {
    v.delta = 1;  // fallback: keep researching
    return v;
  }
  v.phi = clamp01(scores->first);
  v.psi = clamp01(scores->second);
  v.delta = (v.phi >= config.phi_min && v.psi >= config.psi_min) ? 0 : 1;
  return v;
}

// ---------------------------------------------------------------------------
// Response parsing

std::optional<std::string> extract_json_object(const std::string& raw) {
  auto start = raw.find('{');
  while (start != std::string::npos) {
    int depth = 0;
    bool in_string = false;
    bool escaped = false;
    for (std::size_t i = start; i < raw.size(); ++i) {
      char c = raw[i];
      if (in_string) {
        if (escaped) {
          escaped = false;
        } else if (c == '\\') {
          escaped = true;
        } else if (c == '"') {
          in_string = false;
        }
        continue;
      }
      if (c == '"') {
        in_string = true;
      } else if (c == '{') {
        ++depth;
      } else if (c == '}') {
        if (--depth == 0) return raw.substr(start, i - start + 1);
      }
    }
    start = raw.find('{', start + 1);
  }
  return std::nullopt;
}

namespace {

std::optional<nlohmann::json> parse_embedded_object(const std::string& raw) {
  auto text = extract_json_object(raw);
  if (!text) return std::nullopt;
  auto doc = nlohmann::json::parse(*text, nullptr, false);
  if (doc.is_discarded() || !doc.is_object()) return std::nullopt;
  return doc;
}

}  // namespace

std::optional<ParsedBreadth> parse_breadth_response(const std::string& raw) {
  auto doc = parse_embedded_object(raw);
  if (!doc || !doc->contains("subqueries") || !(*doc)["subqueries"].is_array()) {
    return std::nullopt;
  }
  ParsedBreadth out;
  for (const auto& s : (*doc)["subqueries"]) {
    if (s.is_string()) out.subqueries.push_back(s.get<std::string>());
  }
  if (out.subqueries.empty()) return std::nullopt;
  if (doc->contains("utility") && (*doc)["utility"].is_number()) {
    out.utility = clamp01((*doc)["utility"].get<double>());
  }
  return out;
}

std::optional<double> parse_depth_response(const std::string& raw) {
  auto doc = parse_embedded_object(raw);
  if (!doc || !doc->contains("marginal_gain") || !(*doc)["marginal_gain"].is_number()) {
    return std::nullopt;
  }
  double g = (*doc)["marginal_gain"].get<double>();
  return std::min(1.0, std::max(-1.0, g));
}

std::optional<std::pair<double, double>> parse_verdict_response(const std::string& raw) {
  auto doc = parse_embedded_object(raw);
  if (!doc || !doc->contains("phi") || !doc->contains("psi") || !(*doc)["phi"].is_number() ||
      !(*doc)["psi"].is_number()) {
    return std::nullopt;
  }
  return std::make_pair(clamp01((*doc)["phi"].get<double>()),
                        clamp01((*doc)["psi"].get<double>()));
}

}  // namespace flowtree
