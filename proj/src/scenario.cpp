// SPDX-License-Identifier: Apache-2.0
#include "flowtree/scenario.hpp"

#include <algorithm>
#include <fstream>

#include <nlohmann/json.hpp>

#include "flowtree/errors.hpp"

namespace flowtree {

namespace {

constexpr const char* kDefaultKey = "default";

std::string expand_query(const std::string& templ, const std::string& query) {
  std::string out = templ;
  const std::string placeholder = "{query}";
  std::size_t pos = 0;
  while ((pos = out.find(placeholder, pos)) != std::string::npos) {
    out.replace(pos, placeholder.size(), query);
    pos += query.size();
  }
  return out;
}

BreadthEntry parse_breadth_entry(const nlohmann::json& v) {
  BreadthEntry entry;
  if (v.is_array()) {
    for (const auto& s : v) entry.subqueries.push_back(s.get<std::string>());
  } else if (v.is_object()) {
    for (const auto& s : v.at("subqueries")) entry.subqueries.push_back(s.get<std::string>());
    if (v.contains("utility")) entry.utility = v.at("utility").get<double>();
  } else {
    throw ParseError("breadth_script entries must be a list or an object");
  }
  if (entry.subqueries.empty()) throw ParseError("breadth_script entry has no subqueries");
  return entry;
}

SimExecEntry parse_exec_entry(const nlohmann::json& v) {
  SimExecEntry entry;
  entry.latency = ms(v.value("latency_ms", std::int64_t{0}));
  entry.yield_contexts = v.value("contexts", 0);
  entry.yield_findings = v.value("findings", 0);
  entry.fail = v.value("fail", false);
  if (entry.latency < Duration::zero() || entry.yield_contexts < 0 || entry.yield_findings < 0) {
    throw ParseError("executor_script entry has negative latency or counts");
  }
  return entry;
}

std::vector<VerdictBucket> parse_verdict_ladder(const nlohmann::json& v) {
  std::vector<VerdictBucket> ladder;
  for (const auto& b : v) {
    VerdictBucket bucket;
    bucket.min_findings = b.value("min_findings", 0);
    bucket.phi = b.at("phi").get<double>();
    bucket.psi = b.at("psi").get<double>();
    ladder.push_back(bucket);
  }
  std::sort(ladder.begin(), ladder.end(),
            [](const auto& a, const auto& b) { return a.min_findings < b.min_findings; });
  return ladder;
}

}  // namespace

Scenario Scenario::from_json(const nlohmann::json& doc) {
  if (!doc.is_object()) throw ParseError("scenario document must be a JSON object");
  if (doc.value("schema", 0) != 1) throw ParseError("scenario schema must be 1");
  Scenario s;
  if (doc.contains("root_query")) s.root_query_ = doc.at("root_query").get<std::string>();
  if (doc.contains("breadth_script")) {
    for (const auto& [key, v] : doc.at("breadth_script").items()) {
      auto entry = parse_breadth_entry(v);
      if (key == kDefaultKey) {
        s.breadth_default_ = std::move(entry);
      } else {
        s.breadth_.emplace(key, std::move(entry));
      }
    }
  }
  if (doc.contains("depth_script")) {
    for (const auto& [key, v] : doc.at("depth_script").items()) {
      if (v.is_number()) {
        if (key == kDefaultKey) {
          s.depth_default_ = DepthEntry{{}, v.get<double>()};
        } else {
          s.depth_[key].fallback = v.get<double>();
        }
        continue;
      }
      DepthEntry entry;
      for (const auto& [dkey, gain] : v.items()) {
        if (dkey == kDefaultKey) {
          entry.fallback = gain.get<double>();
        } else {
          entry.by_depth[std::stoi(dkey)] = gain.get<double>();
        }
      }
      if (key == kDefaultKey) {
        s.depth_default_ = std::move(entry);
      } else {
        s.depth_[key] = std::move(entry);
      }
    }
  }
  if (doc.contains("verdict_script")) {
    for (const auto& [key, v] : doc.at("verdict_script").items()) {
      auto ladder = parse_verdict_ladder(v);
      if (key == kDefaultKey) {
        s.verdict_default_ = std::move(ladder);
      } else {
        s.verdicts_.emplace(key, std::move(ladder));
      }
    }
  }
  if (doc.contains("executor_script")) {
    for (const auto& [key, v] : doc.at("executor_script").items()) {
      auto entry = parse_exec_entry(v);
      if (key == kDefaultKey) {
        s.exec_default_ = entry;
      } else {
        s.exec_.emplace(key, entry);
      }
    }
  }
  return s;
}

Scenario Scenario::from_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw NotFoundError("cannot open scenario file " + path.string());
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError("scenario " + path.string() + ": " + e.what());
  }
  return from_json(doc);
}

nlohmann::json Scenario::to_json() const {
  nlohmann::json doc;
  doc["schema"] = 1;
  if (root_query_) doc["root_query"] = *root_query_;
  auto breadth_json = [](const BreadthEntry& e) {
    return nlohmann::json{{"subqueries", e.subqueries}, {"utility", e.utility}};
  };
  nlohmann::json breadth = nlohmann::json::object();
  for (const auto& [k, v] : breadth_) breadth[k] = breadth_json(v);
  if (breadth_default_) breadth[kDefaultKey] = breadth_json(*breadth_default_);
  doc["breadth_script"] = std::move(breadth);

  auto depth_json = [](const DepthEntry& e) {
    nlohmann::json out = nlohmann::json::object();
    for (const auto& [d, g] : e.by_depth) out[std::to_string(d)] = g;
    if (e.fallback) out[kDefaultKey] = *e.fallback;
    return out;
  };
  nlohmann::json depth = nlohmann::json::object();
  for (const auto& [k, v] : depth_) depth[k] = depth_json(v);
  if (depth_default_) depth[kDefaultKey] = depth_json(*depth_default_);
  doc["depth_script"] = std::move(depth);

  auto ladder_json = [](const std::vector<VerdictBucket>& ladder) {
    nlohmann::json out = nlohmann::json::array();
    for (const auto& b : ladder) {
      out.push_back({{"min_findings", b.min_findings}, {"phi", b.phi}, {"psi", b.psi}});
    }
    return out;
  };
  nlohmann::json verdicts = nlohmann::json::object();
  for (const auto& [k, v] : verdicts_) verdicts[k] = ladder_json(v);
  if (verdict_default_) verdicts[kDefaultKey] = ladder_json(*verdict_default_);
  doc["verdict_script"] = std::move(verdicts);

  auto exec_json = [](const SimExecEntry& e) {
    return nlohmann::json{{"latency_ms", e.latency.count()},
                          {"contexts", e.yield_contexts},
                          {"findings", e.yield_findings},
                          {"fail", e.fail}};
  };
  nlohmann::json exec = nlohmann::json::object();
  for (const auto& [k, v] : exec_) exec[k] = exec_json(v);
  if (exec_default_) exec[kDefaultKey] = exec_json(*exec_default_);
  doc["executor_script"] = std::move(exec);
  return doc;
}

BreadthEntry Scenario::breadth_for(const std::string& query) const {
  const BreadthEntry* entry = nullptr;
  if (auto it = breadth_.find(query); it != breadth_.end()) {
    entry = &it->second;
  } else if (breadth_default_) {
    entry = &*breadth_default_;
  } else {
    return BreadthEntry{{query}, 0.5};  // identity decomposition
  }
  BreadthEntry out;
  out.utility = entry->utility;
  out.subqueries.reserve(entry->subqueries.size());
  for (const auto& s : entry->subqueries) out.subqueries.push_back(expand_query(s, query));
  return out;
}

double Scenario::depth_gain(const std::string& query, int depth) const {
  auto lookup = [&](const DepthEntry& e) -> std::optional<double> {
    if (auto it = e.by_depth.find(depth); it != e.by_depth.end()) return it->second;
    return e.fallback;
  };
  if (auto it = depth_.find(query); it != depth_.end()) {
    if (auto g = lookup(it->second)) return *g;
  }
  if (depth_default_) {
    if (auto g = lookup(*depth_default_)) return *g;
  }
  return 0.0;
}

std::pair<double, double> Scenario::verdict_for(const std::string& query,
                                                int findings_count) const {
  const std::vector<VerdictBucket>* ladder = nullptr;
  if (auto it = verdicts_.find(query); it != verdicts_.end()) {
    ladder = &it->second;
  } else if (verdict_default_) {
    ladder = &*verdict_default_;
  } else {
    return {0.0, 0.0};
  }
  std::pair<double, double> out{0.0, 0.0};
  for (const auto& bucket : *ladder) {
    if (findings_count >= bucket.min_findings) out = {bucket.phi, bucket.psi};
  }
  return out;
}

SimExecEntry Scenario::exec_for(const std::string& query) const {
  if (auto it = exec_.find(query); it != exec_.end()) return it->second;
  if (exec_default_) return *exec_default_;
  return SimExecEntry{seconds(1), 1, 1, false};
}

void Scenario::set_breadth(const std::string& key, BreadthEntry entry) {
  if (key == kDefaultKey) {
    breadth_default_ = std::move(entry);
  } else {
    breadth_[key] = std::move(entry);
  }
}

void Scenario::set_depth_gain(const std::string& key, int depth, double gain) {
  if (key == kDefaultKey) {
    if (!depth_default_) depth_default_.emplace();
    depth_default_->by_depth[depth] = gain;
  } else {
    depth_[key].by_depth[depth] = gain;
  }
}

void Scenario::set_depth_default(const std::string& key, double gain) {
  if (key == kDefaultKey) {
    if (!depth_default_) depth_default_.emplace();
    depth_default_->fallback = gain;
  } else {
    depth_[key].fallback = gain;
  }
}

void Scenario::set_verdicts(const std::string& key, std::vector<VerdictBucket> ladder) {
  std::sort(ladder.begin(), ladder.end(),
            [](const auto& a, const auto& b) { return a.min_findings < b.min_findings; });
  if (key == kDefaultKey) {
    verdict_default_ = std::move(ladder);
  } else {
    verdicts_[key] = std::move(ladder);
  }
}

void Scenario::set_exec(const std::string& key, SimExecEntry entry) {
  if (key == kDefaultKey) {
    exec_default_ = entry;
  } else {
    exec_[key] = entry;
  }
}

}  // namespace flowtree
