// SPDX-License-Identifier: Apache-2.0
#include "flowtree/clients.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "flowtree/errors.hpp"
#include "flowtree/prompts.hpp"

namespace flowtree {

namespace {

std::string url_encode(const std::string& s) {
  static const char* hex = "0123456789ABCDEF";
  std::string out;
  out.reserve(s.size());
  for (unsigned char c : s) {
    if (std::isalnum(c) || c == '-' || c == '_' || c == '.' || c == '~') {
      out.push_back(static_cast<char>(c));
    } else {
      out.push_back('%');
      out.push_back(hex[c >> 4]);
      out.push_back(hex[c & 0xf]);
    }
  }
  return out;
}

std::string replace_all(std::string text, const std::string& needle, const std::string& value) {
  std::size_t pos = 0;
  while ((pos = text.find(needle, pos)) != std::string::npos) {
    text.replace(pos, needle.size(), value);
    pos += value.size();
  }
  return text;
}

std::string join_learnings(const std::vector<Finding>& findings, std::size_t cap = 40) {
  if (findings.empty()) return "(none yet)";
  std::ostringstream out;
  std::size_t n = std::min(cap, findings.size());
  for (std::size_t i = 0; i < n; ++i) {
    out << "- " << findings[i].body << "\n";
  }
  if (findings.size() > n) out << "- (" << findings.size() - n << " more omitted)\n";
  return out.str();
}

}  // namespace

// ---------------------------------------------------------------------------
// SearchClient

SearchClient::SearchClient(std::unique_ptr<HttpTransport> transport, RetryPolicy retry)
    : transport_(std::move(transport)), retry_(retry) {}

std::vector<SearchHit> SearchClient::search(const SearchQuery& q) {
  if (q.text.empty()) throw ConfigError("search query must be nonempty");
  if (q.max_results < 1) throw ConfigError("max_results must be >= 1");
  HttpRequest req;
  req.method = "GET";
  req.path = "/search?q=" + url_encode(q.text) + "&count=" + std::to_string(q.max_results);
  HttpResponse resp = with_retries(*transport_, req, retry_);
  if (!resp.ok()) throw TransportError("search returned status " + std::to_string(resp.status));

  auto doc = nlohmann::json::parse(resp.body, nullptr, false);
  if (doc.is_discarded()) throw ParseError("search response is not JSON");
  const nlohmann::json* results = nullptr;
  if (doc.is_array()) {
    results = &doc;
  } else if (doc.is_object() && doc.contains("results")) {
    results = &doc["results"];
  } else {
    throw ParseError("search response has no results list");
  }

  std::vector<SearchHit> hits;
  std::set<std::string> seen;
  for (const auto& r : *results) {
    SearchHit hit;
    hit.url = r.value("url", "");
    if (hit.url.empty() || !seen.insert(hit.url).second) continue;
    hit.title = r.value("title", "");
    hit.snippet = r.value("snippet", "");
    hits.push_back(std::move(hit));
    if (static_cast<int>(hits.size()) == q.max_results) break;
  }
  return hits;
}

std::vector<SearchHit> web_search(const SearchQuery& q, SearchClient& client) {
  return client.search(q);
}

// ---------------------------------------------------------------------------
// LlmClient

LlmClient::LlmClient(std::unique_ptr<HttpTransport> transport, std::string model,
                     int max_in_flight, RetryPolicy retry)
    : transport_(std::move(transport)),
      model_(std::move(model)),
      retry_(retry),
      max_in_flight_(std::max(1, max_in_flight)) {}

std::optional<std::string> LlmClient::complete(const std::string& system_prompt,
                                               const std::string& user_prompt) {
  {
    std::unique_lock lk(mu_);
    cv_.wait(lk, [this] { return in_flight_ < max_in_flight_; });
    ++in_flight_;
  }
  std::optional<std::string> out;
  try {
    nlohmann::json body;
    body["model"] = model_;
    body["messages"] = nlohmann::json::array(
        {{{"role", "system"}, {"content", system_prompt}},
         {{"role", "user"}, {"content", user_prompt}}});
    HttpRequest req;
    req.method = "POST";
    req.path = "/v1/chat/completions";
    req.body = body.dump();
    HttpResponse resp = with_retries(*transport_, req, retry_);
    if (resp.ok()) {
      auto doc = nlohmann::json::parse(resp.body, nullptr, false);
      if (!doc.is_discarded() && doc.contains("choices") && !doc["choices"].empty()) {
        const auto& msg = doc["choices"][0];
        if (msg.contains("message") && msg["message"].contains("content") &&
            msg["message"]["content"].is_string()) {
          out = msg["message"]["content"].get<std::string>();
        }
      }
    }
  } catch (...) {
    out.reset();
  }
  {
    std::lock_guard lk(mu_);
    --in_flight_;
  }
  cv_.notify_one();
  return out;
}

// ---------------------------------------------------------------------------
// Summarization

std::vector<Finding> summarize_findings(const std::string& query,
                                        const std::vector<SearchHit>& hits, LlmClient& llm,
                                        NodeRef node, int max_findings) {
  if (hits.empty()) throw ConfigError("summarize_findings requires at least one hit");
  std::ostringstream user;
  user << "Research question: " << query << "\n\nSearch results:\n";
  for (const auto& h : hits) {
    user << "- " << h.url << " | " << h.title << " | " << h.snippet << "\n";
  }
  user << "\nExtract up to " << max_findings
       << " key findings. Respond with JSON: {\"findings\": [{\"body\": \"...\", "
          "\"source\": \"<url from the results>\"}]}";
  auto raw = llm.complete(
      "You are a research assistant distilling search results into precise, source-grounded "
      "findings. Cite one of the provided URLs for every finding.",
      user.str());
  std::vector<Finding> out;
  if (!raw) return out;
  auto text = extract_json_object(*raw);
  if (!text) return out;
  auto doc = nlohmann::json::parse(*text, nullptr, false);
  if (doc.is_discarded() || !doc.contains("findings") || !doc["findings"].is_array()) return out;

  std::set<std::string> urls;
  for (const auto& h : hits) urls.insert(h.url);
  for (const auto& f : doc["findings"]) {
    if (!f.is_object() || !f.contains("body")) continue;
    std::string body = f.value("body", "");
    std::string source = f.value("source", "");
    if (body.empty()) continue;
    if (urls.count(source) == 0) {
      // find any cited hit URL inside the body before giving up
      auto cited = std::find_if(hits.begin(), hits.end(), [&](const SearchHit& h) {
        return body.find(h.url) != std::string::npos;
      });
      if (cited == hits.end()) continue;
      source = cited->url;
    }
    if (body.find(source) == std::string::npos) body += " (src: " + source + ")";
    out.push_back(Finding::make(node.id, node.depth, std::move(body)));
    if (static_cast<int>(out.size()) == max_findings) break;
  }
  return out;
}

// ---------------------------------------------------------------------------
// WebExecutor

WebExecutor::WebExecutor(Runtime& rt, SearchClient& search, LlmClient& llm, int max_results,
                         int max_findings)
    : rt_(rt), search_(search), llm_(llm), max_results_(max_results),
      max_findings_(max_findings) {}

void WebExecutor::execute(const std::string& query, NodeRef node, CancelToken cancel,
                          std::function<void(ExecutionOutcome)> done) {
  auto outcome = std::make_shared<ExecutionOutcome>();
  TimePoint started = rt_.now();
  // The work closure outlives this executor when a run is cut off with a
  // request in flight, so it holds only the clients (owned above the
  // runtime) and values.
  rt_.offload(
      [&search = search_, &llm = llm_, &rt = rt_, max_results = max_results_,
       max_findings = max_findings_, query, node, cancel, outcome] {
        try {
          if (cancel.cancelled()) {
            outcome->interrupted = true;
            return;
          }
          auto hits = search.search({query, max_results});
          for (const auto& hit : hits) {
            outcome->contexts.push_back(
                ContextItem::make(hit.url, hit.title + "\n" + hit.snippet, rt.now()));
          }
          if (cancel.cancelled()) {  // yield point between retrieval and reasoning
            outcome->interrupted = true;
            return;
          }
          if (!hits.empty()) {
            outcome->findings = summarize_findings(query, hits, llm, node, max_findings);
          }
          if (cancel.cancelled()) outcome->interrupted = true;
        } catch (const Error& e) {
          outcome->failed = true;
          outcome->error = e.what();
        }
      },
      [outcome, done = std::move(done), started, &rt = rt_] {
        outcome->elapsed = rt.now() - started;
        done(std::move(*outcome));
      });
}

// ---------------------------------------------------------------------------
// LlmPolicy

LlmPolicy::LlmPolicy(LlmClient& client)
    : client_(client),
      breadth_template_(prompts::kBreadthPlanner),
      verdict_template_(prompts::kProgressEvaluator) {}

void LlmPolicy::load_templates(const std::filesystem::path& dir) {
  auto read = [](const std::filesystem::path& p) -> std::optional<std::string> {
    std::ifstream in(p);
    if (!in) return std::nullopt;
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
  };
  if (auto t = read(dir / "breadth_planner.txt")) breadth_template_ = *t;
  if (auto t = read(dir / "progress_evaluator.txt")) verdict_template_ = *t;
}

std::optional<BreadthDecision> LlmPolicy::plan_breadth(const std::string& query,
                                                       const std::vector<Finding>& accumulated,
                                                       const TreeConfig& config) {
  std::string system = breadth_template_;
  system = replace_all(system, "[max_breadth+flex_breadth]",
                       std::to_string(config.max_total_breadth()));
  system = replace_all(system, "[initial_query]", query);
  system = replace_all(system, "[accumulated_learnings]", join_learnings(accumulated));
  std::string user =
      "Research query: " + query +
      "\n\nRespond with JSON: {\"subqueries\": [\"...\"], \"utility\": <expected gain in "
      "[0,1]>}";
  auto raw = client_.complete(system, user);
  if (!raw) return std::nullopt;
  auto parsed = parse_breadth_response(*raw);
  if (!parsed) return std::nullopt;
  BreadthDecision d;
  d.subqueries = std::move(parsed->subqueries);
  d.breadth = static_cast<int>(d.subqueries.size());
  d.utility_estimate = parsed->utility.value_or(0.5);
  return d;
}

std::optional<double> LlmPolicy::depth_gain(const std::string& query,
                                            const std::vector<Finding>& local_findings, int depth,
                                            const TreeConfig&) {
  std::string user = "Research query: " + query + "\nCurrent depth: " + std::to_string(depth) +
                     "\nFindings so far:\n" + join_learnings(local_findings) +
                     "\nEstimate the marginal information gain of researching one level deeper, "
                     "as a fraction. Respond with JSON: {\"marginal_gain\": <-1..1>}";
  auto raw = client_.complete(
      "You are an expert researcher judging whether deeper investigation of a research path is "
      "worth the cost. Diminishing returns are common; be frugal.",
      user);
  if (!raw) return std::nullopt;
  return parse_depth_response(*raw);
}

std::optional<std::pair<double, double>> LlmPolicy::progress_scores(
    const std::string& query, const std::vector<ContextItem>& contexts,
    const std::vector<Finding>& findings, const TreeConfig&) {
  std::ostringstream user;
  user << "Research goal: " << query << "\n\nCurrent findings (" << findings.size() << "):\n"
       << join_learnings(findings) << "\nSources gathered: " << contexts.size()
       << "\n\nScore goal satisfaction (phi) and quality (psi). Respond with JSON: "
          "{\"phi\": <0..1>, \"psi\": <0..1>}";
  auto raw = client_.complete(verdict_template_, user.str());
  if (!raw) return std::nullopt;
  return parse_verdict_response(*raw);
}

// ---------------------------------------------------------------------------
// LlmSynthesis

std::optional<std::string> LlmSynthesis::compose(const std::string& query,
                                                 const std::vector<ContextItem>& contexts,
                                                 const std::vector<Finding>& findings) {
  std::ostringstream user;
  user << "Write a well-structured Markdown research report answering:\n" << query
       << "\n\nFindings:\n";
  for (const auto& f : findings) user << "- " << f.body << "\n";
  user << "\nSources:\n";
  for (const auto& c : contexts) user << "- " << c.source << "\n";
  user << "\nIntegrate the findings into a coherent, comprehensive report with citations.";
  return client_.complete(
      "You are an expert research writer synthesizing verified findings into a final report.",
      user.str());
}

}  // namespace flowtree
