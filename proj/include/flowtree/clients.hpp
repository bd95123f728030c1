// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <memory>
#include <mutex>
#include <condition_variable>
#include <optional>
#include <string>
#include <vector>

#include "flowtree/executor.hpp"
#include "flowtree/http.hpp"
#include "flowtree/policy.hpp"
#include "flowtree/synthesis.hpp"

namespace flowtree {

struct SearchQuery {
  std::string text;
  int max_results = 5;
};

struct SearchHit {
  std::string url;
  std::string title;
  std::string snippet;
};

/// Client for a JSON search endpoint: GET /search?q=...&count=N returning
/// {"results": [{"url", "title", "snippet"}, ...]}.
class SearchClient {
 public:
  SearchClient(std::unique_ptr<HttpTransport> transport, RetryPolicy retry = {});

  /// Returns at most max_results hits, deduplicated by URL. Throws
  /// ConfigError on an empty query and TransportError when retries are
  /// exhausted.
  std::vector<SearchHit> search(const SearchQuery& q);

 private:
  std::unique_ptr<HttpTransport> transport_;
  RetryPolicy retry_;
};

/// Convenience matching the client seam one-to-one.
std::vector<SearchHit> web_search(const SearchQuery& q, SearchClient& client);

/// Chat-completion client shared by the LLM policy backend, the web
/// executor's summarizer, and live synthesis. Enforces a global
/// max-in-flight cap across all callers of this instance.
class LlmClient {
 public:
  LlmClient(std::unique_ptr<HttpTransport> transport, std::string model, int max_in_flight = 8,
            RetryPolicy retry = {});

  /// One completion round-trip; nullopt on failure (callers fall back).
  std::optional<std::string> complete(const std::string& system_prompt,
                                      const std::string& user_prompt);

 private:
  std::unique_ptr<HttpTransport> transport_;
  std::string model_;
  RetryPolicy retry_;
  std::mutex mu_;
  std::condition_variable cv_;
  int in_flight_ = 0;
  int max_in_flight_;
};

/// Distills search hits into findings for one node. Every finding body
/// cites at least one hit URL; the count is capped. An LLM failure
/// degrades to an empty set.
std::vector<Finding> summarize_findings(const std::string& query,
                                        const std::vector<SearchHit>& hits, LlmClient& llm,
                                        NodeRef node, int max_findings = 5);

/// Live research execution: search, then summarize, with cooperative
/// cancellation between the two steps. Work runs on the runtime's
/// offload pool; outcomes are delivered on the loop.
class WebExecutor final : public ExecutorBackend {
 public:
  WebExecutor(Runtime& rt, SearchClient& search, LlmClient& llm, int max_results = 5,
              int max_findings = 5);

  void execute(const std::string& query, NodeRef node, CancelToken cancel,
               std::function<void(ExecutionOutcome)> done) override;

 private:
  Runtime& rt_;
  SearchClient& search_;
  LlmClient& llm_;
  int max_results_;
  int max_findings_;
};

/// LLM-backed decision policies rendering the planner and evaluator
/// prompt templates. Placeholders: [max_breadth+flex_breadth],
/// [initial_query], [accumulated_learnings].
class LlmPolicy final : public PolicyBackend {
 public:
  explicit LlmPolicy(LlmClient& client);

  /// Overrides the compiled-in templates with files from a directory
  /// (breadth_planner.txt / progress_evaluator.txt).
  void load_templates(const std::filesystem::path& dir);

  bool blocking() const override { return true; }

  std::optional<BreadthDecision> plan_breadth(const std::string& query,
                                              const std::vector<Finding>& accumulated,
                                              const TreeConfig& config) override;
  std::optional<double> depth_gain(const std::string& query,
                                   const std::vector<Finding>& local_findings, int depth,
                                   const TreeConfig& config) override;
  std::optional<std::pair<double, double>> progress_scores(
      const std::string& query, const std::vector<ContextItem>& contexts,
      const std::vector<Finding>& findings, const TreeConfig& config) override;

 private:
  LlmClient& client_;
  std::string breadth_template_;
  std::string verdict_template_;
};

class LlmSynthesis final : public SynthesisBackend {
 public:
  explicit LlmSynthesis(LlmClient& client) : client_(client) {}

  std::optional<std::string> compose(const std::string& query,
                                     const std::vector<ContextItem>& contexts,
                                     const std::vector<Finding>& findings) override;

 private:
  LlmClient& client_;
};

}  // namespace flowtree
