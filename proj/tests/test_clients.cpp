// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <filesystem>
#include <memory>

#include <nlohmann/json.hpp>

#include "flowtree/clients.hpp"
#include "flowtree/errors.hpp"

using namespace flowtree;

namespace {

/// Scripted transport: pops canned responses in order; nullopt entries
/// model connect failures. Counts every round trip.
struct StubTransport : HttpTransport {
  std::vector<std::optional<HttpResponse>> responses;
  std::vector<HttpRequest> seen;

  std::optional<HttpResponse> round_trip(const HttpRequest& req) override {
    seen.push_back(req);
    if (responses.empty()) return std::nullopt;
    auto r = responses.front();
    responses.erase(responses.begin());
    return r;
  }
};

std::unique_ptr<StubTransport> stub_with(std::vector<std::optional<HttpResponse>> rs) {
  auto t = std::make_unique<StubTransport>();
  t->responses = std::move(rs);
  return t;
}

std::string search_body(int n, bool duplicate_urls = false) {
  nlohmann::json results = nlohmann::json::array();
  for (int i = 0; i < n; ++i) {
    std::string url = "https://example.org/p" + std::to_string(duplicate_urls ? i / 2 : i);
    results.push_back({{"url", url},
                       {"title", "Title " + std::to_string(i)},
                       {"snippet", "Snippet " + std::to_string(i)}});
  }
  return nlohmann::json{{"results", results}}.dump();
}

RetryPolicy fast_retries() { return RetryPolicy{3, ms(1), 2.0}; }

}  // namespace

TEST_CASE("with_retries retries transport failures with exponential backoff") {
  StubTransport t;
  t.responses = {std::nullopt, std::nullopt, HttpResponse{200, "ok"}};
  std::vector<std::int64_t> sleeps;
  auto resp = with_retries(t, HttpRequest{"GET", "/x", "", {}}, RetryPolicy{3, ms(500), 2.0},
                           [&](Duration d) { sleeps.push_back(d.count()); });
  CHECK(resp.status == 200);
  CHECK(t.seen.size() == 3);
  CHECK(sleeps == std::vector<std::int64_t>{500, 1000});
}

TEST_CASE("with_retries gives up after the attempt budget") {
  StubTransport t;
  t.responses = {std::nullopt, std::nullopt, std::nullopt, std::nullopt};
  CHECK_THROWS_AS(
      with_retries(t, HttpRequest{"GET", "/x", "", {}}, fast_retries(), [](Duration) {}),
      TransportError);
  CHECK(t.seen.size() == 3);
}

TEST_CASE("with_retries retries 5xx and returns 4xx as-is") {
  StubTransport t;
  t.responses = {HttpResponse{503, ""}, HttpResponse{200, "fine"}};
  auto ok = with_retries(t, HttpRequest{"GET", "/x", "", {}}, fast_retries(), [](Duration) {});
  CHECK(ok.status == 200);

  StubTransport t2;
  t2.responses = {HttpResponse{404, "missing"}};
  auto nf = with_retries(t2, HttpRequest{"GET", "/x", "", {}}, fast_retries(), [](Duration) {});
  CHECK(nf.status == 404);
  CHECK(t2.seen.size() == 1);
}

TEST_CASE("search returns up to max_results hits") {
  SearchClient client(stub_with({HttpResponse{200, search_body(5)}}), fast_retries());
  auto hits = client.search({"anything", 5});
  CHECK(hits.size() == 5);
  CHECK(hits[0].url == "https://example.org/p0");
}

TEST_CASE("search deduplicates hits by URL") {
  SearchClient client(stub_with({HttpResponse{200, search_body(6, true)}}), fast_retries());
  auto hits = client.search({"anything", 10});
  CHECK(hits.size() == 3);
}

TEST_CASE("search rejects empty queries before any network work") {
  auto transport = stub_with({});
  auto* raw = transport.get();
  SearchClient client(std::move(transport), fast_retries());
  CHECK_THROWS_AS(client.search({"", 5}), ConfigError);
  CHECK(raw->seen.empty());
}

TEST_CASE("search surfaces exhausted retries as transport errors") {
  SearchClient client(stub_with({std::nullopt, std::nullopt, std::nullopt}),
                      RetryPolicy{3, ms(0), 2.0});
  CHECK_THROWS_AS(client.search({"q", 3}), TransportError);
}

TEST_CASE("cassettes replay recorded pairs and miss otherwise") {
  auto dir = std::filesystem::temp_directory_path() / "ft_cassettes_test";
  std::filesystem::remove_all(dir);
  HttpRequest req{"GET", "/search?q=x&count=3", "", {}};
  write_cassette(dir, req, HttpResponse{200, search_body(3)});

  CassetteTransport replay(dir);
  auto hit = replay.round_trip(req);
  REQUIRE(hit.has_value());
  CHECK(hit->status == 200);

  auto miss = replay.round_trip(HttpRequest{"GET", "/search?q=other&count=3", "", {}});
  CHECK_FALSE(miss.has_value());
  std::filesystem::remove_all(dir);
}

TEST_CASE("search works against a recorded cassette fixture") {
  auto dir = std::filesystem::temp_directory_path() / "ft_cassettes_search";
  std::filesystem::remove_all(dir);
  HttpRequest req{"GET", "/search?q=cislunar%20tracking&count=5", "", {}};
  write_cassette(dir, req, HttpResponse{200, search_body(5)});
  SearchClient client(std::make_unique<CassetteTransport>(dir), fast_retries());
  auto hits = client.search({"cislunar tracking", 5});
  CHECK(hits.size() == 5);
  std::filesystem::remove_all(dir);
}

namespace {

std::string chat_body(const std::string& content) {
  return nlohmann::json{
      {"choices", nlohmann::json::array({{{"message", {{"role", "assistant"},
                                                       {"content", content}}}}})}}
      .dump();
}

}  // namespace

TEST_CASE("llm client extracts chat-completion content") {
  LlmClient llm(stub_with({HttpResponse{200, chat_body("hello")}}), "test-model", 2,
                fast_retries());
  auto out = llm.complete("system", "user");
  CHECK(out == std::optional<std::string>{"hello"});
}

TEST_CASE("llm client degrades to nullopt on failure") {
  LlmClient llm(stub_with({std::nullopt, std::nullopt, std::nullopt}), "test-model", 2,
                RetryPolicy{3, ms(0), 2.0});
  CHECK_FALSE(llm.complete("s", "u").has_value());

  LlmClient bad_json(stub_with({HttpResponse{200, "garbage"}}), "m", 2, fast_retries());
  CHECK_FALSE(bad_json.complete("s", "u").has_value());
}

TEST_CASE("summarize_findings grounds findings in hit URLs") {
  std::vector<SearchHit> hits{{"https://a.example/one", "A", "aa"},
                              {"https://b.example/two", "B", "bb"}};
  nlohmann::json reply = {
      {"findings",
       nlohmann::json::array(
           {{{"body", "First insight"}, {"source", "https://a.example/one"}},
            {{"body", "Cites https://b.example/two inline"}, {"source", "unlisted"}},
            {{"body", "Hallucinated"}, {"source", "https://nowhere.example"}}})}};
  LlmClient llm(stub_with({HttpResponse{200, chat_body(reply.dump())}}), "m", 2, fast_retries());
  auto findings = summarize_findings("q", hits, llm, NodeRef{NodeId{4}, 2}, 5);
  REQUIRE(findings.size() == 2);  // the unsourced finding was dropped
  CHECK(findings[0].body.find("https://a.example/one") != std::string::npos);
  CHECK(findings[0].origin_node == NodeId{4});
  CHECK(findings[0].depth == 2);
}

TEST_CASE("summarize_findings requires hits and tolerates prose replies") {
  LlmClient llm(stub_with({HttpResponse{200, chat_body("no json here at all")}}), "m", 2,
                fast_retries());
  CHECK_THROWS_AS(summarize_findings("q", {}, llm, NodeRef{NodeId{1}, 1}, 5), ConfigError);
  std::vector<SearchHit> hits{{"https://a.example", "A", "aa"}};
  auto findings = summarize_findings("q", hits, llm, NodeRef{NodeId{1}, 1}, 5);
  CHECK(findings.empty());  // defined degradation
}

TEST_CASE("web executor searches, summarizes, and honors cancellation") {
  Runtime rt(Runtime::Mode::Virtual);  // offload runs inline: deterministic
  nlohmann::json reply = {{"findings", nlohmann::json::array({{{"body", "insight"},
                                                               {"source",
                                                                "https://example.org/p0"}}})}};
  SearchClient search(stub_with({HttpResponse{200, search_body(2)}}), fast_retries());
  LlmClient llm(stub_with({HttpResponse{200, chat_body(reply.dump())}}), "m", 2, fast_retries());
  WebExecutor exec(rt, search, llm, 5, 5);

  std::optional<ExecutionOutcome> got;
  exec.execute("q", NodeRef{NodeId{2}, 1}, CancelToken{},
               [&](ExecutionOutcome o) { got = std::move(o); });
  rt.run();
  REQUIRE(got.has_value());
  CHECK(got->contexts.size() == 2);
  CHECK(got->findings.size() == 1);
  CHECK_FALSE(got->failed);

  // Pre-cancelled token: the executor returns promptly with nothing.
  SearchClient search2(stub_with({HttpResponse{200, search_body(2)}}), fast_retries());
  LlmClient llm2(stub_with({}), "m", 2, fast_retries());
  WebExecutor exec2(rt, search2, llm2, 5, 5);
  CancelToken cancelled;
  cancelled.request_cancel();
  std::optional<ExecutionOutcome> interrupted;
  exec2.execute("q", NodeRef{NodeId{3}, 1}, cancelled,
                [&](ExecutionOutcome o) { interrupted = std::move(o); });
  rt.run();
  REQUIRE(interrupted.has_value());
  CHECK(interrupted->interrupted);
  CHECK(interrupted->contexts.empty());
}

TEST_CASE("web executor converts transport failure into a failed outcome") {
  Runtime rt(Runtime::Mode::Virtual);
  SearchClient search(stub_with({std::nullopt, std::nullopt, std::nullopt}),
                      RetryPolicy{3, ms(0), 2.0});
  LlmClient llm(stub_with({}), "m", 2, fast_retries());
  WebExecutor exec(rt, search, llm, 5, 5);
  std::optional<ExecutionOutcome> got;
  exec.execute("q", NodeRef{NodeId{2}, 1}, CancelToken{},
               [&](ExecutionOutcome o) { got = std::move(o); });
  rt.run();
  REQUIRE(got.has_value());
  CHECK(got->failed);
  CHECK_FALSE(got->error.empty());
}

TEST_CASE("llm policy renders templates and parses structured replies") {
  auto breadth_reply = chat_body(R"({"subqueries": ["a", "b", "c"], "utility": 0.7})");
  auto transport = stub_with({HttpResponse{200, breadth_reply}});
  auto* raw = transport.get();
  LlmClient llm(std::move(transport), "m", 2, fast_retries());
  LlmPolicy policy(llm);
  CHECK(policy.blocking());

  TreeConfig config;
  auto d = policy.plan_breadth("root question", {}, config);
  REQUIRE(d.has_value());
  CHECK(d->subqueries == std::vector<std::string>{"a", "b", "c"});
  CHECK(d->utility_estimate == doctest::Approx(0.7));

  // The rendered prompt carries the resolved cap and the query.
  REQUIRE(raw->seen.size() == 1);
  auto sent = nlohmann::json::parse(raw->seen[0].body);
  std::string system = sent["messages"][0]["content"];
  CHECK(system.find("Do not exceed 6 subqueries") != std::string::npos);
  CHECK(system.find("root question") != std::string::npos);
  CHECK(system.find("[max_breadth+flex_breadth]") == std::string::npos);
}

TEST_CASE("llm policy failure propagates as nullopt for the fallback layer") {
  LlmClient llm(stub_with({std::nullopt, std::nullopt, std::nullopt}), "m", 2,
                RetryPolicy{3, ms(0), 2.0});
  LlmPolicy policy(llm);
  CHECK_FALSE(policy.plan_breadth("q", {}, TreeConfig{}).has_value());
  CHECK_FALSE(policy.depth_gain("q", {}, 1, TreeConfig{}).has_value());
  CHECK_FALSE(policy.progress_scores("q", {}, {}, TreeConfig{}).has_value());
}
