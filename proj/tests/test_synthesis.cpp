// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <algorithm>
#include <random>

#include <nlohmann/json.hpp>

#include "flowtree/synthesis.hpp"

using namespace flowtree;

namespace {

std::vector<ContextItem> some_contexts() {
  return {ContextItem::make("sim://a/s0", "body a", TimePoint{10}),
          ContextItem::make("sim://b/s0", "body b", TimePoint{20}),
          ContextItem::make("sim://c/s0", "body c", TimePoint{30})};
}

std::vector<Finding> some_findings() {
  return {Finding::make(NodeId{4}, 1, "first insight"),
          Finding::make(NodeId{5}, 1, "second insight"),
          Finding::make(NodeId{9}, 2, "deep insight")};
}

struct StubSynth : SynthesisBackend {
  std::optional<std::string> reply;
  bool throws = false;
  std::optional<std::string> compose(const std::string&, const std::vector<ContextItem>&,
                                     const std::vector<Finding>&) override {
    if (throws) throw Error("synthesis backend down");
    return reply;
  }
};

}  // namespace

TEST_CASE("empty inputs produce a minimal report") {
  auto r = synthesize("q", {}, {}, false, TimePoint{0});
  CHECK(r.body.find("No findings were gathered") != std::string::npos);
  CHECK(r.sources.empty());
  CHECK_FALSE(r.truncated_by_budget);

  auto truncated = synthesize("q", {}, {}, true, TimePoint{0});
  CHECK(truncated.truncated_by_budget);
  CHECK(truncated.body.find("time budget") != std::string::npos);
}

TEST_CASE("findings group into depth sections in order") {
  auto r = synthesize("q", some_contexts(), some_findings(), false, TimePoint{0});
  auto d1 = r.body.find("## Depth 1");
  auto d2 = r.body.find("## Depth 2");
  REQUIRE(d1 != std::string::npos);
  REQUIRE(d2 != std::string::npos);
  CHECK(d1 < d2);
  CHECK(r.body.find("## Depth 3") == std::string::npos);
  // Within depth 1, ordering follows origin node id.
  CHECK(r.body.find("first insight") < r.body.find("second insight"));
}

TEST_CASE("template output is invariant under input permutation") {
  auto contexts = some_contexts();
  auto findings = some_findings();
  auto baseline = synthesize("q", contexts, findings, false, TimePoint{7});
  std::mt19937_64 rng(5);
  for (int i = 0; i < 10; ++i) {
    auto c = contexts;
    auto f = findings;
    std::shuffle(c.begin(), c.end(), rng);
    std::shuffle(f.begin(), f.end(), rng);
    auto r = synthesize("q", c, f, false, TimePoint{7});
    CHECK(r.body == baseline.body);
    CHECK(report_sidecar(r).dump() == report_sidecar(baseline).dump());
  }
}

TEST_CASE("every cited source id resolves to an input context") {
  auto contexts = some_contexts();
  auto r = synthesize("q", contexts, some_findings(), false, TimePoint{0});
  for (const auto& c : r.sources) {
    CHECK(r.body.find(to_hex(c.id).substr(0, 8)) != std::string::npos);
  }
  // And nothing extra: sources are exactly the inputs.
  CHECK(r.sources.size() == contexts.size());
}

TEST_CASE("llm composition appends a source list; failure falls back to template") {
  StubSynth ok;
  ok.reply = "free-form prose";
  auto r = synthesize("q", some_contexts(), some_findings(), false, TimePoint{0}, &ok);
  CHECK(r.body.find("free-form prose") == 0);
  CHECK(r.body.find("## Sources") != std::string::npos);

  StubSynth down;
  down.reply = std::nullopt;
  auto fallback = synthesize("q", some_contexts(), some_findings(), false, TimePoint{0}, &down);
  CHECK(fallback.body.find("# Research Report") == 0);

  StubSynth thrower;
  thrower.throws = true;
  auto safe = synthesize("q", some_contexts(), some_findings(), false, TimePoint{0}, &thrower);
  CHECK(safe.body.find("# Research Report") == 0);  // synthesize never fails
}

TEST_CASE("sidecar carries machine-readable sources and findings") {
  auto r = synthesize("q", some_contexts(), some_findings(), true, TimePoint{1234});
  auto doc = report_sidecar(r);
  CHECK(doc["query"] == "q");
  CHECK(doc["truncated_by_budget"] == true);
  CHECK(doc["generated_at_ms"] == 1234);
  CHECK(doc["sources"].size() == 3);
  CHECK(doc["findings"].size() == 3);
  CHECK(doc["findings"][0].contains("depth"));
  CHECK(doc["sources"][0].contains("id"));
}
