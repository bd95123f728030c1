// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <optional>

#include "flowtree/executor.hpp"

using namespace flowtree;

namespace {

Scenario exec_scenario() {
  Scenario s;
  s.set_exec("quick", SimExecEntry{seconds(2), 3, 2, false});
  s.set_exec("slow", SimExecEntry{seconds(5), 1, 1, false});
  s.set_exec("broken", SimExecEntry{seconds(1), 0, 0, true});
  return s;
}

}  // namespace

TEST_CASE("sim execution yields exactly the scripted counts and latency") {
  Runtime rt(Runtime::Mode::Virtual);
  SimExecutor exec(rt, exec_scenario(), 42);
  std::optional<ExecutionOutcome> got;
  exec.execute("quick", NodeRef{NodeId{7}, 1}, CancelToken{},
               [&](ExecutionOutcome o) { got = std::move(o); });
  CHECK_FALSE(got.has_value());  // nothing before the latency elapses
  rt.run();
  REQUIRE(got.has_value());
  CHECK(got->contexts.size() == 3);
  CHECK(got->findings.size() == 2);
  CHECK(got->elapsed == seconds(2));
  CHECK_FALSE(got->interrupted);
  CHECK(rt.now() == seconds(2));
  for (const auto& f : got->findings) {
    CHECK(f.origin_node == NodeId{7});
    CHECK(f.depth == 1);
  }
}

TEST_CASE("cancellation mid-flight interrupts with elapsed time") {
  Runtime rt(Runtime::Mode::Virtual);
  SimExecutor exec(rt, exec_scenario(), 42);
  CancelToken token;
  std::optional<ExecutionOutcome> got;
  exec.execute("slow", NodeRef{NodeId{1}, 1}, token,
               [&](ExecutionOutcome o) { got = std::move(o); });
  rt.schedule_at(seconds(1), [&] { token.request_cancel(); });
  rt.run();
  REQUIRE(got.has_value());
  CHECK(got->interrupted);
  CHECK(got->elapsed == seconds(1));
  CHECK(got->contexts.empty());  // yields materialize only at completion
  CHECK(got->findings.empty());
  CHECK(rt.now() == seconds(1));  // completion timer was cancelled, time never reached 5s
}

TEST_CASE("a token cancelled before execute resolves immediately") {
  Runtime rt(Runtime::Mode::Virtual);
  SimExecutor exec(rt, exec_scenario(), 42);
  CancelToken token;
  token.request_cancel();
  std::optional<ExecutionOutcome> got;
  exec.execute("slow", NodeRef{NodeId{1}, 1}, token,
               [&](ExecutionOutcome o) { got = std::move(o); });
  rt.run();
  REQUIRE(got.has_value());
  CHECK(got->interrupted);
  CHECK(got->elapsed == seconds(0));
}

TEST_CASE("scripted failures surface as executor errors") {
  Runtime rt(Runtime::Mode::Virtual);
  SimExecutor exec(rt, exec_scenario(), 42);
  std::optional<ExecutionOutcome> got;
  exec.execute("broken", NodeRef{NodeId{1}, 1}, CancelToken{},
               [&](ExecutionOutcome o) { got = std::move(o); });
  rt.run();
  REQUIRE(got.has_value());
  CHECK(got->failed);
  CHECK(got->contexts.empty());
  CHECK_FALSE(got->error.empty());
}

TEST_CASE("sim content is a pure function of query, index, and seed") {
  auto a = sim_context_item("some query", 0, 42, TimePoint{0});
  auto b = sim_context_item("some query", 0, 42, TimePoint{999});
  CHECK(a.id == b.id);  // retrieval time is not part of identity
  CHECK(a.body == b.body);

  auto other_seed = sim_context_item("some query", 0, 43, TimePoint{0});
  CHECK(a.id != other_seed.id);
  auto other_index = sim_context_item("some query", 1, 42, TimePoint{0});
  CHECK(a.id != other_index.id);

  auto f1 = sim_finding(NodeId{3}, 2, "some query", 0, 2, 42);
  auto f2 = sim_finding(NodeId{3}, 2, "some query", 0, 2, 42);
  CHECK(f1.id == f2.id);
  CHECK(f1.body == f2.body);
  CHECK(f1.body.find("sim://") != std::string::npos);  // findings cite their source
}

TEST_CASE("sim_outcome mirrors what the executor delivers") {
  Scenario s = exec_scenario();
  Runtime rt(Runtime::Mode::Virtual);
  SimExecutor exec(rt, s, 7);
  std::optional<ExecutionOutcome> got;
  exec.execute("quick", NodeRef{NodeId{5}, 2}, CancelToken{},
               [&](ExecutionOutcome o) { got = std::move(o); });
  rt.run();
  auto expected = sim_outcome(s, "quick", NodeRef{NodeId{5}, 2}, 7, rt.now());
  REQUIRE(got.has_value());
  REQUIRE(got->contexts.size() == expected.contexts.size());
  for (std::size_t i = 0; i < expected.contexts.size(); ++i) {
    CHECK(got->contexts[i].id == expected.contexts[i].id);
  }
  REQUIRE(got->findings.size() == expected.findings.size());
  for (std::size_t i = 0; i < expected.findings.size(); ++i) {
    CHECK(got->findings[i].id == expected.findings[i].id);
  }
}
