// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "flowtree/ids.hpp"
#include "flowtree/runtime.hpp"
#include "flowtree/scenario.hpp"
#include "flowtree/time.hpp"
#include "flowtree/tree.hpp"

namespace flowtree {

/// Result of one research-node execution. When interrupted, the outcome
/// carries only what was produced before the interruption point.
struct ExecutionOutcome {
  std::vector<ContextItem> contexts;
  std::vector<Finding> findings;
  Duration elapsed{0};
  bool interrupted = false;
  bool failed = false;
  std::string error;
};

struct NodeRef {
  NodeId id;
  int depth = 1;
};

/// Retrieval + localized reasoning for one subquery. Implementations
/// deliver the outcome exactly once via `done`, always asynchronously on
/// the runtime loop, and honor the cancellation token at yield points.
class ExecutorBackend {
 public:
  virtual ~ExecutorBackend() = default;
  virtual void execute(const std::string& query, NodeRef node, CancelToken cancel,
                       std::function<void(ExecutionOutcome)> done) = 0;
};

// ---------------------------------------------------------------------------
// Deterministic simulated execution

/// Synthetic-yield generators. Content is a pure function of
/// (query, index, seed) so identical runs produce identical items while
/// distinct nodes exercise real dedup behaviour. Shared by the simulator
/// and by test oracles.
std::string sim_source_locator(const std::string& query, int index);
ContextItem sim_context_item(const std::string& query, int index, std::uint64_t seed,
                             TimePoint retrieved_at);
Finding sim_finding(NodeId origin, int depth, const std::string& query, int index,
                    int n_contexts, std::uint64_t seed);

/// Scenario-scripted executor over the virtual (or real) clock. Yields
/// materialize at completion; cancellation completes the call early with
/// an interrupted outcome at the cancellation instant.
class SimExecutor final : public ExecutorBackend {
 public:
  SimExecutor(Runtime& rt, Scenario scenario, std::uint64_t seed)
      : rt_(rt), scenario_(std::move(scenario)), seed_(seed) {}

  void execute(const std::string& query, NodeRef node, CancelToken cancel,
               std::function<void(ExecutionOutcome)> done) override;

  const Scenario& scenario() const { return scenario_; }
  std::uint64_t seed() const { return seed_; }

 private:
  Runtime& rt_;
  Scenario scenario_;
  std::uint64_t seed_;
};

/// Builds the outcome a SimExecutor would deliver on normal completion.
/// Exposed so sequential reference interpreters can reproduce yields
/// without running the event loop.
ExecutionOutcome sim_outcome(const Scenario& scenario, const std::string& query, NodeRef node,
                             std::uint64_t seed, TimePoint completed_at);

}  // namespace flowtree
