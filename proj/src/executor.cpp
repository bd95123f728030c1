// SPDX-License-Identifier: Apache-2.0
#include "flowtree/executor.hpp"

#include <algorithm>
#include <cctype>

namespace flowtree {

namespace {

std::string slug(const std::string& query) {
  std::string out;
  out.reserve(query.size());
  bool dash = true;
  for (unsigned char c : query) {
    if (std::isalnum(c)) {
      out.push_back(static_cast<char>(std::tolower(c)));
      dash = false;
    } else if (!dash && !out.empty()) {
      out.push_back('-');
      dash = true;
    }
  }
  while (!out.empty() && out.back() == '-') out.pop_back();
  if (out.size() > 48) out.resize(48);
  return out.empty() ? "query" : out;
}

std::string content_tag(const std::string& query, const char* kind, int index,
                        std::uint64_t seed) {
  Fnv1a h;
  h.add(query).add(kind).add(static_cast<std::uint64_t>(index)).add(seed);
  return to_hex(ContentHash{h.value()}).substr(0, 8);
}

}  // namespace

std::string sim_source_locator(const std::string& query, int index) {
  return "sim://" + slug(query) + "/s" + std::to_string(index);
}

ContextItem sim_context_item(const std::string& query, int index, std::uint64_t seed,
                             TimePoint retrieved_at) {
  std::string body = "Synthetic source material " + content_tag(query, "c", index, seed) +
                     " covering: " + query;
  return ContextItem::make(sim_source_locator(query, index), std::move(body), retrieved_at);
}

Finding sim_finding(NodeId origin, int depth, const std::string& query, int index,
                    int n_contexts, std::uint64_t seed) {
  std::string body = "Insight " + content_tag(query, "f", index, seed) + " about: " + query;
  if (n_contexts > 0) {
    body += " (src: " + sim_source_locator(query, index % n_contexts) + ")";
  }
  return Finding::make(origin, depth, std::move(body));
}

ExecutionOutcome sim_outcome(const Scenario& scenario, const std::string& query, NodeRef node,
                             std::uint64_t seed, TimePoint completed_at) {
  SimExecEntry entry = scenario.exec_for(query);
  ExecutionOutcome out;
  out.elapsed = entry.latency;
  if (entry.fail) {
    out.failed = true;
    out.error = "simulated execution failure for: " + query;
    return out;
  }
  out.contexts.reserve(static_cast<std::size_t>(entry.yield_contexts));
  for (int i = 0; i < entry.yield_contexts; ++i) {
    out.contexts.push_back(sim_context_item(query, i, seed, completed_at));
  }
  out.findings.reserve(static_cast<std::size_t>(entry.yield_findings));
  for (int i = 0; i < entry.yield_findings; ++i) {
    out.findings.push_back(sim_finding(node.id, node.depth, query, i, entry.yield_contexts, seed));
  }
  return out;
}

void SimExecutor::execute(const std::string& query, NodeRef node, CancelToken cancel,
                          std::function<void(ExecutionOutcome)> done) {
  struct Pending {
    bool delivered = false;
    Runtime::TimerId timer = 0;
    std::uint64_t cancel_handle = 0;
  };
  auto pending = std::make_shared<Pending>();
  auto shared_done = std::make_shared<std::function<void(ExecutionOutcome)>>(std::move(done));

  SimExecEntry entry = scenario_.exec_for(query);
  TimePoint started = rt_.now();

  pending->timer = rt_.schedule_after(entry.latency, [this, pending, shared_done, cancel, query,
                                                      node] {
    if (pending->delivered) return;
    pending->delivered = true;
    cancel.remove_callback(pending->cancel_handle);
    (*shared_done)(sim_outcome(scenario_, query, node, seed_, rt_.now()));
  });

  pending->cancel_handle = cancel.on_cancel([this, pending, shared_done, started] {
    if (pending->delivered) return;
    pending->delivered = true;
    rt_.cancel_timer(pending->timer);
    TimePoint at = rt_.now();
    // Deliver asynchronously so cancellation callers never reenter the
    // orchestrator mid-walk.
    rt_.post([shared_done, started, at] {
      ExecutionOutcome out;
      out.interrupted = true;
      out.elapsed = at - started;
      (*shared_done)(out);
    });
  });
}

}  // namespace flowtree
