// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "flowtree/config.hpp"
#include "flowtree/http.hpp"
#include "flowtree/task_pool.hpp"

namespace flowtree {

/// Exit codes: 0 success, 1 configuration error, 2 runtime integrity
/// failure, 3 artifact not found.
inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 1;
inline constexpr int kExitIntegrity = 2;
inline constexpr int kExitNotFound = 3;

/// Fully resolved settings for one run, after merging
/// flags > environment > config file > defaults.
struct RunManifest {
  TreeConfig config;
  std::string mode = "sim";  // sim | live
  SchedulingMode scheduling = SchedulingMode::Pooled;
  std::optional<std::filesystem::path> scenario_path;
  std::uint64_t seed = 0;
  std::filesystem::path output_dir = "runs";
  std::string run_id;  // empty: derived from (query, seed)

  // Live-mode endpoints; secrets arrive via environment only.
  std::string llm_base_url;
  std::string llm_model;
  std::string llm_api_key;
  std::string search_base_url;
  std::string search_api_key;
  std::optional<std::filesystem::path> prompt_dir;

  /// Throws ConfigError when the manifest cannot drive a run.
  void validate() const;
};

/// Derives the default deterministic run id.
std::string derive_run_id(const std::string& query, std::uint64_t seed);

/// Factory behind every live transport the CLI constructs. Tests swap in
/// an instrumented stub to assert that sim-mode commands never build one.
using TransportFactory =
    std::function<std::unique_ptr<HttpTransport>(const std::string& base_url,
                                                 const std::string& bearer)>;
TransportFactory& live_transport_factory();

int cmd_run(const std::string& query, const RunManifest& manifest);
int cmd_compare(const std::filesystem::path& scenario_path, std::uint64_t seed, Duration budget,
                const std::optional<std::string>& query_override = std::nullopt,
                const TreeConfig& base_config = TreeConfig{});
int cmd_export(const std::filesystem::path& run_dir, const std::string& what,
               const std::string& format, const std::optional<std::filesystem::path>& out_file);

/// Parses argv (excluding the program name) and dispatches. Never throws.
int run_cli(const std::vector<std::string>& args);

}  // namespace flowtree
