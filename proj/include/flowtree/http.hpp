// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>

#include "flowtree/time.hpp"

namespace flowtree {

struct HttpRequest {
  std::string method = "GET";  // GET or POST
  std::string path;            // path + query, relative to the client base URL
  std::string body;            // JSON payload for POST
  std::map<std::string, std::string> headers;
};

struct HttpResponse {
  int status = 0;
  std::string body;

  bool ok() const { return status >= 200 && status < 300; }
};

/// Minimal transport seam: everything the live clients say to the network
/// goes through one of these, so tests can swap in cassettes or counting
/// stubs and assert that sim runs never touch it.
class HttpTransport {
 public:
  virtual ~HttpTransport() = default;
  /// nullopt = transport-level failure (connect/timeout).
  virtual std::optional<HttpResponse> round_trip(const HttpRequest& req) = 0;
};

struct RetryPolicy {
  int attempts = 3;
  Duration initial_backoff{500};
  double multiplier = 2.0;
};

/// Retries transport failures and 5xx/429 responses with exponential
/// backoff. `sleep` is injectable for tests; pass nullptr for a real
/// sleep. Throws TransportError once attempts are exhausted.
HttpResponse with_retries(HttpTransport& transport, const HttpRequest& req,
                          const RetryPolicy& policy,
                          const std::function<void(Duration)>& sleep = nullptr);

/// Live transport over cpp-httplib. Accepts http:// and https:// base
/// URLs; a bearer token, when set, rides in the Authorization header.
std::unique_ptr<HttpTransport> make_live_transport(const std::string& base_url,
                                                   const std::string& bearer_token = "");

/// Replays recorded request/response pairs from a directory; pairs are
/// keyed by a content hash of (method, path, body). In record mode an
/// inner live transport is consulted on miss and the result stored.
class CassetteTransport final : public HttpTransport {
 public:
  explicit CassetteTransport(std::filesystem::path dir,
                             std::unique_ptr<HttpTransport> record_inner = nullptr);

  std::optional<HttpResponse> round_trip(const HttpRequest& req) override;

  static std::string key_for(const HttpRequest& req);

 private:
  std::filesystem::path dir_;
  std::unique_ptr<HttpTransport> inner_;
};

/// Writes a cassette file the transport will find later; used by tests
/// and by record tooling.
void write_cassette(const std::filesystem::path& dir, const HttpRequest& req,
                    const HttpResponse& resp);

}  // namespace flowtree
