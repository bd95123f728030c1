// SPDX-License-Identifier: Apache-2.0
#include "flowtree/http.hpp"

#include <fstream>
#include <thread>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "flowtree/errors.hpp"
#include "flowtree/ids.hpp"

namespace flowtree {

namespace {

bool retriable_status(int status) { return status == 429 || (status >= 500 && status < 600); }

}  // namespace

HttpResponse with_retries(HttpTransport& transport, const HttpRequest& req,
                          const RetryPolicy& policy, const std::function<void(Duration)>& sleep) {
  Duration backoff = policy.initial_backoff;
  std::optional<HttpResponse> last;
  for (int attempt = 1; attempt <= policy.attempts; ++attempt) {
    last = transport.round_trip(req);
    if (last && !retriable_status(last->status)) return *last;
    if (attempt == policy.attempts) break;
    if (sleep) {
      sleep(backoff);
    } else {
      std::this_thread::sleep_for(backoff);
    }
    backoff = Duration{static_cast<std::int64_t>(static_cast<double>(backoff.count()) *
                                                 policy.multiplier)};
  }
  if (last) return *last;  // non-retriable exhausted into a 4xx-style reply
  throw TransportError("request to " + req.path + " failed after " +
                       std::to_string(policy.attempts) + " attempts");
}

// ---------------------------------------------------------------------------
// Live transport

namespace {

class LiveTransport final : public HttpTransport {
 public:
  LiveTransport(std::string base_url, std::string bearer) : bearer_(std::move(bearer)) {
    client_ = std::make_unique<httplib::Client>(base_url);
    client_->set_connection_timeout(10, 0);
    client_->set_read_timeout(120, 0);
  }

  std::optional<HttpResponse> round_trip(const HttpRequest& req) override {
    httplib::Headers headers;
    for (const auto& [k, v] : req.headers) headers.emplace(k, v);
    if (!bearer_.empty()) headers.emplace("Authorization", "Bearer " + bearer_);
    httplib::Result res = req.method == "POST"
                              ? client_->Post(req.path, headers, req.body, "application/json")
                              : client_->Get(req.path, headers);
    if (!res) return std::nullopt;
    return HttpResponse{res->status, res->body};
  }

 private:
  std::unique_ptr<httplib::Client> client_;
  std::string bearer_;
};

}  // namespace

std::unique_ptr<HttpTransport> make_live_transport(const std::string& base_url,
                                                   const std::string& bearer_token) {
  return std::make_unique<LiveTransport>(base_url, bearer_token);
}

// ---------------------------------------------------------------------------
// Cassettes

CassetteTransport::CassetteTransport(std::filesystem::path dir,
                                     std::unique_ptr<HttpTransport> record_inner)
    : dir_(std::move(dir)), inner_(std::move(record_inner)) {}

std::string CassetteTransport::key_for(const HttpRequest& req) {
  Fnv1a h;
  h.add(req.method).add("\x1f").add(req.path).add("\x1f").add(req.body);
  return to_hex(ContentHash{h.value()});
}

std::optional<HttpResponse> CassetteTransport::round_trip(const HttpRequest& req) {
  auto file = dir_ / (key_for(req) + ".json");
  if (std::filesystem::exists(file)) {
    std::ifstream in(file);
    nlohmann::json doc;
    in >> doc;
    return HttpResponse{doc.at("response").at("status").get<int>(),
                        doc.at("response").at("body").get<std::string>()};
  }
  if (!inner_) return std::nullopt;  // replay miss
  auto live = inner_->round_trip(req);
  if (live) write_cassette(dir_, req, *live);
  return live;
}

void write_cassette(const std::filesystem::path& dir, const HttpRequest& req,
                    const HttpResponse& resp) {
  std::filesystem::create_directories(dir);
  nlohmann::json doc;
  doc["request"] = {{"method", req.method}, {"path", req.path}, {"body", req.body}};
  doc["response"] = {{"status", resp.status}, {"body", resp.body}};
  std::ofstream out(dir / (CassetteTransport::key_for(req) + ".json"));
  out << doc.dump(2) << '\n';
}

}  // namespace flowtree
