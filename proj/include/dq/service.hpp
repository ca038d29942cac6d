/* Copyright 2026 The DeepQuarantine Authors.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

#ifndef DQ_SERVICE_HPP_
#define DQ_SERVICE_HPP_

#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "dq/model.hpp"

// HTTP quarantine endpoint: POST /v1/scan answers quarantine decisions within
// a per-request deadline and fails open (deliver, don't hold) when the clock
// runs out. GET /v1/health reports the live model version; POST
// /v1/admin/reload swaps in a new model file atomically.

namespace dq {

struct ScanRequest {
  std::string request_id;
  std::optional<std::string> message_id;
  std::vector<std::string> header_seq;
  std::optional<std::string> x_mailer;
  int deadline_ms = 10;
};

struct ScanResponse {
  std::string request_id;
  bool quarantine = false;
  double score = 0.0;
  std::string model_version;
  bool deadline_exceeded = false;
};

struct ServiceConfig {
  std::string host = "127.0.0.1";
  int port = 8080;  // 0 picks an ephemeral port (tests)
  std::string model_path;
  std::optional<double> threshold_override;  // must be in (0,1)
  int default_deadline_ms = 10;
  int max_concurrency = 8;
  std::string request_log_path;  // empty = no log
  int inject_scan_delay_ms = 0;  // test hook: artificial scoring delay
};

// Body codecs: one "field: value" line per ScanRequest/ScanResponse field.
// header_seq is colon-joined (header names cannot contain ':'), bools are
// true/false. Parsers throw on malformed input with the field named.
std::string encode_scan_request(const ScanRequest& req);
ScanRequest parse_scan_request(const std::string& body, int default_deadline_ms);
std::string encode_scan_response(const ScanResponse& resp);
ScanResponse parse_scan_response(const std::string& body);

class QuarantineService {
 public:
  // Loads the model eagerly; throws when the file is bad or when neither the
  // model nor the config supplies a threshold (a service that would have to
  // guess its operating point must not start).
  explicit QuarantineService(ServiceConfig cfg);
  ~QuarantineService();

  QuarantineService(const QuarantineService&) = delete;
  QuarantineService& operator=(const QuarantineService&) = delete;

  // Scores against the current snapshot under the request's deadline.
  ScanResponse handle_scan(const ScanRequest& req) const;

  // Loads path (or the configured model path when empty) and publishes it as
  // the new snapshot. Throws and keeps the old snapshot on any failure.
  // Returns the new model version.
  std::string reload(const std::string& path = "");

  // Starts the HTTP listener on a background thread; returns once the socket
  // is accepting. Throws on bind failure.
  void start();
  void stop();
  // Blocks until the server exits (e.g. on SIGTERM-driven stop from another
  // thread); used by the CLI's serve command.
  void wait();

  int port() const;
  std::string model_version() const;

 private:
  struct Snapshot {
    TrainedModel model;
    double threshold;
  };
  struct HttpState;

  std::shared_ptr<const Snapshot> snapshot() const;
  static Snapshot load_snapshot(const std::string& path,
                                const std::optional<double>& override);

  ServiceConfig cfg_;
  mutable std::mutex mu_;
  std::shared_ptr<const Snapshot> snap_;
  std::unique_ptr<HttpState> http_;
};

}  // namespace dq

#endif  // DQ_SERVICE_HPP_
