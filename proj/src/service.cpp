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

#include "dq/service.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <fstream>
#include <stdexcept>
#include <thread>

#include "httplib.h"

#include "dq/encode.hpp"
#include "dq/kvlines.hpp"
#include "dq/record.hpp"

namespace dq {
namespace {

std::string fmt17(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::vector<std::string> split_colons(const std::string& s) {
  std::vector<std::string> out;
  std::size_t pos = 0;
  while (pos <= s.size()) {
    std::size_t next = s.find(':', pos);
    if (next == std::string::npos) next = s.size();
    if (next > pos) out.emplace_back(s, pos, next - pos);
    pos = next + 1;
  }
  return out;
}

std::string join_colons(const std::vector<std::string>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i > 0) out += ':';
    out += v[i];
  }
  return out;
}

}  // namespace

std::string encode_scan_request(const ScanRequest& req) {
  std::string out;
  kv_append(out, "request_id", req.request_id);
  if (req.message_id) kv_append(out, "message_id", *req.message_id);
  kv_append(out, "header_seq", join_colons(req.header_seq));
  if (req.x_mailer) kv_append(out, "x_mailer", *req.x_mailer);
  kv_append(out, "deadline_ms", std::to_string(req.deadline_ms));
  return out;
}

ScanRequest parse_scan_request(const std::string& body, int default_deadline_ms) {
  KvLines kv = KvLines::parse(body);
  ScanRequest req;
  req.request_id = kv.require("request_id");
  req.message_id = kv.get("message_id");
  if (auto v = kv.get("header_seq")) req.header_seq = split_colons(*v);
  req.x_mailer = kv.get("x_mailer");
  if (auto v = kv.get_int("deadline_ms")) {
    if (*v < 1) throw std::runtime_error("deadline_ms must be a positive integer");
    req.deadline_ms = static_cast<int>(*v);
  } else {
    req.deadline_ms = default_deadline_ms;
  }
  return req;
}

std::string encode_scan_response(const ScanResponse& resp) {
  std::string out;
  kv_append(out, "request_id", resp.request_id);
  kv_append(out, "quarantine", resp.quarantine ? "true" : "false");
  kv_append(out, "score", fmt17(resp.score));
  kv_append(out, "model_version", resp.model_version);
  kv_append(out, "deadline_exceeded", resp.deadline_exceeded ? "true" : "false");
  return out;
}

ScanResponse parse_scan_response(const std::string& body) {
  KvLines kv = KvLines::parse(body);
  ScanResponse resp;
  resp.request_id = kv.require("request_id");
  auto q = kv.get_bool("quarantine");
  if (!q) throw std::runtime_error("missing field 'quarantine'");
  resp.quarantine = *q;
  auto s = kv.get_double("score");
  if (!s) throw std::runtime_error("missing field 'score'");
  resp.score = *s;
  resp.model_version = kv.require("model_version");
  auto d = kv.get_bool("deadline_exceeded");
  if (!d) throw std::runtime_error("missing field 'deadline_exceeded'");
  resp.deadline_exceeded = *d;
  return resp;
}

struct QuarantineService::HttpState {
  httplib::Server server;
  std::thread thread;
  int bound_port = 0;
  std::mutex log_mu;
  std::ofstream log;
};

QuarantineService::QuarantineService(ServiceConfig cfg) : cfg_(std::move(cfg)) {
  if (cfg_.model_path.empty()) throw std::invalid_argument("model path is required");
  if (cfg_.default_deadline_ms < 1)
    throw std::invalid_argument("default deadline must be >= 1 ms");
  if (cfg_.max_concurrency < 1)
    throw std::invalid_argument("max concurrency must be >= 1");
  if (cfg_.threshold_override &&
      !(*cfg_.threshold_override > 0.0 && *cfg_.threshold_override < 1.0))
    throw std::invalid_argument("threshold override must be in (0, 1)");
  snap_ = std::make_shared<const Snapshot>(
      load_snapshot(cfg_.model_path, cfg_.threshold_override));
}

QuarantineService::~QuarantineService() { stop(); }

QuarantineService::Snapshot QuarantineService::load_snapshot(
    const std::string& path, const std::optional<double>& override) {
  Snapshot s{load_model(path), 0.0};
  if (override) {
    s.threshold = *override;
  } else if (s.model.threshold) {
    s.threshold = *s.model.threshold;
  } else {
    throw std::runtime_error(
        "model has no calibrated threshold and no override is configured");
  }
  return s;
}

std::shared_ptr<const QuarantineService::Snapshot> QuarantineService::snapshot() const {
  std::lock_guard<std::mutex> lock(mu_);
  return snap_;
}

std::string QuarantineService::model_version() const {
  return snapshot()->model.model_version;
}

ScanResponse QuarantineService::handle_scan(const ScanRequest& req) const {
  using Clock = std::chrono::steady_clock;
  const Clock::time_point deadline =
      Clock::now() + std::chrono::milliseconds(req.deadline_ms);
  auto expired = [&] { return Clock::now() > deadline; };

  std::shared_ptr<const Snapshot> snap = snapshot();
  ScanResponse resp;
  resp.request_id = req.request_id;
  resp.model_version = snap->model.model_version;

  // Cooperative deadline: checked between stages rather than preempting them.
  // A late response always fails open (deliver now, quarantine nothing).
  if (expired()) {
    resp.deadline_exceeded = true;
    return resp;
  }
  MessageRecord r;
  r.message_id = req.message_id;
  r.header_seq = req.header_seq;
  r.x_mailer = req.x_mailer;
  EncodedExample x = encode_example(r, snap->model.features);
  if (cfg_.inject_scan_delay_ms > 0)
    std::this_thread::sleep_for(std::chrono::milliseconds(cfg_.inject_scan_delay_ms));
  if (expired()) {
    resp.deadline_exceeded = true;
    return resp;
  }
  resp.score = forward(snap->model, x);
  if (expired()) {
    resp.deadline_exceeded = true;
    resp.quarantine = false;
    return resp;
  }
  resp.quarantine = resp.score >= snap->threshold;
  return resp;
}

std::string QuarantineService::reload(const std::string& path) {
  std::string target;
  {
    std::lock_guard<std::mutex> lock(mu_);
    target = path.empty() ? cfg_.model_path : path;
  }
  auto fresh = std::make_shared<const Snapshot>(
      load_snapshot(target, cfg_.threshold_override));
  std::lock_guard<std::mutex> lock(mu_);
  snap_ = fresh;
  cfg_.model_path = target;
  return fresh->model.model_version;
}

void QuarantineService::start() {
  if (http_) throw std::logic_error("service already started");
  http_ = std::make_unique<HttpState>();
  httplib::Server& srv = http_->server;

  srv.new_task_queue = [n = cfg_.max_concurrency] {
    return new httplib::ThreadPool(static_cast<std::size_t>(n));
  };

  if (!cfg_.request_log_path.empty()) {
    http_->log.open(cfg_.request_log_path, std::ios::app);
    if (!http_->log)
      throw std::runtime_error("cannot open request log: " + cfg_.request_log_path);
  }

  srv.Post("/v1/scan", [this](const httplib::Request& q, httplib::Response& s) {
    try {
      ScanRequest req = parse_scan_request(q.body, cfg_.default_deadline_ms);
      ScanResponse resp = handle_scan(req);
      s.set_content(encode_scan_response(resp), "text/plain");
      if (http_->log.is_open()) {
        std::lock_guard<std::mutex> lock(http_->log_mu);
        http_->log << resp.request_id << ' ' << (resp.quarantine ? "quarantine" : "deliver")
                   << ' ' << fmt17(resp.score) << ' ' << resp.model_version
                   << (resp.deadline_exceeded ? " deadline_exceeded" : "") << '\n';
        http_->log.flush();
      }
    } catch (const std::exception& e) {
      s.status = 400;
      s.set_content(std::string("error: ") + e.what() + "\n", "text/plain");
    }
  });

  srv.Get("/v1/health", [this](const httplib::Request&, httplib::Response& s) {
    std::string body;
    kv_append(body, "status", "ok");
    kv_append(body, "model_version", model_version());
    s.set_content(body, "text/plain");
  });

  srv.Post("/v1/admin/reload", [this](const httplib::Request& q, httplib::Response& s) {
    try {
      std::string path;
      if (!q.body.empty()) {
        KvLines kv = KvLines::parse(q.body);
        if (auto v = kv.get("model_path")) path = *v;
      }
      std::string version = reload(path);
      std::string body;
      kv_append(body, "status", "ok");
      kv_append(body, "model_version", version);
      s.set_content(body, "text/plain");
    } catch (const std::exception& e) {
      s.status = 500;
      s.set_content(std::string("error: ") + e.what() + "\n", "text/plain");
    }
  });

  if (cfg_.port == 0) {
    int p = srv.bind_to_any_port(cfg_.host);
    if (p <= 0)
      throw std::runtime_error("cannot bind to " + cfg_.host + " (ephemeral port)");
    http_->bound_port = p;
  } else {
    if (!srv.bind_to_port(cfg_.host, cfg_.port))
      throw std::runtime_error("cannot bind to " + cfg_.host + ":" +
                               std::to_string(cfg_.port));
    http_->bound_port = cfg_.port;
  }
  http_->thread = std::thread([&srv] { srv.listen_after_bind(); });
  srv.wait_until_ready();
}

void QuarantineService::stop() {
  if (!http_) return;
  http_->server.stop();
  if (http_->thread.joinable()) http_->thread.join();
  http_.reset();
}

void QuarantineService::wait() {
  if (http_ && http_->thread.joinable()) http_->thread.join();
}

int QuarantineService::port() const {
  return http_ ? http_->bound_port : cfg_.port;
}

}  // namespace dq
