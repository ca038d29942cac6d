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

#include "dq/replay.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <queue>
#include <sstream>
#include <stdexcept>

#include "dq/encode.hpp"

namespace dq {
namespace {

constexpr char kCsvHeader[] =
    "total_spam,baseline_caught,baseline_missed,dq_quarantined_of_missed,"
    "recovered,recovered_fraction,ham_total,ham_delayed,ham_delay_rate";

std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string fmt17(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string fmt3(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3f", v);
  return buf;
}

}  // namespace

BaselineFilter BaselineFilter::from_config(const GenConfig& config) {
  BaselineFilter b;
  for (const auto& c : config.campaigns) {
    b.available_at_[c.id] = c.start + c.detect_delay;
    b.max_delay_ = std::max(b.max_delay_, c.detect_delay);
  }
  return b;
}

bool BaselineFilter::is_spam(const MessageRecord& r, std::int64_t t) const {
  if (r.campaign_id) {
    auto it = available_at_.find(*r.campaign_id);
    if (it == available_at_.end())
      throw std::invalid_argument("unknown campaign '" + *r.campaign_id + "'");
    return t >= it->second;
  }
  if (ham_fp_rate > 0.0) {
    // Hash of record contents, not of query time, so the verdict stays pure.
    std::string key = (r.message_id ? *r.message_id : "") + "\n" + std::to_string(r.ts);
    return static_cast<double>(fnv1a(key) % 1000000) < ham_fp_rate * 1e6;
  }
  return false;
}

std::int64_t BaselineFilter::availability(const std::string& campaign_id) const {
  auto it = available_at_.find(campaign_id);
  if (it == available_at_.end())
    throw std::invalid_argument("unknown campaign '" + campaign_id + "'");
  return it->second;
}

std::int64_t BaselineFilter::max_detect_delay() const { return max_delay_; }

SimReport simulate(const TrainedModel& model,
                   const std::vector<MessageRecord>& records,
                   const BaselineFilter& baseline, const SimConfig& cfg) {
  if (cfg.quarantine_duration < 0)
    throw std::invalid_argument("quarantine_duration must be >= 0");
  if (!model.threshold)
    throw std::invalid_argument("model has no calibrated threshold");
  for (std::size_t i = 1; i < records.size(); ++i)
    if (records[i].ts < records[i - 1].ts)
      throw std::invalid_argument("corpus is not timestamp-sorted");

  BaselineFilter filter = baseline;
  filter.ham_fp_rate = cfg.ham_fp_rate;
  const double threshold = *model.threshold;

  std::vector<EncodedExample> xs;
  xs.reserve(records.size());
  for (const auto& r : records) xs.push_back(encode_example(r, model.features));
  std::vector<double> scores = predict_batch(model, xs);

  struct Release {
    std::int64_t t;
    std::size_t i;
    bool operator>(const Release& o) const { return t != o.t ? t > o.t : i > o.i; }
  };
  std::priority_queue<Release, std::vector<Release>, std::greater<Release>> pending;

  SimReport rep;
  std::size_t quarantined = 0, released = 0;

  auto process_release = [&](const Release& e) {
    ++released;
    const MessageRecord& r = records[e.i];
    if (filter.is_spam(r, e.t) && r.label == 1) rep.recovered++;
    // Otherwise the message leaves quarantine and is delivered late.
  };

  for (std::size_t i = 0; i < records.size(); ++i) {
    const MessageRecord& r = records[i];
    // Releases due at or before this arrival happen first; the verdict
    // depends only on time, so ordering within one instant cannot matter.
    while (!pending.empty() && pending.top().t <= r.ts) {
      Release e = pending.top();
      pending.pop();
      process_release(e);
    }
    bool spam = r.label == 1;
    (spam ? rep.total_spam : rep.ham_total)++;
    if (filter.is_spam(r, r.ts)) {
      if (spam) rep.baseline_caught++;
      continue;  // blocked at the gate, never reaches the quarantine model
    }
    if (spam) rep.baseline_missed++;
    if (scores[i] >= threshold) {
      ++quarantined;
      (spam ? rep.dq_quarantined_of_missed : rep.ham_delayed)++;
      pending.push({r.ts + cfg.quarantine_duration, i});
    }
  }
  while (!pending.empty()) {
    Release e = pending.top();
    pending.pop();
    process_release(e);
  }
  if (released != quarantined)
    throw std::logic_error("quarantine bookkeeping mismatch: " +
                           std::to_string(quarantined) + " in, " +
                           std::to_string(released) + " out");

  rep.recovered_fraction =
      rep.baseline_missed > 0
          ? static_cast<double>(rep.recovered) / static_cast<double>(rep.baseline_missed)
          : 0.0;
  rep.ham_delay_rate =
      rep.ham_total > 0
          ? static_cast<double>(rep.ham_delayed) / static_cast<double>(rep.ham_total)
          : 0.0;
  return rep;
}

std::string format_report(const SimReport& rep) {
  std::ostringstream os;
  os << "total_spam: " << rep.total_spam << '\n'
     << "baseline_caught: " << rep.baseline_caught << '\n'
     << "baseline_missed: " << rep.baseline_missed << '\n'
     << "dq_quarantined_of_missed: " << rep.dq_quarantined_of_missed << '\n'
     << "recovered: " << rep.recovered << '\n'
     << "recovered_fraction: " << fmt3(rep.recovered_fraction) << '\n'
     << "ham_total: " << rep.ham_total << '\n'
     << "ham_delayed: " << rep.ham_delayed << '\n'
     << "ham_delay_rate: " << fmt3(rep.ham_delay_rate) << '\n';
  return os.str();
}

void write_report(const std::string& path, const SimReport& rep) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open for writing: " + path);
  out << format_report(rep) << '\n'
      << kCsvHeader << '\n'
      << rep.total_spam << ',' << rep.baseline_caught << ',' << rep.baseline_missed
      << ',' << rep.dq_quarantined_of_missed << ',' << rep.recovered << ','
      << fmt17(rep.recovered_fraction) << ',' << rep.ham_total << ','
      << rep.ham_delayed << ',' << fmt17(rep.ham_delay_rate) << '\n';
  if (!out) throw std::runtime_error("write failed: " + path);
}

SimReport read_report_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open report file: " + path);
  std::string line;
  bool found = false;
  while (std::getline(in, line)) {
    if (line == kCsvHeader) {
      found = true;
      break;
    }
  }
  if (!found || !std::getline(in, line))
    throw std::runtime_error(path + ": no report CSV section found");

  SimReport rep;
  const char* pos = line.data();
  const char* end = line.data() + line.size();
  auto take_u64 = [&](std::size_t& v, bool last) {
    auto [next, ec] = std::from_chars(pos, end, v);
    if (ec != std::errc{} || (last ? next != end : (next == end || *next != ',')))
      throw std::runtime_error(path + ": malformed report CSV row");
    pos = last ? next : next + 1;
  };
  auto take_double = [&](double& v, bool last) {
    auto [next, ec] = std::from_chars(pos, end, v);
    if (ec != std::errc{} || (last ? next != end : (next == end || *next != ',')))
      throw std::runtime_error(path + ": malformed report CSV row");
    pos = last ? next : next + 1;
  };
  take_u64(rep.total_spam, false);
  take_u64(rep.baseline_caught, false);
  take_u64(rep.baseline_missed, false);
  take_u64(rep.dq_quarantined_of_missed, false);
  take_u64(rep.recovered, false);
  take_double(rep.recovered_fraction, false);
  take_u64(rep.ham_total, false);
  take_u64(rep.ham_delayed, false);
  take_double(rep.ham_delay_rate, true);
  return rep;
}

}  // namespace dq
