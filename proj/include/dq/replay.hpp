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

#ifndef DQ_REPLAY_HPP_
#define DQ_REPLAY_HPP_

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "dq/corpus.hpp"
#include "dq/model.hpp"
#include "dq/record.hpp"

// Discrete-event replay of a timestamped corpus through a signature-lagged
// baseline filter plus the quarantine model. Spam a campaign's signature does
// not yet cover slips past the baseline; if the model quarantines it and the
// signature lands before the quarantine expires, the re-scan at release
// catches it: that is the "recovered" count.

namespace dq {

// Oracle keyed on campaign metadata: a spam record is flagged once its
// campaign's signature is available (campaign start + detect delay). The
// verdict is a pure function of (record, query time), so replay order cannot
// change it. Ham is clean unless a nonzero false-positive rate is configured,
// in which case a deterministic per-record hash stands in for randomness.
class BaselineFilter {
 public:
  static BaselineFilter from_config(const GenConfig& config);

  bool is_spam(const MessageRecord& r, std::int64_t t) const;

  std::int64_t availability(const std::string& campaign_id) const;
  std::int64_t max_detect_delay() const;

  double ham_fp_rate = 0.0;

 private:
  std::map<std::string, std::int64_t> available_at_;
  std::int64_t max_delay_ = 0;
};

struct SimConfig {
  std::int64_t quarantine_duration = 21600;  // seconds in quarantine
  double ham_fp_rate = 0.0;
};

struct SimReport {
  std::size_t total_spam = 0;
  std::size_t baseline_caught = 0;
  std::size_t baseline_missed = 0;
  std::size_t dq_quarantined_of_missed = 0;
  std::size_t recovered = 0;  // quarantined AND caught by the release re-scan
  double recovered_fraction = 0.0;
  std::size_t ham_total = 0;
  std::size_t ham_delayed = 0;
  double ham_delay_rate = 0.0;
};

// Requires a timestamp-sorted corpus and a model with a calibrated threshold.
SimReport simulate(const TrainedModel& model,
                   const std::vector<MessageRecord>& records,
                   const BaselineFilter& baseline, const SimConfig& cfg);

// Summary block plus a one-row CSV whose header names the SimReport fields.
std::string format_report(const SimReport& rep);
void write_report(const std::string& path, const SimReport& rep);
SimReport read_report_csv(const std::string& path);

}  // namespace dq

#endif  // DQ_REPLAY_HPP_
