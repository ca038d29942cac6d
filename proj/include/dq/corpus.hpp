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

#ifndef DQ_CORPUS_HPP_
#define DQ_CORPUS_HPP_

#include <cstdint>
#include <string>
#include <vector>

#include "dq/record.hpp"

// Synthetic mail-metadata corpus: legitimate traffic comes from a fixed set
// of mail-client profiles, spam from timed campaigns with distinct forging
// behaviors. Everything is driven by one seed so a config generates the same
// corpus every time.

namespace dq {

enum class CharClass { kLower, kDigits, kLowerHex, kUpperHex, kAlnum };

struct MsgidSegment {
  CharClass char_class;
  int length;
};

// Shape of a client's Message-ID local part plus the domains it sends from.
// Example: segments {hex16, digits10} with separator '.' over domain
// "rbox.example.ru" yields "3f9a...e1.8204957613@rbox.example.ru".
struct MsgidTemplate {
  std::string prefix;                   // literal local-part prefix, may be empty
  std::vector<MsgidSegment> segments;   // at least one
  std::vector<char> separators;        // size == segments.size() - 1
  std::vector<std::string> domains;    // at least one

  // True when `message_id` (without angle brackets) could have been produced
  // by this template: prefix, per-segment length and character class,
  // separators, and a domain from the pool all line up.
  bool matches(const std::string& message_id) const;
};

struct MuaProfile {
  std::string name;
  MsgidTemplate msgid_template;
  // X-Mailer product prefix, e.g. "Microsoft Outlook"; empty when the client
  // never sends the header. A version suffix is sampled per message.
  std::string x_mailer_base;
  // Header names in this client's emission order (lowercase). Entries in
  // optional_headers may be dropped per message with drop_prob.
  std::vector<std::string> header_order;
  std::vector<std::string> optional_headers;
  double drop_prob = 0.0;
  double legit_weight = 1.0;
};

enum class SpamBehavior { kRandomJunk, kMimicry, kReorder, kNoMailer };

struct Campaign {
  std::string id;
  SpamBehavior behavior;
  std::int64_t start = 0;  // active window [start, end], unix seconds
  std::int64_t end = 0;
  double volume_rate = 1.0;      // relative messages per unit time
  std::int64_t detect_delay = 0;  // seconds until a baseline filter knows it
  double mutation_rate = 0.7;    // mimicry only: chance of a corrupted copy
};

struct GenConfig {
  int n_messages = 60000;
  double spam_fraction = 0.4;
  std::int64_t time_start = 1700000000;
  std::int64_t time_end = 1700000000 + 14 * 86400;
  double label_flip_rate = 0.0;
  std::uint64_t seed = 1;
  std::vector<MuaProfile> profiles;
  std::vector<Campaign> campaigns;
};

// The six stock client profiles and four stock campaigns, with campaign
// windows placed inside [time_start, time_end].
GenConfig default_gen_config();

// Scalar fields (n_messages, spam_fraction, time_start, time_end,
// label_flip_rate, seed) read from a key-value file; profiles and campaigns
// are the stock set re-derived for the configured time span.
GenConfig load_gen_config(const std::string& path);

// Generates the corpus sorted by timestamp (stable for ties). Spam counts per
// campaign are proportional to volume_rate times window length; ham counts
// per profile follow legit_weight. Throws on an empty profile/campaign set
// when the respective side has messages to emit.
std::vector<MessageRecord> generate_corpus(const GenConfig& config);

// Time-ordered split: records with ts <= the train_fraction quantile go to
// train. Warns on stderr when either side is empty.
struct CorpusSplit {
  std::vector<MessageRecord> train;
  std::vector<MessageRecord> test;
};
CorpusSplit split_by_time(const std::vector<MessageRecord>& records,
                          double train_fraction);

// JSONL round trip, one record per line. Readers reject unparseable lines
// with the 1-based line number in the error.
void write_corpus(const std::string& path, const std::vector<MessageRecord>& records);
std::vector<MessageRecord> read_corpus(const std::string& path);

std::string record_to_json(const MessageRecord& r);
MessageRecord record_from_json(const std::string& line);

}  // namespace dq

#endif  // DQ_CORPUS_HPP_
