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

#ifndef DQ_RECORD_HPP_
#define DQ_RECORD_HPP_

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace dq {

// One labeled message's metadata as stored in corpora. label == 1 iff
// campaign_id is present.
struct MessageRecord {
  std::int64_t ts = 0;  // epoch seconds
  std::optional<std::string> message_id;
  std::vector<std::string> header_seq;  // lowercase names, message order
  std::optional<std::string> x_mailer;
  int label = 0;  // 0 = ham, 1 = spam
  std::optional<std::string> campaign_id;

  bool operator==(const MessageRecord&) const = default;
};

}  // namespace dq

#endif  // DQ_RECORD_HPP_
