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

#ifndef DQ_HEADERS_HPP_
#define DQ_HEADERS_HPP_

#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace dq {

struct HeaderEntry {
  std::string name;   // lowercase, trimmed, no ':' or whitespace
  std::string value;  // unfolded, leading whitespace after ':' removed
  bool operator==(const HeaderEntry&) const = default;
};

// Ordered header list as it appeared in the raw block. Duplicate names are
// kept as separate entries in message order.
struct ParsedHeaders {
  std::vector<HeaderEntry> entries;
  std::size_t skipped_lines = 0;  // lines the parser had to drop
};

// Parses the header portion of a message (LF or CRLF line endings); stops at
// the first empty line. Continuation lines (leading space/tab) are appended
// to the previous entry's value with their leading whitespace kept. Never
// throws: malformed lines are dropped and counted in skipped_lines.
ParsedHeaders parse_header_block(std::string_view raw);

// Inverse of parse_header_block for well-formed entries:
// parse_header_block(serialize_header_block(h)).entries == h.entries.
std::string serialize_header_block(const ParsedHeaders& h);

// Value of the first "message-id" entry with the angle-bracket pair and
// surrounding whitespace stripped. Absent header or empty result -> nullopt.
std::optional<std::string> extract_message_id(const ParsedHeaders& h);

// Lowercase header names in message order, duplicates retained.
std::vector<std::string> header_sequence(const ParsedHeaders& h);

// Trimmed value of the first "x-mailer" entry; nullopt if absent.
std::optional<std::string> extract_x_mailer(const ParsedHeaders& h);

}  // namespace dq

#endif  // DQ_HEADERS_HPP_
