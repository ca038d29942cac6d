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

#include "dq/headers.hpp"

#include <algorithm>
#include <cctype>

namespace dq {

namespace {

bool is_ws(char c) { return c == ' ' || c == '\t'; }

std::string_view trim(std::string_view s) {
  while (!s.empty() && is_ws(s.front())) s.remove_prefix(1);
  while (!s.empty() && is_ws(s.back())) s.remove_suffix(1);
  return s;
}

std::string to_lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(), [](unsigned char c) {
    return static_cast<char>(std::tolower(c));
  });
  return out;
}

// Field names may not contain whitespace or control bytes.
bool valid_name(std::string_view name) {
  if (name.empty()) return false;
  for (unsigned char c : name) {
    if (c <= 0x20 || c == 0x7f) return false;
  }
  return true;
}

}  // namespace

ParsedHeaders parse_header_block(std::string_view raw) {
  ParsedHeaders out;
  std::size_t pos = 0;
  while (pos < raw.size()) {
    std::size_t eol = raw.find('\n', pos);
    std::string_view line =
        raw.substr(pos, eol == std::string_view::npos ? std::string_view::npos : eol - pos);
    pos = eol == std::string_view::npos ? raw.size() : eol + 1;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);

    if (line.empty()) break;  // end of header block

    if (is_ws(line.front())) {
      // Continuation of the previous entry; leading whitespace is kept so the
      // unfolded value still separates the folded parts.
      if (out.entries.empty()) {
        ++out.skipped_lines;
      } else {
        out.entries.back().value.append(line);
      }
      continue;
    }

    std::size_t colon = line.find(':');
    if (colon == std::string_view::npos) {
      ++out.skipped_lines;
      continue;
    }
    std::string_view name = trim(line.substr(0, colon));
    if (!valid_name(name)) {
      ++out.skipped_lines;
      continue;
    }
    std::string_view value = line.substr(colon + 1);
    while (!value.empty() && is_ws(value.front())) value.remove_prefix(1);
    out.entries.push_back({to_lower(name), std::string(value)});
  }
  return out;
}

std::string serialize_header_block(const ParsedHeaders& h) {
  std::string out;
  for (const auto& e : h.entries) {
    out += e.name;
    if (!e.value.empty() && is_ws(e.value.front())) {
      // A value that begins with whitespace only survives reparsing as a
      // folded continuation line.
      out += ":\n";
      out += e.value;
    } else {
      out += ": ";
      out += e.value;
    }
    out += '\n';
  }
  return out;
}

std::optional<std::string> extract_message_id(const ParsedHeaders& h) {
  for (const auto& e : h.entries) {
    if (e.name != "message-id") continue;
    std::string_view v = trim(e.value);
    if (v.size() >= 2 && v.front() == '<' && v.back() == '>') {
      v = trim(v.substr(1, v.size() - 2));
    }
    std::string id;
    id.reserve(v.size());
    for (char c : v) {
      if (c != '<' && c != '>') id += c;
    }
    if (id.empty()) return std::nullopt;
    return id;
  }
  return std::nullopt;
}

std::vector<std::string> header_sequence(const ParsedHeaders& h) {
  std::vector<std::string> names;
  names.reserve(h.entries.size());
  for (const auto& e : h.entries) names.push_back(e.name);
  return names;
}

std::optional<std::string> extract_x_mailer(const ParsedHeaders& h) {
  for (const auto& e : h.entries) {
    if (e.name == "x-mailer") return std::string(trim(e.value));
  }
  return std::nullopt;
}

}  // namespace dq
