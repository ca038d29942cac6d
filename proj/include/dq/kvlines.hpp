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

#ifndef DQ_KVLINES_HPP_
#define DQ_KVLINES_HPP_

#include <charconv>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

#include "dq/headers.hpp"

// One "key: value" line per field; the format shared by config files and the
// service's request/response bodies. Keys are case-insensitive (stored
// lowercase), values keep their case. A blank line ends the block.

namespace dq {

class KvLines {
 public:
  static KvLines parse(std::string_view text) {
    KvLines kv;
    ParsedHeaders h = parse_header_block(text);
    if (h.skipped_lines > 0)
      throw std::runtime_error("malformed line in key-value block");
    kv.entries_ = std::move(h.entries);
    return kv;
  }

  std::optional<std::string> get(std::string_view key) const {
    for (const auto& e : entries_) {
      if (e.name == key) return strip(e.value);
    }
    return std::nullopt;
  }

  std::string require(std::string_view key) const {
    auto v = get(key);
    if (!v) throw std::runtime_error("missing field '" + std::string(key) + "'");
    return *v;
  }

  std::optional<long long> get_int(std::string_view key) const {
    auto v = get(key);
    if (!v) return std::nullopt;
    long long out = 0;
    auto [p, ec] = std::from_chars(v->data(), v->data() + v->size(), out);
    if (ec != std::errc{} || p != v->data() + v->size())
      throw std::runtime_error("field '" + std::string(key) +
                               "' is not an integer: '" + *v + "'");
    return out;
  }

  std::optional<double> get_double(std::string_view key) const {
    auto v = get(key);
    if (!v) return std::nullopt;
    double out = 0;
    auto [p, ec] = std::from_chars(v->data(), v->data() + v->size(), out);
    if (ec != std::errc{} || p != v->data() + v->size())
      throw std::runtime_error("field '" + std::string(key) + "' is not a number: '" +
                               *v + "'");
    return out;
  }

  std::optional<bool> get_bool(std::string_view key) const {
    auto v = get(key);
    if (!v) return std::nullopt;
    if (*v == "true") return true;
    if (*v == "false") return false;
    throw std::runtime_error("field '" + std::string(key) +
                             "' is not true/false: '" + *v + "'");
  }

  const std::vector<HeaderEntry>& entries() const { return entries_; }

 private:
  static std::string strip(std::string_view v) {
    while (!v.empty() && (v.back() == ' ' || v.back() == '\t')) v.remove_suffix(1);
    return std::string(v);
  }

  std::vector<HeaderEntry> entries_;
};

inline void kv_append(std::string& out, std::string_view key, std::string_view value) {
  out += key;
  out += ": ";
  out += value;
  out += '\n';
}

}  // namespace dq

#endif  // DQ_KVLINES_HPP_
