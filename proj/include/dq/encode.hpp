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

#ifndef DQ_ENCODE_HPP_
#define DQ_ENCODE_HPP_

#include <array>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "dq/record.hpp"

namespace dq {

// Character vocabulary for Message-ID encoding: a-z, A-Z, 0-9 and the symbols
// @ . - _ $ + = , plus the reserved EOS (string end / padding) and UNK
// (out-of-alphabet) entries. 71 entries total, dense indices.
class CharVocab {
 public:
  static CharVocab build();

  int index(char c) const {
    int i = lookup_[static_cast<unsigned char>(c)];
    return i >= 0 ? i : unk_;
  }
  int eos_index() const { return eos_; }
  int unk_index() const { return unk_; }
  int size() const { return static_cast<int>(tokens_.size()); }
  const std::vector<std::string>& tokens() const { return tokens_; }

  void write(std::ostream& os) const;
  static CharVocab read(std::istream& is);

 private:
  CharVocab() { lookup_.fill(-1); }
  std::array<int, 256> lookup_{};
  std::vector<std::string> tokens_;
  int eos_ = -1;
  int unk_ = -1;
};

// Header-name vocabulary: the top-K names of the training corpus plus EOS and
// UNK, and the encoded sequence length (95th percentile of per-message header
// counts, nearest-rank).
class HeaderVocab {
 public:
  int index(const std::string& name) const {
    auto it = map_.find(name);
    return it == map_.end() ? unk_ : it->second;
  }
  int eos_index() const { return eos_; }
  int unk_index() const { return unk_; }
  int size() const { return static_cast<int>(tokens_.size()); }
  int seq_len() const { return seq_len_; }
  const std::vector<std::string>& tokens() const { return tokens_; }

  void write(std::ostream& os) const;
  static HeaderVocab read(std::istream& is);

  friend HeaderVocab build_header_vocab(std::span<const MessageRecord>, int);

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, int> map_;
  int seq_len_ = 0;
  int eos_ = -1;
  int unk_ = -1;
};

// Normalized mail-client tokens: top-N by training frequency plus the two
// reserved categories for unknown and absent clients.
class MuaTable {
 public:
  int index(const std::optional<std::string>& normalized) const {
    if (!normalized) return missing_;
    auto it = map_.find(*normalized);
    return it == map_.end() ? unknown_ : it->second;
  }
  int unknown_index() const { return unknown_; }
  int missing_index() const { return missing_; }
  int size() const { return static_cast<int>(tokens_.size()); }
  const std::vector<std::string>& tokens() const { return tokens_; }

  void write(std::ostream& os) const;
  static MuaTable read(std::istream& is);

  friend MuaTable build_mua_table(std::span<const MessageRecord>, int);

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, int> map_;
  int unknown_ = -1;
  int missing_ = -1;
};

// The model's three fixed-shape inputs.
struct EncodedExample {
  std::vector<std::int32_t> msgid_ids;   // length l
  std::vector<std::int32_t> header_ids;  // length HeaderVocab::seq_len
  std::vector<double> mua_onehot;        // length MuaTable::size, sums to 1
  std::optional<int> label;
};

// All vocabularies plus the Message-ID input length l.
struct FeatureSpace {
  CharVocab chars = CharVocab::build();
  HeaderVocab headers;
  MuaTable muas;
  int msgid_len = 64;
};

CharVocab build_char_vocab();

// First l characters mapped through v (unknown -> UNK), padded with EOS.
// Absent Message-ID encodes as all EOS.
std::vector<std::int32_t> encode_message_id(const std::optional<std::string>& raw,
                                            const CharVocab& v, int l);

// Top-K header names (count desc, name asc on ties) from the training split;
// seq_len is the nearest-rank 95th percentile of header-sequence lengths.
HeaderVocab build_header_vocab(std::span<const MessageRecord> corpus, int k);

std::vector<std::int32_t> encode_header_seq(std::span<const std::string> names,
                                            const HeaderVocab& v);

// First whitespace-delimited token, lowercased; nullopt means the MISSING
// category (header absent or blank).
std::optional<std::string> normalize_x_mailer(const std::optional<std::string>& raw);

MuaTable build_mua_table(std::span<const MessageRecord> corpus, int n);

std::vector<double> encode_x_mailer(const std::optional<std::string>& normalized,
                                    const MuaTable& t);

EncodedExample encode_example(const MessageRecord& r, const FeatureSpace& fs);

}  // namespace dq

#endif  // DQ_ENCODE_HPP_
