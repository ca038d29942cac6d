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

#include "dq/encode.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>
#include <stdexcept>

namespace dq {

namespace {

constexpr char kEosToken[] = "<EOS>";
constexpr char kUnkToken[] = "<UNK>";
constexpr char kUnknownMuaToken[] = "<UNKNOWN_MUA>";
constexpr char kMissingMuaToken[] = "<MISSING_MUA>";

// Shared scheme for both sequence encoders: truncate at len, pad with EOS.
template <typename Seq, typename IndexFn>
std::vector<std::int32_t> encode_sequence(const Seq& items, int len, int eos,
                                          IndexFn index_of) {
  std::vector<std::int32_t> out(static_cast<std::size_t>(len), eos);
  std::size_t n = std::min(items.size(), static_cast<std::size_t>(len));
  for (std::size_t i = 0; i < n; ++i) out[i] = index_of(items[i]);
  return out;
}

void write_token_lines(std::ostream& os, const std::vector<std::string>& tokens) {
  for (std::size_t i = 0; i < tokens.size(); ++i) os << i << ' ' << tokens[i] << '\n';
}

std::vector<std::string> read_token_lines(std::istream& is, int count,
                                          const char* what) {
  std::vector<std::string> tokens;
  tokens.reserve(count);
  std::string line;
  for (int i = 0; i < count; ++i) {
    if (!std::getline(is, line)) throw std::runtime_error(std::string(what) + ": truncated vocabulary");
    std::istringstream ls(line);
    long idx = -1;
    std::string tok;
    if (!(ls >> idx >> tok) || idx != i) {
      throw std::runtime_error(std::string(what) + ": bad vocabulary line '" + line + "'");
    }
    tokens.push_back(tok);
  }
  return tokens;
}

// Frequency table -> top-k tokens, count desc then name asc.
std::vector<std::string> top_k_tokens(const std::map<std::string, std::size_t>& counts,
                                      int k) {
  std::vector<std::pair<std::string, std::size_t>> items(counts.begin(), counts.end());
  std::sort(items.begin(), items.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });
  if (items.size() > static_cast<std::size_t>(k)) items.resize(k);
  std::vector<std::string> tokens;
  tokens.reserve(items.size());
  for (auto& item : items) tokens.push_back(std::move(item.first));
  return tokens;
}

}  // namespace

CharVocab CharVocab::build() {
  CharVocab v;
  auto add = [&v](char c) {
    v.lookup_[static_cast<unsigned char>(c)] = static_cast<int>(v.tokens_.size());
    v.tokens_.emplace_back(1, c);
  };
  for (char c = 'a'; c <= 'z'; ++c) add(c);
  for (char c = 'A'; c <= 'Z'; ++c) add(c);
  for (char c = '0'; c <= '9'; ++c) add(c);
  for (char c : {'@', '.', '-', '_', '$', '+', '='}) add(c);
  v.eos_ = static_cast<int>(v.tokens_.size());
  v.tokens_.emplace_back(kEosToken);
  v.unk_ = static_cast<int>(v.tokens_.size());
  v.tokens_.emplace_back(kUnkToken);
  return v;
}

void CharVocab::write(std::ostream& os) const {
  os << "charvocab v1 " << tokens_.size() << '\n';
  write_token_lines(os, tokens_);
}

CharVocab CharVocab::read(std::istream& is) {
  std::string line;
  if (!std::getline(is, line)) throw std::runtime_error("charvocab: missing header");
  std::istringstream hs(line);
  std::string tag, ver;
  int count = 0;
  if (!(hs >> tag >> ver >> count) || tag != "charvocab" || ver != "v1") {
    throw std::runtime_error("charvocab: unsupported header '" + line + "'");
  }
  auto tokens = read_token_lines(is, count, "charvocab");
  CharVocab v = CharVocab::build();
  if (tokens != v.tokens_) throw std::runtime_error("charvocab: alphabet mismatch");
  return v;
}

CharVocab build_char_vocab() { return CharVocab::build(); }

std::vector<std::int32_t> encode_message_id(const std::optional<std::string>& raw,
                                            const CharVocab& v, int l) {
  if (l < 1) throw std::invalid_argument("encode_message_id: l must be >= 1");
  if (!raw) return std::vector<std::int32_t>(static_cast<std::size_t>(l), v.eos_index());
  return encode_sequence(*raw, l, v.eos_index(), [&v](char c) { return v.index(c); });
}

HeaderVocab build_header_vocab(std::span<const MessageRecord> corpus, int k) {
  if (k < 1) throw std::invalid_argument("build_header_vocab: K must be >= 1");
  if (corpus.empty()) throw std::runtime_error("build_header_vocab: empty corpus");

  std::map<std::string, std::size_t> counts;
  std::vector<std::size_t> lengths;
  lengths.reserve(corpus.size());
  for (const auto& r : corpus) {
    lengths.push_back(r.header_seq.size());
    for (const auto& name : r.header_seq) ++counts[name];
  }

  HeaderVocab v;
  v.tokens_ = top_k_tokens(counts, k);
  for (std::size_t i = 0; i < v.tokens_.size(); ++i) v.map_[v.tokens_[i]] = static_cast<int>(i);
  v.eos_ = static_cast<int>(v.tokens_.size());
  v.tokens_.emplace_back(kEosToken);
  v.unk_ = static_cast<int>(v.tokens_.size());
  v.tokens_.emplace_back(kUnkToken);

  // Nearest-rank 95th percentile of header-sequence lengths.
  std::sort(lengths.begin(), lengths.end());
  std::size_t rank = static_cast<std::size_t>(
      std::ceil(0.95 * static_cast<double>(lengths.size())));
  if (rank < 1) rank = 1;
  v.seq_len_ = static_cast<int>(std::max<std::size_t>(lengths[rank - 1], 1));
  return v;
}

void HeaderVocab::write(std::ostream& os) const {
  os << "headervocab v1 " << tokens_.size() << ' ' << seq_len_ << '\n';
  write_token_lines(os, tokens_);
}

HeaderVocab HeaderVocab::read(std::istream& is) {
  std::string line;
  if (!std::getline(is, line)) throw std::runtime_error("headervocab: missing header");
  std::istringstream hs(line);
  std::string tag, ver;
  int count = 0, seq_len = 0;
  if (!(hs >> tag >> ver >> count >> seq_len) || tag != "headervocab" || ver != "v1") {
    throw std::runtime_error("headervocab: unsupported header '" + line + "'");
  }
  if (count < 2 || seq_len < 1) throw std::runtime_error("headervocab: bad geometry");
  HeaderVocab v;
  v.tokens_ = read_token_lines(is, count, "headervocab");
  if (v.tokens_[count - 2] != kEosToken || v.tokens_[count - 1] != kUnkToken) {
    throw std::runtime_error("headervocab: missing reserved entries");
  }
  v.eos_ = count - 2;
  v.unk_ = count - 1;
  for (int i = 0; i < count - 2; ++i) v.map_[v.tokens_[i]] = i;
  v.seq_len_ = seq_len;
  return v;
}

std::vector<std::int32_t> encode_header_seq(std::span<const std::string> names,
                                            const HeaderVocab& v) {
  return encode_sequence(names, v.seq_len(), v.eos_index(),
                         [&v](const std::string& n) { return v.index(n); });
}

std::optional<std::string> normalize_x_mailer(const std::optional<std::string>& raw) {
  if (!raw) return std::nullopt;
  std::size_t begin = raw->find_first_not_of(" \t");
  if (begin == std::string::npos) return std::nullopt;  // blank value == absent
  std::size_t end = raw->find_first_of(" \t", begin);
  std::string token = raw->substr(begin, end == std::string::npos ? std::string::npos
                                                                  : end - begin);
  std::transform(token.begin(), token.end(), token.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return token;
}

MuaTable build_mua_table(std::span<const MessageRecord> corpus, int n) {
  if (n < 1) throw std::invalid_argument("build_mua_table: N must be >= 1");
  if (corpus.empty()) throw std::runtime_error("build_mua_table: empty corpus");

  std::map<std::string, std::size_t> counts;
  for (const auto& r : corpus) {
    if (auto tok = normalize_x_mailer(r.x_mailer)) ++counts[*tok];
  }

  MuaTable t;
  t.tokens_ = top_k_tokens(counts, n);
  for (std::size_t i = 0; i < t.tokens_.size(); ++i) t.map_[t.tokens_[i]] = static_cast<int>(i);
  t.unknown_ = static_cast<int>(t.tokens_.size());
  t.tokens_.emplace_back(kUnknownMuaToken);
  t.missing_ = static_cast<int>(t.tokens_.size());
  t.tokens_.emplace_back(kMissingMuaToken);
  return t;
}

void MuaTable::write(std::ostream& os) const {
  os << "muatable v1 " << tokens_.size() << '\n';
  write_token_lines(os, tokens_);
}

MuaTable MuaTable::read(std::istream& is) {
  std::string line;
  if (!std::getline(is, line)) throw std::runtime_error("muatable: missing header");
  std::istringstream hs(line);
  std::string tag, ver;
  int count = 0;
  if (!(hs >> tag >> ver >> count) || tag != "muatable" || ver != "v1") {
    throw std::runtime_error("muatable: unsupported header '" + line + "'");
  }
  if (count < 2) throw std::runtime_error("muatable: bad geometry");
  MuaTable t;
  t.tokens_ = read_token_lines(is, count, "muatable");
  if (t.tokens_[count - 2] != kUnknownMuaToken || t.tokens_[count - 1] != kMissingMuaToken) {
    throw std::runtime_error("muatable: missing reserved entries");
  }
  t.unknown_ = count - 2;
  t.missing_ = count - 1;
  for (int i = 0; i < count - 2; ++i) t.map_[t.tokens_[i]] = i;
  return t;
}

std::vector<double> encode_x_mailer(const std::optional<std::string>& normalized,
                                    const MuaTable& t) {
  std::vector<double> onehot(static_cast<std::size_t>(t.size()), 0.0);
  onehot[static_cast<std::size_t>(t.index(normalized))] = 1.0;
  return onehot;
}

EncodedExample encode_example(const MessageRecord& r, const FeatureSpace& fs) {
  EncodedExample ex;
  ex.msgid_ids = encode_message_id(r.message_id, fs.chars, fs.msgid_len);
  ex.header_ids = encode_header_seq(r.header_seq, fs.headers);
  ex.mua_onehot = encode_x_mailer(normalize_x_mailer(r.x_mailer), fs.muas);
  if (r.label == 0 || r.label == 1) ex.label = r.label;
  return ex;
}

}  // namespace dq
