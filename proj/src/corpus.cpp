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

#include "dq/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

#include "dq/kvlines.hpp"

namespace dq {
namespace {

using json = nlohmann::json;

std::string_view charset(CharClass c) {
  switch (c) {
    case CharClass::kLower:    return "abcdefghijklmnopqrstuvwxyz";
    case CharClass::kDigits:   return "0123456789";
    case CharClass::kLowerHex: return "0123456789abcdef";
    case CharClass::kUpperHex: return "0123456789ABCDEF";
    case CharClass::kAlnum:
      return "abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ0123456789";
  }
  return "";
}

bool in_class(char ch, CharClass c) {
  return charset(c).find(ch) != std::string_view::npos;
}

using Rng = std::mt19937_64;

int rand_int(Rng& rng, int lo, int hi) {
  return std::uniform_int_distribution<int>(lo, hi)(rng);
}

std::int64_t rand_ts(Rng& rng, std::int64_t lo, std::int64_t hi) {
  return std::uniform_int_distribution<std::int64_t>(lo, hi)(rng);
}

bool chance(Rng& rng, double p) {
  if (p <= 0.0) return false;
  if (p >= 1.0) return true;
  return std::bernoulli_distribution(p)(rng);
}

std::string sample_segment(Rng& rng, CharClass c, int len) {
  std::string_view cs = charset(c);
  std::string out;
  out.reserve(static_cast<std::size_t>(len));
  for (int i = 0; i < len; ++i)
    out += cs[static_cast<std::size_t>(rand_int(rng, 0, static_cast<int>(cs.size()) - 1))];
  return out;
}

std::string sample_msgid(Rng& rng, const MsgidTemplate& t) {
  std::string local = t.prefix;
  for (std::size_t i = 0; i < t.segments.size(); ++i) {
    if (i > 0) local += t.separators[i - 1];
    local += sample_segment(rng, t.segments[i].char_class, t.segments[i].length);
  }
  const std::string& domain =
      t.domains[static_cast<std::size_t>(rand_int(rng, 0, static_cast<int>(t.domains.size()) - 1))];
  return local + "@" + domain;
}

std::string sample_junk_domain(Rng& rng) {
  static const char* kTlds[] = {"xyz", "top", "click", "info", "biz"};
  return sample_segment(rng, CharClass::kLower, rand_int(rng, 5, 10)) + "." +
         kTlds[rand_int(rng, 0, 4)];
}

// Version suffix like "16.3.4821.377"; the product prefix stays fixed so the
// normalized X-Mailer token is stable per client.
std::string sample_version(Rng& rng, int major) {
  std::ostringstream os;
  os << major << "." << rand_int(rng, 0, 9) << "." << rand_int(rng, 1000, 9999)
     << "." << rand_int(rng, 1, 999);
  return os.str();
}

struct VersionedMailer {
  std::string base;
  int major;
};

std::string sample_mailer(Rng& rng, const std::string& base, int major) {
  return base + " " + sample_version(rng, major);
}

int mailer_major(const std::string& profile_name) {
  if (profile_name == "desktop_outlook") return 16;
  if (profile_name == "mozilla_desktop") return 102;
  if (profile_name == "apple_desktop") return 16;
  if (profile_name == "webmail_rbox") return 5;
  if (profile_name == "gateway_xgate") return 3;
  return 1;
}

std::vector<std::string> sample_header_seq(Rng& rng, const MuaProfile& p) {
  std::vector<std::string> seq;
  seq.reserve(p.header_order.size());
  for (const auto& name : p.header_order) {
    bool optional = std::find(p.optional_headers.begin(), p.optional_headers.end(),
                              name) != p.optional_headers.end();
    if (optional && chance(rng, p.drop_prob)) continue;
    seq.push_back(name);
  }
  return seq;
}

bool contains(const std::vector<std::string>& v, const std::string& s) {
  return std::find(v.begin(), v.end(), s) != v.end();
}

MessageRecord make_ham(Rng& rng, const MuaProfile& p, std::int64_t t0, std::int64_t t1) {
  MessageRecord r;
  r.ts = rand_ts(rng, t0, t1);
  r.message_id = sample_msgid(rng, p.msgid_template);
  r.header_seq = sample_header_seq(rng, p);
  if (!p.x_mailer_base.empty() && contains(r.header_seq, "x-mailer"))
    r.x_mailer = sample_mailer(rng, p.x_mailer_base, mailer_major(p.name));
  r.label = 0;
  return r;
}

// ---- spam behaviors ----

std::string sample_junk_msgid(Rng& rng) {
  static const std::string kJunk =
      "abcdefghijklmnopqrstuvwxyz0123456789#%&!?*{}";
  int len = rand_int(rng, 10, 28);
  std::string local;
  local.reserve(static_cast<std::size_t>(len));
  for (int i = 0; i < len; ++i)
    local += kJunk[static_cast<std::size_t>(rand_int(rng, 0, static_cast<int>(kJunk.size()) - 1))];
  return local + "@" + sample_junk_domain(rng);
}

MessageRecord make_random_junk(Rng& rng) {
  static const char* kJunkMailers[] = {"BulkBlaster", "MailCannon", "TurboSend"};
  MessageRecord r;
  r.message_id = sample_junk_msgid(rng);
  std::vector<std::string> seq = {"received", "from",       "to",
                                  "subject",  "date",       "message-id",
                                  "content-type", "x-mailer"};
  std::vector<std::string> out;
  for (const auto& h : seq) {
    if ((h == "received" || h == "content-type") && chance(rng, 0.25)) continue;
    out.push_back(h);
  }
  r.header_seq = std::move(out);
  r.x_mailer = sample_mailer(rng, kJunkMailers[rand_int(rng, 0, 2)], rand_int(rng, 1, 9));
  r.label = 1;
  return r;
}

std::string truncate_local_part(Rng& rng, const std::string& msgid) {
  std::size_t at = msgid.rfind('@');
  std::string local = msgid.substr(0, at);
  std::string domain = msgid.substr(at);
  if (local.size() < 2) return local + "x" + domain;
  int cut = rand_int(rng, 1, static_cast<int>(local.size()) - 1);
  return local.substr(0, static_cast<std::size_t>(cut)) + domain;
}

MessageRecord make_mimicry(Rng& rng, const std::vector<MuaProfile>& profiles,
                           double mutation_rate) {
  const MuaProfile& target =
      profiles[static_cast<std::size_t>(rand_int(rng, 0, static_cast<int>(profiles.size()) - 1))];
  MessageRecord r;
  std::string msgid = sample_msgid(rng, target.msgid_template);
  if (chance(rng, mutation_rate)) msgid = truncate_local_part(rng, msgid);
  r.message_id = std::move(msgid);
  // Mimics replay the target's canonical order but botch one adjacency.
  std::vector<std::string> seq = target.header_order;
  if (seq.size() >= 2) {
    int j = rand_int(rng, 0, static_cast<int>(seq.size()) - 2);
    std::swap(seq[static_cast<std::size_t>(j)], seq[static_cast<std::size_t>(j) + 1]);
  }
  r.header_seq = std::move(seq);
  if (!target.x_mailer_base.empty() && contains(r.header_seq, "x-mailer"))
    r.x_mailer = sample_mailer(rng, target.x_mailer_base, mailer_major(target.name));
  r.label = 1;
  return r;
}

MessageRecord make_reorder(Rng& rng, const std::vector<MuaProfile>& profiles) {
  int a = rand_int(rng, 0, static_cast<int>(profiles.size()) - 1);
  const MuaProfile& pa = profiles[static_cast<std::size_t>(a)];
  MessageRecord r;
  r.message_id = sample_msgid(rng, pa.msgid_template);
  std::vector<std::string> seq = pa.header_order;
  std::shuffle(seq.begin(), seq.end(), rng);
  if (seq == pa.header_order && seq.size() >= 2) std::swap(seq[0], seq[1]);
  r.header_seq = std::move(seq);
  if (contains(r.header_seq, "x-mailer")) {
    // X-Mailer borrowed from a different client than the Message-ID imitates.
    int b = a;
    while (b == a || profiles[static_cast<std::size_t>(b)].x_mailer_base.empty())
      b = rand_int(rng, 0, static_cast<int>(profiles.size()) - 1);
    const MuaProfile& pb = profiles[static_cast<std::size_t>(b)];
    r.x_mailer = sample_mailer(rng, pb.x_mailer_base, mailer_major(pb.name));
  }
  r.label = 1;
  return r;
}

MessageRecord make_no_mailer(Rng& rng) {
  MessageRecord r;
  r.message_id = sample_segment(rng, CharClass::kAlnum, rand_int(rng, 8, 20)) + "@" +
                 sample_junk_domain(rng);
  std::vector<std::string> seq = {"received", "from",         "to",
                                  "subject",  "date",         "message-id",
                                  "mime-version", "content-type"};
  std::vector<std::string> out;
  for (const auto& h : seq) {
    if ((h == "received" || h == "mime-version") && chance(rng, 0.3)) continue;
    out.push_back(h);
  }
  r.header_seq = std::move(out);
  r.label = 1;
  return r;
}

// Integer counts proportional to weights summing exactly to total
// (largest-remainder rounding, ties to the lower index).
std::vector<int> largest_remainder(const std::vector<double>& weights, int total) {
  double sum = std::accumulate(weights.begin(), weights.end(), 0.0);
  std::vector<int> counts(weights.size(), 0);
  if (total <= 0) return counts;
  if (sum <= 0.0) throw std::invalid_argument("weights sum to zero");
  std::vector<double> rem(weights.size());
  int assigned = 0;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    double share = total * weights[i] / sum;
    counts[i] = static_cast<int>(std::floor(share));
    rem[i] = share - counts[i];
    assigned += counts[i];
  }
  std::vector<std::size_t> order(weights.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t x, std::size_t y) { return rem[x] > rem[y]; });
  for (int k = 0; k < total - assigned; ++k) counts[order[static_cast<std::size_t>(k)]]++;
  return counts;
}

MuaProfile make_profile(std::string name, MsgidTemplate tpl, std::string mailer,
                        std::vector<std::string> order,
                        std::vector<std::string> optional, double drop,
                        double weight) {
  MuaProfile p;
  p.name = std::move(name);
  p.msgid_template = std::move(tpl);
  p.x_mailer_base = std::move(mailer);
  p.header_order = std::move(order);
  p.optional_headers = std::move(optional);
  p.drop_prob = drop;
  p.legit_weight = weight;
  return p;
}

std::vector<MuaProfile> stock_profiles() {
  std::vector<MuaProfile> ps;

  ps.push_back(make_profile(
      "desktop_outlook",
      {"", {{CharClass::kLowerHex, 32}}, {}, {"outlook.example.com", "exchange.corp.example"}},
      "Microsoft Outlook",
      {"received", "from", "to", "subject", "date", "message-id", "mime-version",
       "content-type", "x-mailer", "x-priority", "thread-index"},
      {"x-priority", "thread-index"}, 0.45, 1.6));

  ps.push_back(make_profile(
      "mozilla_desktop",
      {"", {{CharClass::kAlnum, 12}, {CharClass::kAlnum, 10}}, {'.'},
       {"mail.mozzarella.example", "tbird.example.org"}},
      "Mozilla Thunderbird",
      {"message-id", "date", "from", "reply-to", "to", "subject", "mime-version",
       "content-type", "content-transfer-encoding", "x-mailer"},
      {"reply-to", "content-transfer-encoding"}, 0.5, 1.2));

  ps.push_back(make_profile(
      "apple_desktop",
      {"", {{CharClass::kUpperHex, 8}, {CharClass::kUpperHex, 4}, {CharClass::kUpperHex, 4},
            {CharClass::kUpperHex, 4}, {CharClass::kUpperHex, 12}},
       {'-', '-', '-', '-'}, {"icloud.example.com", "me.example.com"}},
      "Apple Mail",
      {"from", "content-type", "subject", "date", "to", "mime-version",
       "message-id", "x-mailer"},
      {}, 0.0, 1.0));

  ps.push_back(make_profile(
      "webmail_gmx", {"CA+", {{CharClass::kAlnum, 40}}, {}, {"mail.gxy.example"}},
      /*mailer=*/"",
      {"dkim-signature", "received", "from", "to", "subject", "date", "message-id",
       "mime-version", "content-type", "feedback-id"},
      {"feedback-id"}, 0.35, 1.4));

  ps.push_back(make_profile(
      "webmail_rbox",
      {"", {{CharClass::kLowerHex, 16}, {CharClass::kDigits, 10}}, {'.'},
       {"rbox.example.ru", "web.rbox.example"}},
      "RBox WebAgent",
      {"received", "dkim-signature", "message-id", "from", "to", "subject", "date",
       "mime-version", "content-type", "x-mailer"},
      {"dkim-signature"}, 0.4, 0.9));

  ps.push_back(make_profile(
      "gateway_xgate",
      {"", {{CharClass::kDigits, 6}, {CharClass::kLowerHex, 24}, {CharClass::kLowerHex, 8}},
       {'.', '$'}, {"mta.xgate.example"}},
      "XGate Relay",
      {"received", "received", "x-envelope-from", "from", "to", "subject", "date",
       "message-id", "content-type", "x-mailer"},
      {"x-envelope-from"}, 0.3, 0.7));

  return ps;
}

std::vector<Campaign> stock_campaigns(std::int64_t t0, std::int64_t t1) {
  double span = static_cast<double>(t1 - t0);
  auto at = [&](double f) { return t0 + static_cast<std::int64_t>(f * span); };
  std::vector<Campaign> cs;
  cs.push_back({"cmp-junk-01", SpamBehavior::kRandomJunk, at(0.05), at(0.45), 1.0,
                3 * 3600, 0.7});
  cs.push_back({"cmp-mimic-02", SpamBehavior::kMimicry, at(0.25), at(0.70), 1.2,
                6 * 3600, 0.7});
  cs.push_back({"cmp-reorder-03", SpamBehavior::kReorder, at(0.50), at(0.90), 0.9,
                2 * 3600, 0.7});
  cs.push_back({"cmp-nomailer-04", SpamBehavior::kNoMailer, at(0.60), at(0.98), 1.1,
                4 * 3600, 0.7});
  return cs;
}

}  // namespace

bool MsgidTemplate::matches(const std::string& message_id) const {
  std::size_t at = message_id.rfind('@');
  if (at == std::string::npos) return false;
  std::string_view local(message_id.data(), at);
  std::string_view domain(message_id.data() + at + 1, message_id.size() - at - 1);
  if (std::find(domains.begin(), domains.end(), domain) == domains.end()) return false;
  if (local.substr(0, prefix.size()) != prefix) return false;
  std::size_t pos = prefix.size();
  for (std::size_t i = 0; i < segments.size(); ++i) {
    if (i > 0) {
      if (pos >= local.size() || local[pos] != separators[i - 1]) return false;
      ++pos;
    }
    std::size_t len = static_cast<std::size_t>(segments[i].length);
    if (pos + len > local.size()) return false;
    for (std::size_t k = 0; k < len; ++k)
      if (!in_class(local[pos + k], segments[i].char_class)) return false;
    pos += len;
  }
  return pos == local.size();
}

GenConfig default_gen_config() {
  GenConfig g;
  g.profiles = stock_profiles();
  g.campaigns = stock_campaigns(g.time_start, g.time_end);
  return g;
}

GenConfig load_gen_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config file: " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  KvLines kv = KvLines::parse(buf.str());
  GenConfig g;
  if (auto v = kv.get_int("n_messages")) g.n_messages = static_cast<int>(*v);
  if (auto v = kv.get_double("spam_fraction")) g.spam_fraction = *v;
  if (auto v = kv.get_int("time_start")) g.time_start = *v;
  if (auto v = kv.get_int("time_end")) g.time_end = *v;
  if (auto v = kv.get_double("label_flip_rate")) g.label_flip_rate = *v;
  if (auto v = kv.get_int("seed")) g.seed = static_cast<std::uint64_t>(*v);
  g.profiles = stock_profiles();
  g.campaigns = stock_campaigns(g.time_start, g.time_end);
  return g;
}

std::vector<MessageRecord> generate_corpus(const GenConfig& config) {
  if (config.n_messages < 0) throw std::invalid_argument("n_messages must be >= 0");
  if (!(config.spam_fraction >= 0.0 && config.spam_fraction <= 1.0))
    throw std::invalid_argument("spam_fraction must be in [0, 1]");
  if (config.time_end <= config.time_start)
    throw std::invalid_argument("time_end must be after time_start");
  if (!(config.label_flip_rate >= 0.0 && config.label_flip_rate <= 1.0))
    throw std::invalid_argument("label_flip_rate must be in [0, 1]");

  int n_spam = static_cast<int>(std::llround(config.n_messages * config.spam_fraction));
  int n_ham = config.n_messages - n_spam;
  if (n_ham > 0 && config.profiles.empty())
    throw std::invalid_argument("no client profiles configured");

  Rng rng(config.seed);
  std::vector<MessageRecord> out;
  out.reserve(static_cast<std::size_t>(config.n_messages));

  if (n_ham > 0) {
    std::vector<double> w;
    for (const auto& p : config.profiles) w.push_back(p.legit_weight);
    std::vector<int> counts = largest_remainder(w, n_ham);
    for (std::size_t i = 0; i < config.profiles.size(); ++i)
      for (int k = 0; k < counts[i]; ++k)
        out.push_back(make_ham(rng, config.profiles[i], config.time_start, config.time_end));
  }

  if (n_spam > 0) {
    if (config.campaigns.empty())
      throw std::invalid_argument("no campaigns configured but spam_fraction > 0");
    // Campaign volume is rate times the part of its window inside the
    // generation span; timestamps are uniform in that window, which is what a
    // Poisson arrival process looks like once the count is fixed.
    std::vector<double> w;
    std::vector<std::pair<std::int64_t, std::int64_t>> windows;
    for (const auto& c : config.campaigns) {
      std::int64_t lo = std::max(c.start, config.time_start);
      std::int64_t hi = std::min(c.end, config.time_end);
      double dur = hi > lo ? static_cast<double>(hi - lo) : 0.0;
      w.push_back(c.volume_rate > 0 ? c.volume_rate * dur : 0.0);
      windows.emplace_back(lo, hi);
    }
    if (std::accumulate(w.begin(), w.end(), 0.0) <= 0.0)
      throw std::invalid_argument("no campaign overlaps the generation window");
    std::vector<int> counts = largest_remainder(w, n_spam);
    for (std::size_t i = 0; i < config.campaigns.size(); ++i) {
      const Campaign& c = config.campaigns[i];
      for (int k = 0; k < counts[i]; ++k) {
        MessageRecord r;
        switch (c.behavior) {
          case SpamBehavior::kRandomJunk: r = make_random_junk(rng); break;
          case SpamBehavior::kMimicry:
            r = make_mimicry(rng, config.profiles, c.mutation_rate);
            break;
          case SpamBehavior::kReorder: r = make_reorder(rng, config.profiles); break;
          case SpamBehavior::kNoMailer: r = make_no_mailer(rng); break;
        }
        r.ts = rand_ts(rng, windows[i].first, windows[i].second);
        r.campaign_id = c.id;
        out.push_back(std::move(r));
      }
    }
  }

  if (config.label_flip_rate > 0.0)
    for (auto& r : out)
      if (chance(rng, config.label_flip_rate)) r.label = 1 - r.label;

  std::stable_sort(out.begin(), out.end(),
                   [](const MessageRecord& a, const MessageRecord& b) { return a.ts < b.ts; });
  return out;
}

CorpusSplit split_by_time(const std::vector<MessageRecord>& records,
                          double train_fraction) {
  if (!(train_fraction > 0.0 && train_fraction < 1.0))
    throw std::invalid_argument("train_fraction must be in (0, 1)");
  CorpusSplit s;
  if (records.empty()) return s;
  std::vector<std::int64_t> ts;
  ts.reserve(records.size());
  for (const auto& r : records) ts.push_back(r.ts);
  std::sort(ts.begin(), ts.end());
  std::size_t rank = static_cast<std::size_t>(
      std::ceil(train_fraction * static_cast<double>(ts.size())));
  if (rank == 0) rank = 1;
  std::int64_t cut = ts[rank - 1];
  for (const auto& r : records)
    (r.ts <= cut ? s.train : s.test).push_back(r);
  if (s.train.empty() || s.test.empty())
    std::fprintf(stderr, "dq: warning: time split has an empty %s side\n",
                 s.train.empty() ? "train" : "test");
  return s;
}

std::string record_to_json(const MessageRecord& r) {
  json j;
  j["ts"] = r.ts;
  if (r.message_id) j["message_id"] = *r.message_id;
  j["header_seq"] = r.header_seq;
  if (r.x_mailer) j["x_mailer"] = *r.x_mailer;
  j["label"] = r.label;
  if (r.campaign_id) j["campaign_id"] = *r.campaign_id;
  return j.dump();
}

MessageRecord record_from_json(const std::string& line) {
  json j = json::parse(line);
  if (!j.is_object()) throw std::runtime_error("record is not a JSON object");
  MessageRecord r;
  if (!j.contains("ts") || !j["ts"].is_number_integer())
    throw std::runtime_error("missing or non-integer 'ts'");
  r.ts = j["ts"].get<std::int64_t>();
  if (j.contains("message_id")) {
    if (!j["message_id"].is_string()) throw std::runtime_error("'message_id' is not a string");
    r.message_id = j["message_id"].get<std::string>();
  }
  if (!j.contains("header_seq") || !j["header_seq"].is_array())
    throw std::runtime_error("missing or non-array 'header_seq'");
  for (const auto& h : j["header_seq"]) {
    if (!h.is_string()) throw std::runtime_error("'header_seq' entry is not a string");
    r.header_seq.push_back(h.get<std::string>());
  }
  if (j.contains("x_mailer")) {
    if (!j["x_mailer"].is_string()) throw std::runtime_error("'x_mailer' is not a string");
    r.x_mailer = j["x_mailer"].get<std::string>();
  }
  if (!j.contains("label") || !j["label"].is_number_integer())
    throw std::runtime_error("missing or non-integer 'label'");
  r.label = j["label"].get<int>();
  if (r.label != 0 && r.label != 1) throw std::runtime_error("'label' must be 0 or 1");
  if (j.contains("campaign_id")) {
    if (!j["campaign_id"].is_string()) throw std::runtime_error("'campaign_id' is not a string");
    r.campaign_id = j["campaign_id"].get<std::string>();
  }
  return r;
}

void write_corpus(const std::string& path, const std::vector<MessageRecord>& records) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open for writing: " + path);
  for (const auto& r : records) out << record_to_json(r) << '\n';
  if (!out) throw std::runtime_error("write failed: " + path);
}

std::vector<MessageRecord> read_corpus(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open corpus file: " + path);
  std::vector<MessageRecord> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    try {
      out.push_back(record_from_json(line));
    } catch (const std::exception& e) {
      throw std::runtime_error(path + ": line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  return out;
}

}  // namespace dq
