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

// Release gate. Each criterion prints one [PASS]/[FAIL] line; the process
// exits nonzero if any selected criterion fails. Run a single criterion with
// --only N. This binary is intentionally separate from the unit tests: it
// re-derives every expectation from scratch (finite differences, brute-force
// sweeps, a reference encoder, live HTTP traffic, checksummed CLI artifacts)
// so a regression in the production code cannot hide behind a shared helper.

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <functional>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "httplib.h"

#include "dq/corpus.hpp"
#include "dq/encode.hpp"
#include "dq/eval.hpp"
#include "dq/kernels.hpp"
#include "dq/model.hpp"
#include "dq/replay.hpp"
#include "dq/service.hpp"
#include "dq/tensor.hpp"
#include "support/fd.hpp"
#include "support/ref_encoder.hpp"
#include "support/tmpdir.hpp"

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

struct Failure {
  std::string what;
};

// Assertion helpers: failures collect into a list instead of aborting, so one
// criterion reports everything wrong with it in a single run.
struct Checker {
  std::vector<std::string> failures;

  void expect(bool ok, const std::string& what) {
    if (!ok) failures.push_back(what);
  }
  template <typename T>
  void expect_eq(const T& got, const T& want, const std::string& what) {
    if (!(got == want)) {
      std::ostringstream os;
      os << what << " (got " << got << ", want " << want << ")";
      failures.push_back(os.str());
    }
  }
  void expect_lt(double got, double bound, const std::string& what) {
    if (!(got < bound)) {
      std::ostringstream os;
      os << what << " (got " << got << ", bound " << bound << ")";
      failures.push_back(os.str());
    }
  }
  void expect_ge(double got, double bound, const std::string& what) {
    if (!(got >= bound)) {
      std::ostringstream os;
      os << what << " (got " << got << ", bound " << bound << ")";
      failures.push_back(os.str());
    }
  }
  bool ok() const { return failures.empty(); }
};

std::uint64_t fnv1a_bytes(const std::string& s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::uint64_t file_checksum(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("checksum: cannot open " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  return fnv1a_bytes(buf.str());
}

int run_cli(const std::string& args) {
  std::string cmd = std::string(DQ_BIN) + " " + args + " > /dev/null 2>&1";
  int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

// Small model geometry shared by the gradient and replay criteria.
dq::ModelConfig tiny_config() {
  dq::ModelConfig c;
  c.l = 16;
  c.char_embed_dim = 4;
  c.header_embed_dim = 4;
  c.msgid_filters = 6;
  c.msgid_kernel_sizes = {5, 3};
  c.msgid_pool_after = {2};
  c.msgid_pool_window = 2;
  c.msgid_pool_stride = 2;
  c.header_filters = 5;
  c.header_kernel_size = 2;
  c.dense_hidden = 8;
  c.dropout_rate = 0.5;
  return c;
}

dq::FeatureSpace features_for(const std::vector<dq::MessageRecord>& corpus, int l,
                              int header_k = 16, int mua_n = 8) {
  dq::FeatureSpace fs;
  fs.chars = dq::build_char_vocab();
  fs.headers = dq::build_header_vocab(corpus, header_k);
  fs.muas = dq::build_mua_table(corpus, mua_n);
  fs.msgid_len = l;
  return fs;
}

std::vector<dq::EncodedExample> encode_all(const std::vector<dq::MessageRecord>& rs,
                                           const dq::FeatureSpace& fs) {
  std::vector<dq::EncodedExample> xs;
  xs.reserve(rs.size());
  for (const auto& r : rs) xs.push_back(dq::encode_example(r, fs));
  return xs;
}

// ---------------------------------------------------------------------------
// Criterion 1: finite-difference gradient checks, 20 seeds, < 2 minutes.
// ---------------------------------------------------------------------------

double weighted_sum(const dq::Tensor2& t) {
  double s = 0;
  for (std::size_t i = 0; i < t.size(); ++i)
    s += (0.25 + 0.05 * static_cast<double>(i % 13)) * t.data()[i];
  return s;
}

void weighted_sum_grad(dq::Tensor2& g) {
  for (std::size_t i = 0; i < g.size(); ++i)
    g.data()[i] = 0.25 + 0.05 * static_cast<double>(i % 13);
}

void fill_normal(dq::Tensor2& t, std::mt19937_64& rng) {
  std::normal_distribution<double> d(0.0, 1.0);
  for (std::size_t i = 0; i < t.size(); ++i) t.data()[i] = d(rng);
}

// Worst relative error across all layer checks for one seed.
double layer_gradcheck_worst(std::uint64_t seed, Checker& ck) {
  std::mt19937_64 rng(seed);
  double worst = 0.0;
  auto track = [&](const dqtest::FdReport& rep, const char* layer) {
    worst = std::max(worst, rep.max_rel_err);
    ck.expect(rep.checked > 0, std::string(layer) + ": no coordinates judged");
  };

  {  // embedding
    dq::Tensor2 table(9, 5);
    fill_normal(table, rng);
    std::vector<std::int32_t> ids = {2, 7, 2, 0, 8, 3};
    dq::Tensor2 out(static_cast<int>(ids.size()), table.cols());
    auto loss = [&]() {
      dq::embedding_forward(ids, table, out);
      return weighted_sum(out);
    };
    loss();
    dq::Tensor2 d_out(out.rows(), out.cols());
    weighted_sum_grad(d_out);
    dq::Tensor2 d_table(table.rows(), table.cols());
    dq::embedding_backward(ids, d_out, d_table);
    track(dqtest::check_gradient(table.data(), table.size(), d_table.data(), loss),
          "embedding");
  }
  {  // conv1d, all three gradients
    const int t = 9, e = 4, k = 3, f = 2;
    dq::Tensor2 x(t, e), w(f, k * e), b(1, f), out(t - k + 1, f);
    fill_normal(x, rng);
    fill_normal(w, rng);
    fill_normal(b, rng);
    auto loss = [&]() {
      dq::conv1d_forward(x, w, b, k, out);
      return weighted_sum(out);
    };
    loss();
    dq::Tensor2 d_out(out.rows(), out.cols());
    weighted_sum_grad(d_out);
    dq::Tensor2 d_x(t, e), d_w(f, k * e), d_b(1, f);
    dq::conv1d_backward(x, w, k, d_out, d_x, d_w, d_b);
    track(dqtest::check_gradient(w.data(), w.size(), d_w.data(), loss), "conv1d/w");
    track(dqtest::check_gradient(b.data(), b.size(), d_b.data(), loss), "conv1d/b");
    track(dqtest::check_gradient(x.data(), x.size(), d_x.data(), loss), "conv1d/x");
  }
  {  // relu
    dq::Tensor2 x(6, 7), out(6, 7);
    fill_normal(x, rng);
    auto loss = [&]() {
      dq::relu_forward(x, out);
      return weighted_sum(out);
    };
    loss();
    dq::Tensor2 d_out(6, 7), d_x(6, 7);
    weighted_sum_grad(d_out);
    dq::relu_backward(x, d_out, d_x);
    track(dqtest::check_gradient(x.data(), x.size(), d_x.data(), loss), "relu");
  }
  {  // maxpool
    dq::Tensor2 x(9, 4), out(3, 4);
    fill_normal(x, rng);
    std::vector<std::int32_t> argmax;
    auto loss = [&]() {
      dq::maxpool1d_forward(x, 3, 3, out, argmax);
      return weighted_sum(out);
    };
    loss();
    dq::Tensor2 d_out(3, 4), d_x(9, 4);
    weighted_sum_grad(d_out);
    dq::maxpool1d_backward(argmax, d_out, d_x);
    track(dqtest::check_gradient(x.data(), x.size(), d_x.data(), loss), "maxpool");
  }
  {  // dense
    dq::Tensor2 x(2, 6), w(4, 12), b(1, 4), out(1, 4);
    fill_normal(x, rng);
    fill_normal(w, rng);
    fill_normal(b, rng);
    auto loss = [&]() {
      dq::dense_forward(x, w, b, out);
      return weighted_sum(out);
    };
    loss();
    dq::Tensor2 d_out(1, 4), d_x(2, 6), d_w(4, 12), d_b(1, 4);
    weighted_sum_grad(d_out);
    dq::dense_backward(x, w, d_out, d_x, d_w, d_b);
    track(dqtest::check_gradient(w.data(), w.size(), d_w.data(), loss), "dense/w");
    track(dqtest::check_gradient(b.data(), b.size(), d_b.data(), loss), "dense/b");
    track(dqtest::check_gradient(x.data(), x.size(), d_x.data(), loss), "dense/x");
  }
  {  // dropout under a fixed mask
    dq::Tensor2 x(1, 10), out(1, 10);
    fill_normal(x, rng);
    std::vector<double> mask(10, 2.0);
    for (std::size_t i = 0; i < mask.size(); i += 3) mask[i] = 0.0;
    auto loss = [&]() {
      dq::dropout_forward(x, mask, out);
      return weighted_sum(out);
    };
    loss();
    dq::Tensor2 d_out(1, 10), d_x(1, 10);
    weighted_sum_grad(d_out);
    dq::dropout_backward(d_out, mask, d_x);
    track(dqtest::check_gradient(x.data(), x.size(), d_x.data(), loss), "dropout");
  }
  {  // sigmoid + bce as one head
    std::normal_distribution<double> d(0.0, 2.0);
    double z = d(rng);
    for (int label : {0, 1}) {
      auto f = [&]() { return dq::bce_loss(dq::sigmoid(z), label).loss; };
      double analytic = dq::bce_loss(dq::sigmoid(z), label).d_logit;
      track(dqtest::check_gradient(&z, 1, &analytic, f), "sigmoid+bce");
    }
  }
  return worst;
}

double e2e_gradcheck_worst(std::uint64_t seed, Checker& ck) {
  // A fresh tiny model and one encoded example per seed; finite differences
  // against every parameter tensor.
  std::mt19937_64 rng(seed * 1000003ULL + 17);
  std::vector<dq::MessageRecord> corpus;
  const std::string hex = "0123456789abcdef";
  for (int i = 0; i < 30; ++i) {
    dq::MessageRecord r;
    r.ts = i;
    r.label = static_cast<int>(rng() % 2);
    std::string id;
    for (int j = 0; j < 10; ++j) id += hex[rng() % 16];
    r.message_id = id + (r.label ? "@junk.click" : "@corp.example");
    r.header_seq = r.label ? std::vector<std::string>{"from", "x-bulk", "to"}
                           : std::vector<std::string>{"received", "from", "to", "date"};
    if (!r.label) r.x_mailer = "Outlook 16.0";
    corpus.push_back(std::move(r));
  }
  auto fs = features_for(corpus, tiny_config().l, 8, 4);
  dq::TrainedModel m = dq::build_model(tiny_config(), std::move(fs), seed);
  auto x = dq::encode_example(corpus[seed % corpus.size()], m.features);
  const int label = static_cast<int>(seed % 2);

  auto loss = [&]() {
    double z = dq::forward_logit(m, x, {});
    return dq::bce_loss(dq::sigmoid(z), label).loss;
  };
  dq::ModelParams grads = dq::zeros_like(m.params);
  double z = dq::forward_logit(m, x, {});
  dq::backprop_logit(m, x, {}, dq::bce_loss(dq::sigmoid(z), label).d_logit, grads);

  double worst = 0.0;
  auto params = dq::tensor_list(m.params);
  auto glist = dq::tensor_list(grads);
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto rep = dqtest::check_gradient(params[i].tensor->data(), params[i].tensor->size(),
                                      glist[i].tensor->data(), loss);
    ck.expect(rep.checked > 0, "e2e " + params[i].name + ": no coordinates judged");
    worst = std::max(worst, rep.max_rel_err);
  }
  return worst;
}

bool criterion_1() {
  auto t0 = Clock::now();
  Checker ck;
  double worst_layer = 0.0, worst_e2e = 0.0;
  const int n_seeds = 20;
  for (std::uint64_t seed = 1; seed <= n_seeds; ++seed) {
    double wl = layer_gradcheck_worst(seed, ck);
    double we = e2e_gradcheck_worst(seed, ck);
    worst_layer = std::max(worst_layer, wl);
    worst_e2e = std::max(worst_e2e, we);
    ck.expect_lt(wl, 1e-5, "per-layer rel err at seed " + std::to_string(seed));
    ck.expect_lt(we, 1e-4, "end-to-end rel err at seed " + std::to_string(seed));
  }
  double elapsed = seconds_since(t0);
  ck.expect_lt(elapsed, 120.0, "runtime seconds");
  std::printf("  seeds %d, worst layer rel err %.3g, worst e2e rel err %.3g, %.1fs\n",
              n_seeds, worst_layer, worst_e2e, elapsed);
  for (const auto& f : ck.failures) std::printf("  !! %s\n", f.c_str());
  return ck.ok();
}

// ---------------------------------------------------------------------------
// Criterion 2: encoder conformance + 10,000-input fuzz vs a naive reference.
// ---------------------------------------------------------------------------

bool criterion_2() {
  Checker ck;
  dq::CharVocab cv = dq::build_char_vocab();

  // Verbatim rules.
  ck.expect_eq(cv.size(), 71, "character vocabulary size");
  ck.expect(cv.index('a') != cv.index('A'), "case-sensitive character indices");
  ck.expect_eq(cv.index('#'), cv.unk_index(), "out-of-alphabet char maps to UNK");

  std::string id40 = "5ced853647da4fd3689a26db412fa4c1@foo.com";
  auto enc = dq::encode_message_id(id40, cv, 64);
  ck.expect_eq(enc.size(), std::size_t{64}, "encoded length is l");
  bool pad_ok = true;
  for (std::size_t i = 40; i < 64; ++i) pad_ok &= enc[i] == cv.eos_index();
  ck.expect(pad_ok, "EOS padding after the raw id");
  auto truncated = dq::encode_message_id(std::string(100, 'q'), cv, 64);
  bool trunc_ok = truncated.size() == 64;
  for (auto v : truncated) trunc_ok &= v == cv.index('q');
  ck.expect(trunc_ok, "truncation keeps the first l characters");

  {  // 95th percentile sequence length, nearest rank
    std::vector<dq::MessageRecord> corpus;
    for (int len = 1; len <= 100; ++len)
      corpus.push_back({0, std::nullopt,
                        std::vector<std::string>(static_cast<std::size_t>(len), "from"),
                        std::nullopt, 0, std::nullopt});
    ck.expect_eq(dq::build_header_vocab(corpus, 4).seq_len(), 95,
                 "L_h nearest-rank percentile over 1..100");
  }

  auto mailer = dq::normalize_x_mailer(
      std::string("Microsoft Windows Live Mail 14.0.8117.416"));
  ck.expect(mailer.has_value() && *mailer == "microsoft",
            "X-Mailer normalization keeps the lowercased first token");

  // Fuzz equivalence against the reference implementation.
  std::mt19937_64 rng(0xFACADE);
  auto random_string = [&](int max_len, bool printable_only) {
    int len = static_cast<int>(rng() % static_cast<std::uint64_t>(max_len + 1));
    std::string s;
    for (int i = 0; i < len; ++i) {
      char c = printable_only ? static_cast<char>(32 + rng() % 95)
                              : static_cast<char>(rng() % 256);
      if (c == '\0') c = 'x';
      s += c;
    }
    return s;
  };
  const std::vector<std::string> name_pool = {
      "received", "from", "to", "subject", "date", "message-id", "mime-version",
      "content-type", "x-mailer", "x-priority", "dkim-signature", "reply-to"};

  long cases = 0, mismatches = 0;
  for (int round = 0; round < 25 && mismatches == 0; ++round) {
    std::vector<dq::MessageRecord> corpus;
    std::vector<std::vector<std::string>> ref_seqs;
    std::vector<std::optional<std::string>> ref_mailers;
    int corpus_n = 25 + static_cast<int>(rng() % 50);
    for (int i = 0; i < corpus_n; ++i) {
      dq::MessageRecord r;
      int n_headers = static_cast<int>(rng() % 10);
      for (int k = 0; k < n_headers; ++k)
        r.header_seq.push_back(name_pool[rng() % name_pool.size()]);
      if (rng() % 3 != 0) r.x_mailer = random_string(20, true);
      ref_seqs.push_back(r.header_seq);
      ref_mailers.push_back(r.x_mailer);
      corpus.push_back(std::move(r));
    }
    int k = 1 + static_cast<int>(rng() % 10);
    int n = 1 + static_cast<int>(rng() % 5);
    dq::HeaderVocab hv = dq::build_header_vocab(corpus, k);
    dq::MuaTable mt = dq::build_mua_table(corpus, n);
    auto ref_hv = dqtest::ref_build_header_vocab(ref_seqs, k);
    auto ref_mt = dqtest::ref_build_mua_table(ref_mailers, n);
    if (hv.seq_len() != ref_hv.seq_len) {
      ck.expect(false, "seq_len mismatch vs reference");
      break;
    }

    for (int trial = 0; trial < 400; ++trial) {
      std::optional<std::string> id;
      if (rng() % 8 != 0) id = random_string(90, false);
      int l = 1 + static_cast<int>(rng() % 80);
      cases++;
      if (dq::encode_message_id(id, cv, l) != dqtest::ref_encode_message_id(id, l))
        mismatches++;

      std::vector<std::string> seq;
      int sn = static_cast<int>(rng() % 12);
      for (int s = 0; s < sn; ++s)
        seq.push_back(rng() % 4 == 0 ? random_string(10, true)
                                     : name_pool[rng() % name_pool.size()]);
      cases++;
      if (dq::encode_header_seq(seq, hv) != dqtest::ref_encode_header_seq(seq, ref_hv))
        mismatches++;

      std::optional<std::string> xm;
      if (rng() % 5 != 0) xm = random_string(24, true);
      cases++;
      if (dq::encode_x_mailer(dq::normalize_x_mailer(xm), mt) !=
          dqtest::ref_encode_x_mailer(xm, ref_mt))
        mismatches++;
    }
  }
  ck.expect(cases >= 10000, "at least 10,000 fuzz cases (ran " + std::to_string(cases) + ")");
  ck.expect_eq(mismatches, 0L, "fuzz mismatches vs reference encoder");

  std::printf("  %ld fuzz cases, %ld mismatches\n", cases, mismatches);
  for (const auto& f : ck.failures) std::printf("  !! %s\n", f.c_str());
  return ck.ok();
}

// ---------------------------------------------------------------------------
// Criterion 3: desk-scale experiment, 5 seeds, >= 4 must clear the bar.
// ---------------------------------------------------------------------------

bool criterion_3() {
  auto t0 = Clock::now();
  int passed = 0;
  const std::uint64_t seeds[5] = {1, 2, 3, 4, 5};

  for (std::uint64_t seed : seeds) {
    dq::GenConfig gen = dq::default_gen_config();
    gen.n_messages = 60000;
    gen.spam_fraction = 0.4;
    gen.seed = seed;
    auto corpus = dq::generate_corpus(gen);
    auto split = dq::split_by_time(corpus, 0.75);

    auto fs = features_for(split.train, dq::ModelConfig{}.l, 32, 64);
    auto train_xs = encode_all(split.train, fs);
    auto test_xs = encode_all(split.test, fs);

    dq::TrainedModel m = dq::build_model(dq::ModelConfig{}, fs, seed);
    dq::TrainConfig tc;
    tc.epochs = 9;
    tc.seed = seed;
    dq::train(m, train_xs, tc);

    // Operating threshold from the last tenth of the train period, never from
    // the test split.
    std::vector<std::int64_t> ts;
    ts.reserve(split.train.size());
    for (const auto& r : split.train) ts.push_back(r.ts);
    std::sort(ts.begin(), ts.end());
    std::size_t rank =
        static_cast<std::size_t>(std::ceil(0.9 * static_cast<double>(ts.size())));
    std::int64_t cut = ts[std::max<std::size_t>(rank, 1) - 1];
    std::vector<dq::EncodedExample> cal_xs;
    std::vector<int> cal_labels;
    for (std::size_t i = 0; i < split.train.size(); ++i) {
      if (split.train[i].ts > cut) {
        cal_xs.push_back(train_xs[i]);
        cal_labels.push_back(split.train[i].label);
      }
    }
    auto cal_scores = dq::predict_batch(m, cal_xs);
    auto cal = dq::calibrate_threshold(cal_scores, cal_labels, 0.99);

    auto test_scores = dq::predict_batch(m, test_xs);
    std::vector<int> test_labels;
    test_labels.reserve(split.test.size());
    for (const auto& r : split.test) test_labels.push_back(r.label);
    double auc = dq::pr_auc(dq::pr_curve(test_scores, test_labels));

    bool ok = auc >= 0.95 && cal.achieved_recall >= 0.5 && cal.feasible;
    passed += ok ? 1 : 0;
    std::printf("  seed %llu: test pr-auc %.6f, calibration recall %.4f%s -> %s\n",
                static_cast<unsigned long long>(seed), auc, cal.achieved_recall,
                cal.feasible ? "" : " (target precision infeasible)",
                ok ? "ok" : "MISS");
  }
  double elapsed = seconds_since(t0);
  std::printf("  %d/5 seeds passed, %.0fs total\n", passed, elapsed);
  bool ok = passed >= 4 && elapsed < 15 * 60.0;
  if (elapsed >= 15 * 60.0) std::printf("  !! runtime budget exceeded\n");
  return ok;
}

// ---------------------------------------------------------------------------
// Criterion 4: replay properties on a trained model.
// ---------------------------------------------------------------------------

bool criterion_4() {
  Checker ck;
  dq::GenConfig gen = dq::default_gen_config();
  gen.n_messages = 6000;
  gen.seed = 11;
  auto corpus = dq::generate_corpus(gen);
  auto split = dq::split_by_time(corpus, 0.75);

  // Full-size architecture: the qualitative band in (c) assumes a model that
  // actually learns the campaigns, which the test-only tiny geometry does not.
  auto fs = features_for(split.train, dq::ModelConfig{}.l, 32, 64);
  auto train_xs = encode_all(split.train, fs);
  dq::TrainedModel m = dq::build_model(dq::ModelConfig{}, fs, 11);
  dq::TrainConfig tc;
  tc.seed = 11;
  dq::train(m, train_xs, tc);

  std::vector<int> train_labels;
  for (const auto& r : split.train) train_labels.push_back(r.label);
  auto cal = dq::calibrate_threshold(dq::predict_batch(m, train_xs), train_labels, 0.99);
  m.threshold = cal.threshold;

  dq::BaselineFilter baseline = dq::BaselineFilter::from_config(gen);

  // (a) D = 0 recovers nothing, exactly.
  dq::SimConfig zero;
  zero.quarantine_duration = 0;
  dq::SimReport rep0 = dq::simulate(m, corpus, baseline, zero);
  ck.expect_eq(rep0.recovered, std::size_t{0}, "(a) recovered at D=0");
  ck.expect(rep0.recovered_fraction == 0.0, "(a) recovered_fraction at D=0");

  // (b) D past every delay: recovered_fraction == recall on missed spam.
  auto scores = dq::predict_batch(m, encode_all(corpus, m.features));
  std::size_t missed = 0, missed_hit = 0;
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    const auto& r = corpus[i];
    if (r.label != 1) continue;
    if (baseline.is_spam(r, r.ts)) continue;  // caught at arrival
    missed++;
    if (scores[i] >= *m.threshold) missed_hit++;
  }
  double recall_on_missed =
      missed ? static_cast<double>(missed_hit) / static_cast<double>(missed) : 0.0;

  dq::SimConfig big;
  big.quarantine_duration = baseline.max_detect_delay() + 1;
  dq::SimReport repb = dq::simulate(m, corpus, baseline, big);
  ck.expect(missed > 0, "(b) baseline missed some spam");
  ck.expect(std::fabs(repb.recovered_fraction - recall_on_missed) <= 0.05,
            "(b) recovered_fraction within 5pp of recall-on-missed (got " +
                std::to_string(repb.recovered_fraction) + " vs " +
                std::to_string(recall_on_missed) + ")");

  // (c) the default scenario lands in the qualitative band.
  dq::SimReport repc = dq::simulate(m, corpus, baseline, dq::SimConfig{});
  ck.expect(repc.recovered_fraction >= 0.25 && repc.recovered_fraction <= 1.0,
            "(c) default recovered_fraction in [0.25, 1.0] (got " +
                std::to_string(repc.recovered_fraction) + ")");

  std::printf("  D=0 recovered %zu; D>max recovered_fraction %.4f vs recall %.4f; "
              "default %.4f\n",
              rep0.recovered, repb.recovered_fraction, recall_on_missed,
              repc.recovered_fraction);
  for (const auto& f : ck.failures) std::printf("  !! %s\n", f.c_str());
  return ck.ok();
}

// ---------------------------------------------------------------------------
// Criterion 5: service contract over live HTTP.
// ---------------------------------------------------------------------------

struct ServiceModels {
  std::string path_v1, path_v2;
  std::string version_v1, version_v2;
  // Small-geometry pair for the reload burst, where fast reloads matter more
  // than representative inference cost.
  std::string path_t1, path_t2;
  std::string version_t1, version_t2;
};

ServiceModels make_service_models(const dqtest::TempDir& dir) {
  ServiceModels sm;
  dq::GenConfig gen = dq::default_gen_config();
  gen.n_messages = 2000;
  gen.seed = 201;
  auto corpus = dq::generate_corpus(gen);
  // Default-size architecture so the latency numbers reflect the real model.
  auto fs = features_for(corpus, dq::ModelConfig{}.l, 32, 64);
  dq::TrainedModel m1 = dq::build_model(dq::ModelConfig{}, fs, 1);
  m1.threshold = 0.5;
  dq::TrainedModel m2 = dq::build_model(dq::ModelConfig{}, fs, 2);
  m2.threshold = 0.5;
  sm.path_v1 = dir.file("v1.dqm");
  sm.path_v2 = dir.file("v2.dqm");
  dq::save_model(m1, sm.path_v1);
  dq::save_model(m2, sm.path_v2);
  sm.version_v1 = m1.model_version;
  sm.version_v2 = m2.model_version;

  auto tiny_fs = features_for(corpus, tiny_config().l);
  dq::TrainedModel t1 = dq::build_model(tiny_config(), tiny_fs, 3);
  t1.threshold = 0.5;
  dq::TrainedModel t2 = dq::build_model(tiny_config(), tiny_fs, 4);
  t2.threshold = 0.5;
  sm.path_t1 = dir.file("t1.dqm");
  sm.path_t2 = dir.file("t2.dqm");
  dq::save_model(t1, sm.path_t1);
  dq::save_model(t2, sm.path_t2);
  sm.version_t1 = t1.model_version;
  sm.version_t2 = t2.model_version;
  return sm;
}

dq::ScanRequest sample_request(const std::string& id, int deadline_ms) {
  dq::ScanRequest r;
  r.request_id = id;
  r.message_id = "00af9c2b44d1e6f7a8b9c0d1e2f30415@mail.example";
  r.header_seq = {"received", "from", "to", "subject", "date", "message-id",
                  "mime-version", "content-type"};
  r.x_mailer = "Microsoft Outlook 16.0.5430.1000";
  r.deadline_ms = deadline_ms;
  return r;
}

bool criterion_5() {
  Checker ck;
  dqtest::TempDir dir;
  ServiceModels sm = make_service_models(dir);

  {  // (a) concurrent identical requests
    dq::ServiceConfig cfg;
    cfg.port = 0;
    cfg.model_path = sm.path_v1;
    dq::QuarantineService svc(cfg);
    svc.start();
    const int n = 100;
    std::vector<std::string> bodies(n);
    std::string wire = dq::encode_scan_request(sample_request("same", 1000));
    std::vector<std::thread> threads;
    for (int i = 0; i < n; ++i) {
      threads.emplace_back([&, i] {
        httplib::Client c("127.0.0.1", svc.port());
        c.set_read_timeout(30, 0);
        auto res = c.Post("/v1/scan", wire, "text/plain");
        if (res && res->status == 200) bodies[static_cast<std::size_t>(i)] = res->body;
      });
    }
    for (auto& t : threads) t.join();
    svc.stop();
    int identical = 0;
    for (const auto& b : bodies)
      if (!bodies[0].empty() && b == bodies[0]) identical++;
    ck.expect(!bodies[0].empty(), "(a) first concurrent response nonempty");
    ck.expect_eq(identical, n, "(a) identical concurrent responses");
    std::printf("  (a) %d/%d identical concurrent decisions\n", identical, n);
  }

  {  // (b) injected delay forces fail-open on every affected request
    dq::ServiceConfig cfg;
    cfg.port = 0;
    cfg.model_path = sm.path_v1;
    cfg.inject_scan_delay_ms = 50;
    dq::QuarantineService svc(cfg);
    svc.start();
    httplib::Client c("127.0.0.1", svc.port());
    c.set_read_timeout(30, 0);
    const int n = 60;
    int failed_open = 0;
    for (int i = 0; i < n; ++i) {
      auto res = c.Post("/v1/scan",
                        dq::encode_scan_request(sample_request("d" + std::to_string(i), 10)),
                        "text/plain");
      if (!res || res->status != 200) continue;
      auto resp = dq::parse_scan_response(res->body);
      if (resp.deadline_exceeded && !resp.quarantine) failed_open++;
    }
    svc.stop();
    ck.expect_eq(failed_open, n, "(b) fail-open rate under injected delay");
    std::printf("  (b) %d/%d requests failed open\n", failed_open, n);
  }

  {  // (c) reload under a 1,000-request burst
    dq::ServiceConfig cfg;
    cfg.port = 0;
    cfg.model_path = sm.path_t1;
    dq::QuarantineService svc(cfg);
    svc.start();

    std::atomic<bool> stop_reloading{false};
    std::atomic<int> reloads{0};
    std::thread reloader([&] {
      bool flip = false;
      while (!stop_reloading.load()) {
        svc.reload(flip ? sm.path_t2 : sm.path_t1);
        reloads.fetch_add(1);
        flip = !flip;
        std::this_thread::sleep_for(std::chrono::milliseconds(2));
      }
    });

    const int n_threads = 8, per_thread = 125;
    std::atomic<int> answered{0}, version_ok{0};
    std::vector<std::thread> threads;
    for (int t = 0; t < n_threads; ++t) {
      threads.emplace_back([&, t] {
        httplib::Client c("127.0.0.1", svc.port());
        c.set_read_timeout(30, 0);
        for (int i = 0; i < per_thread; ++i) {
          auto res = c.Post(
              "/v1/scan",
              dq::encode_scan_request(sample_request(
                  "b" + std::to_string(t) + "-" + std::to_string(i), 1000)),
              "text/plain");
          if (res && res->status == 200) {
            answered.fetch_add(1);
            auto resp = dq::parse_scan_response(res->body);
            if (resp.model_version == sm.version_t1 ||
                resp.model_version == sm.version_t2)
              version_ok.fetch_add(1);
          }
        }
      });
    }
    for (auto& t : threads) t.join();
    stop_reloading.store(true);
    reloader.join();
    svc.stop();

    ck.expect_eq(answered.load(), n_threads * per_thread, "(c) answered requests");
    ck.expect_eq(version_ok.load(), n_threads * per_thread,
                 "(c) responses with a known version string");
    ck.expect_ge(reloads.load(), 10, "(c) reloads overlapping the burst");
    std::printf("  (c) %d/%d answered, %d consistent versions, %d reloads\n",
                answered.load(), n_threads * per_thread, version_ok.load(),
                reloads.load());
  }

  {  // (d) p99 latency at default config, no induced delay
    dq::ServiceConfig cfg;
    cfg.port = 0;
    cfg.model_path = sm.path_v1;
    dq::QuarantineService svc(cfg);
    svc.start();
    httplib::Client c("127.0.0.1", svc.port());
    c.set_read_timeout(30, 0);
    std::string wire = dq::encode_scan_request(sample_request("lat", 1000));
    for (int i = 0; i < 50; ++i) c.Post("/v1/scan", wire, "text/plain");  // warm up
    std::vector<double> lat_ms;
    const int n = 500;
    for (int i = 0; i < n; ++i) {
      auto t0 = Clock::now();
      auto res = c.Post("/v1/scan", wire, "text/plain");
      double ms = seconds_since(t0) * 1000.0;
      if (res && res->status == 200) lat_ms.push_back(ms);
    }
    svc.stop();
    ck.expect_eq(lat_ms.size(), std::size_t{n}, "(d) all latency probes answered");
    std::sort(lat_ms.begin(), lat_ms.end());
    double p99 = lat_ms[static_cast<std::size_t>(
        std::ceil(0.99 * static_cast<double>(lat_ms.size()))) - 1];
    ck.expect_lt(p99, 10.0, "(d) p99 scan latency ms");
    std::printf("  (d) p50 %.2fms p99 %.2fms over %zu requests\n",
                lat_ms[lat_ms.size() / 2], p99, lat_ms.size());
  }

  for (const auto& f : ck.failures) std::printf("  !! %s\n", f.c_str());
  return ck.ok();
}

// ---------------------------------------------------------------------------
// Criterion 6: evaluation vs exhaustive brute force, >= 1,000 instances.
// ---------------------------------------------------------------------------

bool criterion_6() {
  Checker ck;
  std::mt19937_64 rng(0xE7A1);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  long instances = 0, point_mismatches = 0, cal_mismatches = 0, monotonic_violations = 0;

  while (instances < 1000) {
    std::size_t n = 1 + rng() % 200;
    std::vector<double> scores(n);
    std::vector<int> labels(n);
    for (std::size_t i = 0; i < n; ++i) {
      // A coarse grid forces tie groups; a fine grid exercises near-distinct
      // scores. Alternate between the two.
      double raw = u(rng);
      scores[i] = instances % 2 ? raw : std::round(raw * 6.0) / 6.0;
      labels[i] = rng() % 3 == 0 ? 1 : 0;
    }
    labels[rng() % n] = 1;  // at least one positive
    instances++;

    auto curve = dq::pr_curve(scores, labels);

    // Brute-force sweep at every distinct score.
    std::set<double> distinct(scores.begin(), scores.end());
    if (curve.size() != distinct.size()) {
      point_mismatches++;
      continue;
    }
    for (const auto& pt : curve) {
      long tp = 0, fp = 0, fn = 0;
      for (std::size_t i = 0; i < n; ++i) {
        bool pred = scores[i] >= pt.threshold;
        if (pred && labels[i] == 1) tp++;
        if (pred && labels[i] == 0) fp++;
        if (!pred && labels[i] == 1) fn++;
      }
      double prec = tp + fp ? static_cast<double>(tp) / static_cast<double>(tp + fp) : 1.0;
      double rec = static_cast<double>(tp) / static_cast<double>(tp + fn);
      if (std::fabs(prec - pt.precision) > 1e-12 || std::fabs(rec - pt.recall) > 1e-12)
        point_mismatches++;
    }

    // Recall non-increasing as the threshold rises.
    for (std::size_t i = 1; i < curve.size(); ++i)
      if (curve[i].recall < curve[i - 1].recall) monotonic_violations++;

    // Calibration vs brute force at a random target.
    double target = 0.4 + 0.6 * u(rng);
    auto cal = dq::calibrate_threshold(scores, labels, target);
    bool found = false;
    double best_thr = 0, best_rec = 0, best_prec = 0, max_prec = -1, max_prec_thr = 0;
    for (double thr : distinct) {
      long tp = 0, fp = 0, fn = 0;
      for (std::size_t i = 0; i < n; ++i) {
        bool pred = scores[i] >= thr;
        if (pred && labels[i] == 1) tp++;
        if (pred && labels[i] == 0) fp++;
        if (!pred && labels[i] == 1) fn++;
      }
      double prec = tp + fp ? static_cast<double>(tp) / static_cast<double>(tp + fp) : 1.0;
      double rec = static_cast<double>(tp) / static_cast<double>(tp + fn);
      if (prec > max_prec || (prec == max_prec && thr < max_prec_thr)) {
        max_prec = prec;
        max_prec_thr = thr;
      }
      if (prec >= target && (!found || thr < best_thr)) {
        found = true;
        best_thr = thr;
        best_rec = rec;
        best_prec = prec;
      }
    }
    if (cal.feasible != found) {
      cal_mismatches++;
    } else if (found) {
      if (cal.threshold != best_thr || std::fabs(cal.achieved_recall - best_rec) > 1e-12 ||
          std::fabs(cal.achieved_precision - best_prec) > 1e-12)
        cal_mismatches++;
    } else {
      if (cal.threshold != max_prec_thr ||
          std::fabs(cal.achieved_precision - max_prec) > 1e-12)
        cal_mismatches++;
    }
  }

  ck.expect_eq(point_mismatches, 0L, "curve/brute-force mismatches");
  ck.expect_eq(cal_mismatches, 0L, "calibration/brute-force mismatches");
  ck.expect_eq(monotonic_violations, 0L, "recall monotonicity violations");
  std::printf("  %ld instances: %ld curve, %ld calibration, %ld monotonicity issues\n",
              instances, point_mismatches, cal_mismatches, monotonic_violations);
  for (const auto& f : ck.failures) std::printf("  !! %s\n", f.c_str());
  return ck.ok();
}

// ---------------------------------------------------------------------------
// Criterion 7: checksum-identical artifacts across two seeded CLI runs.
// ---------------------------------------------------------------------------

bool criterion_7() {
  Checker ck;
  dqtest::TempDir dir;

  // Shared tiny configs keep the double pipeline under a minute.
  std::string gen_cfg = dir.file("gen.conf");
  {
    std::ofstream out(gen_cfg);
    out << "n_messages: 2000\nseed: 4242\n";
  }
  std::string model_cfg = dir.file("model.conf");
  {
    std::ofstream out(model_cfg);
    out << "l: 16\nchar_embed_dim: 4\nheader_embed_dim: 4\nmsgid_filters: 6\n"
        << "msgid_kernel_sizes: 5,3\nmsgid_pool_after: 2\nmsgid_pool_window: 2\n"
        << "msgid_pool_stride: 2\nheader_filters: 5\nheader_kernel_size: 2\n"
        << "dense_hidden: 8\n";
  }
  std::string train_cfg = dir.file("train.conf");
  {
    std::ofstream out(train_cfg);
    out << "epochs: 3\nseed: 7\nbatch_size: 64\n";
  }

  struct Artifact {
    std::string label;
    std::uint64_t checksum[2];
  };
  std::vector<Artifact> artifacts = {{"corpus", {0, 0}},
                                     {"model", {0, 0}},
                                     {"eval-summary", {0, 0}},
                                     {"eval-csv", {0, 0}},
                                     {"sim-report", {0, 0}}};

  for (int run = 0; run < 2; ++run) {
    std::string tag = run == 0 ? "a" : "b";
    std::string corpus = dir.file("corpus-" + tag + ".jsonl");
    std::string model = dir.file("model-" + tag + ".dqm");
    std::string summary = dir.file("eval-" + tag + ".txt");
    std::string csv = dir.file("pr-" + tag + ".csv");
    std::string report = dir.file("sim-" + tag + ".txt");

    int rc = run_cli("gen-data --config " + gen_cfg + " --out " + corpus);
    ck.expect_eq(rc, 0, "gen-data exit code run " + tag);
    rc = run_cli("train --corpus " + corpus + " --model-config " + model_cfg +
                 " --train-config " + train_cfg + " --out " + model);
    ck.expect_eq(rc, 0, "train exit code run " + tag);
    rc = run_cli("eval --model " + model + " --corpus " + corpus +
                 " --split test --summary " + summary + " --csv " + csv);
    ck.expect_eq(rc, 0, "eval exit code run " + tag);
    rc = run_cli("simulate --model " + model + " --corpus " + corpus +
                 " --gen-config " + gen_cfg + " --out " + report);
    ck.expect_eq(rc, 0, "simulate exit code run " + tag);
    if (!ck.ok()) break;

    artifacts[0].checksum[run] = file_checksum(corpus);
    artifacts[1].checksum[run] = file_checksum(model);
    artifacts[2].checksum[run] = file_checksum(summary);
    artifacts[3].checksum[run] = file_checksum(csv);
    artifacts[4].checksum[run] = file_checksum(report);
  }

  if (ck.ok()) {
    for (const auto& a : artifacts) {
      ck.expect(a.checksum[0] == a.checksum[1],
                a.label + " checksums differ between runs");
      std::printf("  %-12s %016llx %s\n", a.label.c_str(),
                  static_cast<unsigned long long>(a.checksum[0]),
                  a.checksum[0] == a.checksum[1] ? "== rerun" : "!= rerun");
    }
  }
  for (const auto& f : ck.failures) std::printf("  !! %s\n", f.c_str());
  return ck.ok();
}

struct Criterion {
  int number;
  const char* label;
  bool (*fn)();
};

const Criterion kCriteria[] = {
    {1, "gradient checks (20 seeds, <2min)", criterion_1},
    {2, "encoder conformance + reference fuzz", criterion_2},
    {3, "desk-scale experiment (5 seeds, <15min)", criterion_3},
    {4, "replay recovered-fraction properties", criterion_4},
    {5, "service contract over live HTTP", criterion_5},
    {6, "evaluation brute-force equivalence", criterion_6},
    {7, "checksum-identical seeded CLI runs", criterion_7},
};

}  // namespace

int main(int argc, char** argv) {
  int only = 0;
  for (int i = 1; i < argc; ++i) {
    if (std::strcmp(argv[i], "--only") == 0 && i + 1 < argc) {
      only = std::atoi(argv[i + 1]);
      ++i;
    } else {
      std::fprintf(stderr, "usage: %s [--only N]\n", argv[0]);
      return 2;
    }
  }
  if (only < 0 || only > 7) {
    std::fprintf(stderr, "no criterion %d (valid: 1..7)\n", only);
    return 2;
  }

  int failures = 0;
  for (const auto& c : kCriteria) {
    if (only != 0 && c.number != only) continue;
    std::printf("criterion %d: %s\n", c.number, c.label);
    std::fflush(stdout);
    bool ok = false;
    try {
      ok = c.fn();
    } catch (const std::exception& e) {
      std::printf("  !! exception: %s\n", e.what());
    }
    std::printf("[%s] criterion %d: %s\n", ok ? "PASS" : "FAIL", c.number, c.label);
    std::fflush(stdout);
    if (!ok) failures++;
  }
  return failures == 0 ? 0 : 1;
}
