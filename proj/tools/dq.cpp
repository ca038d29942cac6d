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

// dq: generate corpora, train and calibrate the quarantine model, evaluate,
// serve scan requests, and replay traffic through the simulator.

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <csignal>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "CLI11.hpp"

#include "dq/corpus.hpp"
#include "dq/encode.hpp"
#include "dq/eval.hpp"
#include "dq/kvlines.hpp"
#include "dq/model.hpp"
#include "dq/replay.hpp"
#include "dq/service.hpp"

namespace {

std::string read_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open file: " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

std::vector<int> parse_int_list(const std::string& s, const std::string& key) {
  std::vector<int> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      int v = std::stoi(item, &used);
      if (used != item.size()) throw std::invalid_argument(item);
      out.push_back(v);
    } catch (const std::exception&) {
      throw std::runtime_error("field '" + key + "': bad integer list entry '" + item + "'");
    }
  }
  if (out.empty()) throw std::runtime_error("field '" + key + "': empty list");
  return out;
}

dq::ModelConfig load_model_config(const std::string& path) {
  dq::KvLines kv = dq::KvLines::parse(read_file(path));
  dq::ModelConfig c;
  if (auto v = kv.get_int("l")) c.l = static_cast<int>(*v);
  if (auto v = kv.get_int("char_embed_dim")) c.char_embed_dim = static_cast<int>(*v);
  if (auto v = kv.get_int("header_embed_dim")) c.header_embed_dim = static_cast<int>(*v);
  if (auto v = kv.get_int("msgid_filters")) c.msgid_filters = static_cast<int>(*v);
  if (auto v = kv.get("msgid_kernel_sizes"))
    c.msgid_kernel_sizes = parse_int_list(*v, "msgid_kernel_sizes");
  if (auto v = kv.get("msgid_pool_after"))
    c.msgid_pool_after = parse_int_list(*v, "msgid_pool_after");
  if (auto v = kv.get_int("msgid_pool_window")) c.msgid_pool_window = static_cast<int>(*v);
  if (auto v = kv.get_int("msgid_pool_stride")) c.msgid_pool_stride = static_cast<int>(*v);
  if (auto v = kv.get_int("header_filters")) c.header_filters = static_cast<int>(*v);
  if (auto v = kv.get_int("header_kernel_size")) c.header_kernel_size = static_cast<int>(*v);
  if (auto v = kv.get_int("dense_hidden")) c.dense_hidden = static_cast<int>(*v);
  if (auto v = kv.get_double("dropout_rate")) c.dropout_rate = *v;
  if (auto v = kv.get_int("mua_dim")) c.mua_dim = static_cast<int>(*v);
  return c;
}

dq::TrainConfig load_train_config(const std::string& path) {
  dq::KvLines kv = dq::KvLines::parse(read_file(path));
  dq::TrainConfig c;
  if (auto v = kv.get_int("epochs")) c.epochs = static_cast<int>(*v);
  if (auto v = kv.get_double("lr_initial")) c.lr_initial = *v;
  if (auto v = kv.get_int("lr_halving_period")) c.lr_halving_period = static_cast<int>(*v);
  if (auto v = kv.get_double("momentum")) c.momentum = *v;
  if (auto v = kv.get_int("batch_size")) c.batch_size = static_cast<int>(*v);
  if (auto v = kv.get_int("seed")) c.seed = static_cast<std::uint64_t>(*v);
  return c;
}

std::vector<dq::EncodedExample> encode_dataset(const std::vector<dq::MessageRecord>& rs,
                                               const dq::FeatureSpace& fs) {
  std::vector<dq::EncodedExample> xs;
  xs.reserve(rs.size());
  for (const auto& r : rs) xs.push_back(dq::encode_example(r, fs));
  return xs;
}

// Records in the last tenth of the training period, by the same nearest-rank
// quantile rule as the train/test split. The operating threshold is chosen
// here, never on the test split.
std::vector<dq::MessageRecord> calibration_slice(const std::vector<dq::MessageRecord>& train) {
  std::vector<std::int64_t> ts;
  ts.reserve(train.size());
  for (const auto& r : train) ts.push_back(r.ts);
  std::sort(ts.begin(), ts.end());
  std::size_t rank =
      static_cast<std::size_t>(std::ceil(0.9 * static_cast<double>(ts.size())));
  if (rank == 0) rank = 1;
  std::int64_t cut = ts[rank - 1];
  std::vector<dq::MessageRecord> slice;
  for (const auto& r : train)
    if (r.ts > cut) slice.push_back(r);
  if (slice.empty())
    throw std::runtime_error(
        "calibration slice is empty; the train period has no spread past its "
        "90th percentile timestamp");
  return slice;
}

std::vector<dq::MessageRecord> select_split(const std::vector<dq::MessageRecord>& all,
                                            const std::string& which,
                                            double train_fraction) {
  if (which == "all") return all;
  dq::CorpusSplit s = dq::split_by_time(all, train_fraction);
  if (which == "train") return s.train;
  if (which == "test") return s.test;
  throw std::runtime_error("--split must be all, train, or test");
}

std::atomic<bool> g_shutdown{false};

void handle_signal(int) { g_shutdown.store(true); }

int run_gen_data(const std::string& config_path, const std::string& out,
                 long long seed, bool seed_set) {
  dq::GenConfig cfg =
      config_path.empty() ? dq::default_gen_config() : dq::load_gen_config(config_path);
  if (seed_set) cfg.seed = static_cast<std::uint64_t>(seed);
  std::vector<dq::MessageRecord> records = dq::generate_corpus(cfg);
  dq::write_corpus(out, records);
  std::size_t spam = 0;
  for (const auto& r : records) spam += static_cast<std::size_t>(r.label);
  double frac = records.empty() ? 0.0 : static_cast<double>(spam) / records.size();
  std::printf("wrote %zu records to %s (spam fraction %.3f, seed %llu)\n",
              records.size(), out.c_str(), frac,
              static_cast<unsigned long long>(cfg.seed));
  return 0;
}

int run_train(const std::string& corpus_path, double split_fraction,
              const std::string& model_config_path, const std::string& train_config_path,
              const std::string& out, double target_precision, int epochs_flag,
              long long seed_flag, bool seed_set, int header_top_k, int mua_top_n) {
  std::vector<dq::MessageRecord> records = dq::read_corpus(corpus_path);
  dq::CorpusSplit split = dq::split_by_time(records, split_fraction);
  if (split.train.empty() || split.test.empty())
    throw std::runtime_error("time split produced an empty train or test side");

  dq::ModelConfig mcfg =
      model_config_path.empty() ? dq::ModelConfig{} : load_model_config(model_config_path);
  dq::TrainConfig tcfg =
      train_config_path.empty() ? dq::TrainConfig{} : load_train_config(train_config_path);
  if (epochs_flag > 0) tcfg.epochs = epochs_flag;
  if (seed_set) tcfg.seed = static_cast<std::uint64_t>(seed_flag);

  dq::FeatureSpace fs;
  fs.chars = dq::build_char_vocab();
  fs.headers = dq::build_header_vocab(split.train, header_top_k);
  fs.muas = dq::build_mua_table(split.train, mua_top_n);
  fs.msgid_len = mcfg.l;

  dq::TrainedModel model = dq::build_model(mcfg, fs, tcfg.seed);
  std::vector<dq::EncodedExample> train_xs = encode_dataset(split.train, fs);
  std::printf("training on %zu records (%zu held for test)\n", split.train.size(),
              split.test.size());
  dq::train(model, train_xs, tcfg, [&](const dq::EpochStats& e) {
    std::printf("epoch %d/%d  lr %.6g  loss %.6f  acc %.4f\n", e.epoch, tcfg.epochs,
                e.lr, e.mean_loss, e.accuracy);
    std::fflush(stdout);
  });

  std::vector<dq::MessageRecord> cal = calibration_slice(split.train);
  std::vector<dq::EncodedExample> cal_xs = encode_dataset(cal, fs);
  std::vector<double> cal_scores = dq::predict_batch(model, cal_xs);
  std::vector<int> cal_labels;
  cal_labels.reserve(cal.size());
  for (const auto& r : cal) cal_labels.push_back(r.label);
  dq::CalibrationResult cr;
  try {
    cr = dq::calibrate_threshold(cal_scores, cal_labels, target_precision);
  } catch (const std::exception& e) {
    throw std::runtime_error(std::string("calibration on the last 10% of the train "
                                         "period failed: ") + e.what());
  }
  model.threshold = cr.threshold;
  if (!cr.feasible)
    std::fprintf(stderr,
                 "dq: warning: target precision %.4f unreachable on the calibration "
                 "slice; stored the max-precision threshold instead\n",
                 target_precision);
  dq::save_model(model, out);
  std::printf("calibration: threshold %.17g precision %.4f recall %.4f (target %.4f, %s)\n",
              cr.threshold, cr.achieved_precision, cr.achieved_recall,
              cr.target_precision, cr.feasible ? "feasible" : "infeasible");
  std::printf("saved model %s (version %s)\n", out.c_str(), model.model_version.c_str());
  return 0;
}

int run_eval(const std::string& model_path, const std::string& corpus_path,
             const std::string& which, double train_fraction, double target_precision,
             const std::string& csv_out, const std::string& summary_out) {
  dq::TrainedModel model = dq::load_model(model_path);
  std::vector<dq::MessageRecord> records =
      select_split(dq::read_corpus(corpus_path), which, train_fraction);
  if (records.empty()) throw std::runtime_error("selected split is empty");
  dq::EvalReport rep = dq::evaluate(model, records, target_precision);
  std::string summary = dq::format_eval_summary(rep);
  std::fputs(summary.c_str(), stdout);
  if (!csv_out.empty()) dq::write_pr_csv(csv_out, rep.curve);
  if (!summary_out.empty()) {
    std::ofstream out(summary_out);
    if (!out) throw std::runtime_error("cannot open for writing: " + summary_out);
    out << summary;
  }
  return 0;
}

int run_calibrate(const std::string& model_path, const std::string& corpus_path,
                  double target_precision, const std::string& out) {
  dq::TrainedModel model = dq::load_model(model_path);
  std::vector<dq::MessageRecord> records = dq::read_corpus(corpus_path);
  if (records.empty()) throw std::runtime_error("empty corpus");
  std::vector<dq::EncodedExample> xs = encode_dataset(records, model.features);
  std::vector<double> scores = dq::predict_batch(model, xs);
  std::vector<int> labels;
  labels.reserve(records.size());
  for (const auto& r : records) labels.push_back(r.label);
  dq::CalibrationResult cr = dq::calibrate_threshold(scores, labels, target_precision);
  std::printf("threshold: %.17g\nprecision: %.6f\nrecall: %.6f\nfeasible: %s\n",
              cr.threshold, cr.achieved_precision, cr.achieved_recall,
              cr.feasible ? "true" : "false");
  if (!out.empty()) {
    model.threshold = cr.threshold;
    dq::save_model(model, out);
    std::printf("saved calibrated model to %s\n", out.c_str());
  }
  return 0;
}

int run_serve(const dq::ServiceConfig& cfg) {
  dq::QuarantineService service(cfg);
  service.start();
  std::printf("listening on %s:%d (model version %s, deadline %d ms)\n",
              cfg.host.c_str(), service.port(), service.model_version().c_str(),
              cfg.default_deadline_ms);
  std::fflush(stdout);
  std::signal(SIGINT, handle_signal);
  std::signal(SIGTERM, handle_signal);
  while (!g_shutdown.load())
    std::this_thread::sleep_for(std::chrono::milliseconds(200));
  std::printf("shutting down\n");
  service.stop();
  return 0;
}

int run_simulate(const std::string& model_path, const std::string& corpus_path,
                 const std::string& gen_config_path, long long quarantine_duration,
                 double ham_fp_rate, const std::string& out) {
  dq::TrainedModel model = dq::load_model(model_path);
  std::vector<dq::MessageRecord> records = dq::read_corpus(corpus_path);
  dq::GenConfig gcfg = gen_config_path.empty() ? dq::default_gen_config()
                                               : dq::load_gen_config(gen_config_path);
  dq::BaselineFilter baseline = dq::BaselineFilter::from_config(gcfg);
  dq::SimConfig sc;
  sc.quarantine_duration = quarantine_duration;
  sc.ham_fp_rate = ham_fp_rate;
  dq::SimReport rep = dq::simulate(model, records, baseline, sc);
  std::fputs(dq::format_report(rep).c_str(), stdout);
  if (!out.empty()) dq::write_report(out, rep);
  return 0;
}

int run_plot(const std::string& csv_in, const std::string& out) {
  std::vector<dq::PrPoint> curve = dq::read_pr_csv(csv_in);
  std::sort(curve.begin(), curve.end(), [](const dq::PrPoint& a, const dq::PrPoint& b) {
    if (a.recall != b.recall) return a.recall < b.recall;
    return a.precision > b.precision;
  });
  std::ofstream f(out);
  if (!f) throw std::runtime_error("cannot open for writing: " + out);
  f << "# recall precision\n";
  char buf[128];
  for (const auto& p : curve) {
    std::snprintf(buf, sizeof buf, "%.17g %.17g\n", p.recall, p.precision);
    f << buf;
  }
  if (!f) throw std::runtime_error("write failed: " + out);
  std::printf("wrote %zu points to %s\n", curve.size(), out.c_str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"quarantine model pipeline: data, training, evaluation, serving, replay"};
  app.require_subcommand(1);
  int rc = 0;

  // gen-data
  auto* gen = app.add_subcommand("gen-data", "generate a synthetic corpus");
  std::string gen_config, gen_out;
  long long gen_seed = 0;
  gen->add_option("--config", gen_config, "generation config file (key: value lines)");
  gen->add_option("--out", gen_out, "output corpus path (JSONL)")->required();
  auto* gen_seed_opt = gen->add_option("--seed", gen_seed, "override the config seed");
  gen->callback([&] { rc = run_gen_data(gen_config, gen_out, gen_seed, !gen_seed_opt->empty()); });

  // train
  auto* tr = app.add_subcommand("train", "train and calibrate a model");
  std::string tr_corpus, tr_mcfg, tr_tcfg, tr_out;
  double tr_split = 0.75, tr_target = 0.99;
  int tr_epochs = 0, tr_header_k = 32, tr_mua_n = 64;
  long long tr_seed = 0;
  tr->add_option("--corpus", tr_corpus, "corpus path (JSONL)")->required();
  tr->add_option("--split", tr_split, "train fraction for the time split")
      ->default_val(0.75);
  tr->add_option("--model-config", tr_mcfg, "model config file");
  tr->add_option("--train-config", tr_tcfg, "training config file");
  tr->add_option("--out", tr_out, "output model path")->required();
  tr->add_option("--target-precision", tr_target, "calibration precision target")
      ->default_val(0.99);
  tr->add_option("--epochs", tr_epochs, "override epochs");
  auto* tr_seed_opt = tr->add_option("--seed", tr_seed, "override training seed");
  tr->add_option("--header-top-k", tr_header_k, "header vocabulary size before specials")
      ->default_val(32);
  tr->add_option("--mua-top-n", tr_mua_n, "mail-client table size before specials")
      ->default_val(64);
  tr->callback([&] {
    rc = run_train(tr_corpus, tr_split, tr_mcfg, tr_tcfg, tr_out, tr_target, tr_epochs,
                   tr_seed, !tr_seed_opt->empty(), tr_header_k, tr_mua_n);
  });

  // eval
  auto* ev = app.add_subcommand("eval", "score a corpus and report PR metrics");
  std::string ev_model, ev_corpus, ev_split = "all", ev_csv, ev_summary;
  double ev_fraction = 0.75, ev_target = 0.99;
  ev->add_option("--model", ev_model, "model path")->required();
  ev->add_option("--corpus", ev_corpus, "corpus path")->required();
  ev->add_option("--split", ev_split, "slice to evaluate: all, train, or test")
      ->default_val("all");
  ev->add_option("--train-fraction", ev_fraction, "time-split fraction for --split")
      ->default_val(0.75);
  ev->add_option("--target-precision", ev_target, "calibration target in the report")
      ->default_val(0.99);
  ev->add_option("--csv", ev_csv, "write PR points CSV here");
  ev->add_option("--summary", ev_summary, "write the summary text here");
  ev->callback([&] {
    rc = run_eval(ev_model, ev_corpus, ev_split, ev_fraction, ev_target, ev_csv, ev_summary);
  });

  // calibrate
  auto* ca = app.add_subcommand("calibrate", "pick a threshold for a precision target");
  std::string ca_model, ca_corpus, ca_out;
  double ca_target = 0.99;
  ca->add_option("--model", ca_model, "model path")->required();
  ca->add_option("--corpus", ca_corpus, "corpus to calibrate on")->required();
  ca->add_option("--target-precision", ca_target, "precision target")->default_val(0.99);
  ca->add_option("--out", ca_out, "save the model with the new threshold here");
  ca->callback([&] { rc = run_calibrate(ca_model, ca_corpus, ca_target, ca_out); });

  // serve
  auto* sv = app.add_subcommand("serve", "run the HTTP quarantine service");
  dq::ServiceConfig scfg;
  double sv_threshold = -1.0;
  sv->add_option("--model", scfg.model_path, "model path")->envname("DQ_MODEL")->required();
  sv->add_option("--host", scfg.host, "bind address")->envname("DQ_HOST")
      ->default_val("127.0.0.1");
  sv->add_option("--port", scfg.port, "bind port (0 = ephemeral)")->envname("DQ_PORT")
      ->default_val(8080);
  auto* sv_thr = sv->add_option("--threshold", sv_threshold, "override the model threshold")
                     ->envname("DQ_THRESHOLD");
  sv->add_option("--deadline-ms", scfg.default_deadline_ms,
                 "default per-request deadline in ms")
      ->envname("DQ_DEADLINE_MS")
      ->default_val(10);
  sv->add_option("--max-concurrency", scfg.max_concurrency, "request handler threads")
      ->envname("DQ_MAX_CONCURRENCY")
      ->default_val(8);
  sv->add_option("--request-log", scfg.request_log_path, "append request decisions here")
      ->envname("DQ_REQUEST_LOG");
  sv->callback([&] {
    if (!sv_thr->empty()) scfg.threshold_override = sv_threshold;
    rc = run_serve(scfg);
  });

  // simulate
  auto* si = app.add_subcommand("simulate", "replay a corpus through baseline + quarantine");
  std::string si_model, si_corpus, si_gcfg, si_out;
  long long si_duration = 21600;
  double si_fp = 0.0;
  si->add_option("--model", si_model, "model path")->required();
  si->add_option("--corpus", si_corpus, "corpus path")->required();
  si->add_option("--gen-config", si_gcfg,
                 "generation config the corpus was built with (campaign timing)");
  si->add_option("--quarantine-duration", si_duration, "seconds held in quarantine")
      ->default_val(21600);
  si->add_option("--ham-fp-rate", si_fp, "baseline false-positive rate on ham")
      ->default_val(0.0);
  si->add_option("--out", si_out, "write the report (summary + CSV) here");
  si->callback([&] {
    rc = run_simulate(si_model, si_corpus, si_gcfg, si_duration, si_fp, si_out);
  });

  // plot
  auto* pl = app.add_subcommand("plot", "turn a PR CSV into gnuplot-ready columns");
  std::string pl_csv, pl_out;
  pl->add_option("--csv", pl_csv, "PR points CSV from eval")->required();
  pl->add_option("--out", pl_out, "output data file (recall precision columns)")
      ->required();
  pl->callback([&] { rc = run_plot(pl_csv, pl_out); });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "dq: error: %s\n", e.what());
    return 1;
  }
  return rc;
}
