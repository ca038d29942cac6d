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

#include "dq/eval.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "dq/encode.hpp"

namespace dq {
namespace {

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void check_inputs(const std::vector<double>& scores, const std::vector<int>& labels) {
  if (scores.size() != labels.size())
    throw std::invalid_argument("scores and labels differ in length");
  if (scores.empty()) throw std::invalid_argument("empty score set");
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (!(scores[i] >= 0.0 && scores[i] <= 1.0))
      throw std::invalid_argument("score outside [0, 1] at index " + std::to_string(i));
    if (labels[i] != 0 && labels[i] != 1)
      throw std::invalid_argument("label must be 0 or 1 at index " + std::to_string(i));
  }
}

}  // namespace

std::vector<PrPoint> pr_curve(const std::vector<double>& scores,
                              const std::vector<int>& labels) {
  check_inputs(scores, labels);
  std::size_t positives = 0;
  for (int l : labels) positives += static_cast<std::size_t>(l);
  if (positives == 0) throw std::invalid_argument("no positive labels");

  std::vector<std::size_t> idx(scores.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::sort(idx.begin(), idx.end(),
            [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });

  std::vector<PrPoint> out;
  std::size_t tp = 0, fp = 0, i = 0;
  while (i < idx.size()) {
    double s = scores[idx[i]];
    std::size_t j = i;
    while (j < idx.size() && scores[idx[j]] == s) {
      tp += static_cast<std::size_t>(labels[idx[j]]);
      fp += static_cast<std::size_t>(1 - labels[idx[j]]);
      ++j;
    }
    out.push_back({s, static_cast<double>(tp) / static_cast<double>(tp + fp),
                   static_cast<double>(tp) / static_cast<double>(positives)});
    i = j;
  }
  return out;
}

CalibrationResult calibrate_threshold(const std::vector<double>& scores,
                                      const std::vector<int>& labels,
                                      double target_precision) {
  if (!(target_precision > 0.0 && target_precision <= 1.0))
    throw std::invalid_argument("target_precision must be in (0, 1]");
  std::vector<PrPoint> curve = pr_curve(scores, labels);

  const PrPoint* best = nullptr;
  for (const auto& p : curve) {
    if (p.precision < target_precision) continue;
    if (!best || p.threshold < best->threshold) best = &p;
  }
  bool feasible = best != nullptr;
  if (!feasible) {
    for (const auto& p : curve) {
      if (!best || p.precision > best->precision ||
          (p.precision == best->precision && p.threshold < best->threshold))
        best = &p;
    }
  }
  return {best->threshold, best->precision, best->recall, target_precision, feasible};
}

double pr_auc(const std::vector<PrPoint>& points) {
  if (points.empty()) throw std::invalid_argument("pr_auc needs at least one point");
  std::vector<PrPoint> pts = points;
  std::sort(pts.begin(), pts.end(), [](const PrPoint& a, const PrPoint& b) {
    if (a.recall != b.recall) return a.recall < b.recall;
    return a.precision > b.precision;
  });
  double auc = pts[0].recall * pts[0].precision;
  for (std::size_t i = 1; i < pts.size(); ++i)
    auc += (pts[i].recall - pts[i - 1].recall) * (pts[i].precision + pts[i - 1].precision) / 2.0;
  return auc;
}

EvalReport evaluate(const TrainedModel& model,
                    const std::vector<MessageRecord>& records,
                    double target_precision) {
  if (records.empty()) throw std::invalid_argument("empty corpus");
  std::vector<EncodedExample> xs;
  xs.reserve(records.size());
  std::vector<int> labels;
  labels.reserve(records.size());
  for (const auto& r : records) {
    xs.push_back(encode_example(r, model.features));
    labels.push_back(r.label);
  }
  std::vector<double> scores = predict_batch(model, xs);

  EvalReport rep;
  rep.n = records.size();
  for (int l : labels) rep.n_positive += static_cast<std::size_t>(l);
  rep.curve = pr_curve(scores, labels);
  rep.auc = pr_auc(rep.curve);
  rep.calibration = calibrate_threshold(scores, labels, target_precision);
  rep.threshold_from_model = model.threshold.has_value();
  rep.threshold_used = model.threshold ? *model.threshold : rep.calibration.threshold;

  for (std::size_t i = 0; i < scores.size(); ++i) {
    bool pred = scores[i] >= rep.threshold_used;
    if (pred && labels[i] == 1) rep.tp++;
    else if (pred && labels[i] == 0) rep.fp++;
    else if (!pred && labels[i] == 1) rep.fn++;
    else rep.tn++;
  }
  rep.precision = rep.tp + rep.fp > 0
                      ? static_cast<double>(rep.tp) / static_cast<double>(rep.tp + rep.fp)
                      : 0.0;
  rep.recall = rep.n_positive > 0
                   ? static_cast<double>(rep.tp) / static_cast<double>(rep.n_positive)
                   : 0.0;
  return rep;
}

void write_pr_csv(const std::string& path, const std::vector<PrPoint>& curve) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open for writing: " + path);
  out << "threshold,precision,recall\n";
  for (const auto& p : curve)
    out << fmt(p.threshold) << ',' << fmt(p.precision) << ',' << fmt(p.recall) << '\n';
  if (!out) throw std::runtime_error("write failed: " + path);
}

std::vector<PrPoint> read_pr_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open CSV file: " + path);
  std::string line;
  if (!std::getline(in, line) || line != "threshold,precision,recall")
    throw std::runtime_error(path + ": missing threshold,precision,recall header");
  std::vector<PrPoint> out;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    PrPoint p;
    double* fields[3] = {&p.threshold, &p.precision, &p.recall};
    const char* pos = line.data();
    const char* end = line.data() + line.size();
    for (int f = 0; f < 3; ++f) {
      auto [next, ec] = std::from_chars(pos, end, *fields[f]);
      bool last = f == 2;
      if (ec != std::errc{} || (last ? next != end : (next == end || *next != ',')))
        throw std::runtime_error(path + ": line " + std::to_string(lineno) +
                                 ": expected threshold,precision,recall");
      pos = last ? next : next + 1;
    }
    out.push_back(p);
  }
  return out;
}

std::string format_eval_summary(const EvalReport& rep) {
  std::ostringstream os;
  os << "messages: " << rep.n << '\n'
     << "positives: " << rep.n_positive << '\n';
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", rep.auc);
  os << "pr_auc: " << buf << '\n';
  os << "threshold: " << fmt(rep.threshold_used) << " ("
     << (rep.threshold_from_model ? "from model" : "calibrated on this data") << ")\n";
  std::snprintf(buf, sizeof buf, "%.6f", rep.precision);
  os << "precision: " << buf << '\n';
  std::snprintf(buf, sizeof buf, "%.6f", rep.recall);
  os << "recall: " << buf << '\n';
  os << "tp: " << rep.tp << "\nfp: " << rep.fp << "\nfn: " << rep.fn
     << "\ntn: " << rep.tn << '\n';
  os << "calibration_target: " << fmt(rep.calibration.target_precision) << '\n'
     << "calibration_threshold: " << fmt(rep.calibration.threshold) << '\n';
  std::snprintf(buf, sizeof buf, "%.6f", rep.calibration.achieved_precision);
  os << "calibration_precision: " << buf << '\n';
  std::snprintf(buf, sizeof buf, "%.6f", rep.calibration.achieved_recall);
  os << "calibration_recall: " << buf << '\n';
  os << "calibration_feasible: " << (rep.calibration.feasible ? "true" : "false") << '\n';
  return os.str();
}

}  // namespace dq
