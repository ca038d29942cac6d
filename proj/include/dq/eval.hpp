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

#ifndef DQ_EVAL_HPP_
#define DQ_EVAL_HPP_

#include <cstddef>
#include <string>
#include <vector>

#include "dq/model.hpp"
#include "dq/record.hpp"

namespace dq {

struct PrPoint {
  double threshold = 0.0;
  double precision = 0.0;
  double recall = 0.0;
};

struct CalibrationResult {
  double threshold = 0.0;
  double achieved_precision = 0.0;
  double achieved_recall = 0.0;
  double target_precision = 0.0;
  bool feasible = false;
};

// One point per distinct score, descending; equal scores flip together, so a
// point's counts include its whole tie group. A prediction is positive when
// score >= threshold. Throws on length mismatch, scores outside [0, 1],
// labels outside {0, 1}, or when no positive labels exist.
std::vector<PrPoint> pr_curve(const std::vector<double>& scores,
                              const std::vector<int>& labels);

// Smallest threshold whose precision meets the target, which maximizes recall
// under the precision constraint. When no threshold qualifies, returns the
// maximum-precision point (smallest such threshold) with feasible = false.
CalibrationResult calibrate_threshold(const std::vector<double>& scores,
                                      const std::vector<int>& labels,
                                      double target_precision);

// Trapezoid area over recall-sorted points, with a leading rectangle from
// recall 0 to the first point; a single point (p, r) yields p*r.
double pr_auc(const std::vector<PrPoint>& points);

struct EvalReport {
  std::size_t n = 0;
  std::size_t n_positive = 0;
  double auc = 0.0;
  CalibrationResult calibration;
  // Confusion matrix at threshold_used: the model's stored threshold when it
  // has one, otherwise the threshold calibrated on this same data.
  double threshold_used = 0.0;
  bool threshold_from_model = false;
  std::size_t tp = 0, fp = 0, fn = 0, tn = 0;
  double precision = 0.0;
  double recall = 0.0;
  std::vector<PrPoint> curve;
};

EvalReport evaluate(const TrainedModel& model,
                    const std::vector<MessageRecord>& records,
                    double target_precision);

// CSV with header "threshold,precision,recall".
void write_pr_csv(const std::string& path, const std::vector<PrPoint>& curve);
std::vector<PrPoint> read_pr_csv(const std::string& path);

std::string format_eval_summary(const EvalReport& rep);

}  // namespace dq

#endif  // DQ_EVAL_HPP_
