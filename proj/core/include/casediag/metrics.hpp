// Copyright 2026 The casediag Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json_fwd.hpp>

namespace casediag::metrics {

/// Descriptor of the tokenization all text metrics share.
inline constexpr std::string_view kTokenization =
    "lowercase; split on whitespace; ASCII characters other than letters and digits removed";

struct Overlap {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

Overlap rouge_n_detail(std::string_view candidate, std::string_view reference, int n);
/// n-gram F1 (harmonic mean of n-gram precision and recall). 0 for empty input.
double rouge_n(std::string_view candidate, std::string_view reference, int n);
/// Longest-common-subsequence F1.
double rouge_l(std::string_view candidate, std::string_view reference);

struct BleuResult {
  std::vector<double> precisions;  // clipped modified precision per order
  std::vector<double> cumulative;  // BLEU-1..max_n, each with brevity penalty
  double brevity_penalty = 0.0;
  double composite = 0.0;          // arithmetic mean of `cumulative`
};

/// Unsmoothed BLEU against a single reference.
BleuResult bleu(std::string_view candidate, std::string_view reference, int max_n = 4);

struct TextScore {
  double rouge1 = 0.0;
  double rouge2 = 0.0;
  double rougeL = 0.0;
  double bleu1 = 0.0;
  double bleu2 = 0.0;
  double bleuN = 0.0;  // mean of BLEU-1..4
  double bleu4 = 0.0;  // conventional geometric BLEU-4
};

TextScore score_text(std::string_view candidate, std::string_view reference);
nlohmann::json to_json(const TextScore& s);

struct ClassificationScore {
  double accuracy = 0.0;
  double recall = 0.0;
  double precision = 0.0;
  double f1 = 0.0;
  double f2 = 0.0;
  double auc = 0.0;
};

/// Threshold 0.5 for the confusion-matrix metrics; AUC by the Mann-Whitney
/// statistic with ties counted as one half. Throws DegenerateLabels unless
/// both classes occur.
ClassificationScore classification_metrics(std::span<const double> scores, std::span<const int> labels);
nlohmann::json to_json(const ClassificationScore& s);

/// Scores predicted views against gold views keyed by case id. Cases missing
/// from `predicted` score zero. Returns {tokenization, cases, mean}.
nlohmann::json evaluate_views(const std::map<std::string, std::string>& predicted,
                              const std::map<std::string, std::string>& gold);

}  // namespace casediag::metrics
