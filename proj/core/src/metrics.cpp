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

#include "casediag/metrics.hpp"

#include <algorithm>
#include <cmath>

#include <nlohmann/json.hpp>

#include "casediag/error.hpp"
#include "casediag/text.hpp"

namespace casediag::metrics {

namespace {

using Tokens = std::vector<std::string>;

std::map<std::vector<std::string>, int> ngram_counts(const Tokens& t, int n) {
  std::map<std::vector<std::string>, int> out;
  if (static_cast<int>(t.size()) < n) return out;
  for (std::size_t i = 0; i + n <= t.size(); ++i) ++out[Tokens(t.begin() + i, t.begin() + i + n)];
  return out;
}

int clipped_overlap(const Tokens& cand, const Tokens& ref, int n) {
  const auto c = ngram_counts(cand, n);
  const auto r = ngram_counts(ref, n);
  int overlap = 0;
  for (const auto& [gram, count] : c) {
    const auto it = r.find(gram);
    if (it != r.end()) overlap += std::min(count, it->second);
  }
  return overlap;
}

double f1(double precision, double recall) {
  return precision + recall > 0.0 ? 2.0 * precision * recall / (precision + recall) : 0.0;
}

std::size_t lcs_length(const Tokens& a, const Tokens& b) {
  std::vector<std::size_t> prev(b.size() + 1, 0);
  std::vector<std::size_t> cur(b.size() + 1, 0);
  for (std::size_t i = 1; i <= a.size(); ++i) {
    for (std::size_t j = 1; j <= b.size(); ++j) {
      cur[j] = a[i - 1] == b[j - 1] ? prev[j - 1] + 1 : std::max(prev[j], cur[j - 1]);
    }
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

}  // namespace

Overlap rouge_n_detail(std::string_view candidate, std::string_view reference, int n) {
  if (n < 1) throw Error(Errc::InvalidArgument, "n-gram order must be positive");
  const auto cand = text::tokenize(candidate);
  const auto ref = text::tokenize(reference);
  const int c_total = std::max(0, static_cast<int>(cand.size()) - n + 1);
  const int r_total = std::max(0, static_cast<int>(ref.size()) - n + 1);
  if (c_total == 0 || r_total == 0) return {};
  const double overlap = clipped_overlap(cand, ref, n);
  Overlap o{overlap / c_total, overlap / r_total, 0.0};
  o.f1 = f1(o.precision, o.recall);
  return o;
}

double rouge_n(std::string_view candidate, std::string_view reference, int n) {
  return rouge_n_detail(candidate, reference, n).f1;
}

double rouge_l(std::string_view candidate, std::string_view reference) {
  const auto cand = text::tokenize(candidate);
  const auto ref = text::tokenize(reference);
  if (cand.empty() || ref.empty()) return 0.0;
  const double lcs = static_cast<double>(lcs_length(cand, ref));
  return f1(lcs / static_cast<double>(cand.size()), lcs / static_cast<double>(ref.size()));
}

BleuResult bleu(std::string_view candidate, std::string_view reference, int max_n) {
  if (max_n < 1) throw Error(Errc::InvalidArgument, "BLEU order must be positive");
  const auto cand = text::tokenize(candidate);
  const auto ref = text::tokenize(reference);
  BleuResult out;
  out.precisions.assign(max_n, 0.0);
  out.cumulative.assign(max_n, 0.0);
  if (cand.empty() || ref.empty()) return out;
  const double c = static_cast<double>(cand.size());
  const double r = static_cast<double>(ref.size());
  out.brevity_penalty = c > r ? 1.0 : std::exp(1.0 - r / c);
  double log_sum = 0.0;
  bool zero = false;
  for (int n = 1; n <= max_n; ++n) {
    const int total = std::max(0, static_cast<int>(cand.size()) - n + 1);
    out.precisions[n - 1] = total > 0 ? static_cast<double>(clipped_overlap(cand, ref, n)) / total : 0.0;
    if (out.precisions[n - 1] == 0.0) zero = true;
    if (!zero) log_sum += std::log(out.precisions[n - 1]);
    out.cumulative[n - 1] = zero ? 0.0 : out.brevity_penalty * std::exp(log_sum / n);
  }
  double sum = 0.0;
  for (double v : out.cumulative) sum += v;
  out.composite = sum / max_n;
  return out;
}

TextScore score_text(std::string_view candidate, std::string_view reference) {
  TextScore s;
  s.rouge1 = rouge_n(candidate, reference, 1);
  s.rouge2 = rouge_n(candidate, reference, 2);
  s.rougeL = rouge_l(candidate, reference);
  const auto b = bleu(candidate, reference, 4);
  s.bleu1 = b.cumulative[0];
  s.bleu2 = b.cumulative[1];
  s.bleuN = b.composite;
  s.bleu4 = b.cumulative[3];
  return s;
}

nlohmann::json to_json(const TextScore& s) {
  return {{"rouge1", s.rouge1}, {"rouge2", s.rouge2}, {"rougeL", s.rougeL},
          {"bleu1", s.bleu1},   {"bleu2", s.bleu2},   {"bleuN", s.bleuN}, {"bleu4", s.bleu4}};
}

ClassificationScore classification_metrics(std::span<const double> scores, std::span<const int> labels) {
  if (scores.size() != labels.size()) throw Error(Errc::DimensionMismatch, "scores and labels differ in length");
  double tp = 0, fp = 0, tn = 0, fn = 0;
  std::vector<double> pos;
  std::vector<double> neg;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    const bool predicted = scores[i] >= 0.5;
    if (labels[i] != 0) {
      pos.push_back(scores[i]);
      (predicted ? tp : fn) += 1;
    } else {
      neg.push_back(scores[i]);
      (predicted ? fp : tn) += 1;
    }
  }
  if (pos.empty() || neg.empty()) throw Error(Errc::DegenerateLabels, "need at least one positive and one negative label");
  ClassificationScore s;
  s.accuracy = (tp + tn) / static_cast<double>(scores.size());
  s.recall = tp / (tp + fn);
  s.precision = tp + fp > 0 ? tp / (tp + fp) : 0.0;
  s.f1 = f1(s.precision, s.recall);
  s.f2 = s.precision + s.recall > 0 ? 5.0 * s.precision * s.recall / (4.0 * s.precision + s.recall) : 0.0;
  std::sort(neg.begin(), neg.end());
  double wins = 0.0;
  for (double p : pos) {
    const auto lo = std::lower_bound(neg.begin(), neg.end(), p);
    const auto hi = std::upper_bound(neg.begin(), neg.end(), p);
    wins += static_cast<double>(lo - neg.begin()) + 0.5 * static_cast<double>(hi - lo);
  }
  s.auc = wins / (static_cast<double>(pos.size()) * static_cast<double>(neg.size()));
  return s;
}

nlohmann::json to_json(const ClassificationScore& s) {
  return {{"accuracy", s.accuracy}, {"recall", s.recall}, {"precision", s.precision},
          {"f1", s.f1},             {"f2", s.f2},         {"auc", s.auc}};
}

nlohmann::json evaluate_views(const std::map<std::string, std::string>& predicted,
                              const std::map<std::string, std::string>& gold) {
  if (gold.empty()) throw Error(Errc::InvalidArgument, "no gold views to evaluate against");
  auto cases = nlohmann::json::array();
  TextScore mean;
  for (const auto& [case_id, reference] : gold) {
    const auto it = predicted.find(case_id);
    const auto s = it == predicted.end() ? TextScore{} : score_text(it->second, reference);
    auto row = to_json(s);
    row["case_id"] = case_id;
    row["missing"] = it == predicted.end();
    cases.push_back(std::move(row));
    mean.rouge1 += s.rouge1;
    mean.rouge2 += s.rouge2;
    mean.rougeL += s.rougeL;
    mean.bleu1 += s.bleu1;
    mean.bleu2 += s.bleu2;
    mean.bleuN += s.bleuN;
    mean.bleu4 += s.bleu4;
  }
  const double n = static_cast<double>(gold.size());
  for (double* v : {&mean.rouge1, &mean.rouge2, &mean.rougeL, &mean.bleu1, &mean.bleu2, &mean.bleuN, &mean.bleu4}) *v /= n;
  return {{"tokenization", kTokenization}, {"cases", std::move(cases)}, {"mean", to_json(mean)}};
}

}  // namespace casediag::metrics
