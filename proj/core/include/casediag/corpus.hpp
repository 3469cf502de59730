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

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "casediag/gateway.hpp"
#include "casediag/graph.hpp"

namespace casediag {

enum class ReviewStatus { Unreviewed, Approved, Rejected };
enum class Split { None, Train, Dev, Test };

std::string_view to_string(ReviewStatus s);
std::string_view to_string(Split s);
ReviewStatus parse_review_status(std::string_view s);
Split parse_split(std::string_view s);

/// One processed case. Graph fields are stored as separate files on disk.
struct CaseRecord {
  std::string case_id;
  std::string content_hash;
  std::string raw_text;
  std::string case_type;
  IracSummary irac;
  std::string description;  // issue, rule and analysis
  std::string court_view;   // conclusion
  RcQuestionSet questions;
  FactRuleGraph graph;
  FactRuleGraph masked_graph;
  std::vector<NodeId> removed;
  std::string reconstructed_description;
  std::string reconstructed_view;
  FactRuleGraph subgraph;
  std::vector<NodeId> candidates;
  // Labels known to be relevant to the case (synthetic corpora only); used
  // for evaluation, never for training.
  std::vector<std::string> relevant;
  ReviewStatus status = ReviewStatus::Unreviewed;
  std::string status_note;
  Split split = Split::None;

  /// With `inline_graphs` the graphs are embedded; otherwise they are
  /// referenced as graphs/<case_id>.<kind>.json.
  nlohmann::json to_json(bool inline_graphs) const;
  static CaseRecord from_json(const nlohmann::json& j, const std::filesystem::path& corpus_dir = {});
};

struct CaseInput {
  std::string case_id;
  std::string raw_text;
  std::vector<std::string> relevant;
  std::optional<std::vector<std::string>> forced_mask;  // fact labels to remove instead of sampling
};

struct DatagenConfig {
  int n_hop = 2;
  double mask_ratio = 0.25;
  std::uint64_t seed = 0;
  std::size_t min_approved = 10;

  void validate() const;
};

/// Hash of the inputs that determine a record; completed records with the
/// same hash are reused on rerun.
std::string record_hash(const CaseInput& input, const DatagenConfig& cfg);

/// Extract, classify, summarize, generate questions, mask and reconstruct.
/// Failures leave the record Rejected with the cause in status_note.
CaseRecord build_case(const CaseInput& input, const LlmGateway& gateway, const DatagenConfig& cfg);

struct ReviewDecision {
  std::string case_id;
  bool approve = true;
  std::string reviewer;
  std::string note;
};

nlohmann::json review_row(const CaseRecord& r);
std::vector<ReviewDecision> parse_review_decisions(std::string_view jsonl);
std::string render_review_decisions(const std::vector<ReviewDecision>& d);

struct CorpusManifest {
  std::uint64_t seed = 0;
  int n_hop = 2;
  double mask_ratio = 0.25;
  std::vector<std::string> train;
  std::vector<std::string> dev;
  std::vector<std::string> test;
  std::size_t records = 0;
  std::size_t approved = 0;
  std::size_t rejected = 0;
  std::size_t global_nodes = 0;
  std::size_t global_edges = 0;

  nlohmann::json to_json() const;
  static CorpusManifest from_json(const nlohmann::json& j);
};

struct Corpus {
  std::vector<CaseRecord> records;  // sorted by case id
  FactRuleGraph global_graph;
  CorpusManifest manifest;

  const CaseRecord* find(const std::string& case_id) const;
  std::vector<const CaseRecord*> split(Split s) const;
  std::vector<const CaseRecord*> approved() const;
};

/// Applies review decisions (records without one are approved unless already
/// rejected), merges the approved graphs, computes every subgraph and
/// candidate set, and assigns 8:1:1 splits by seeded shuffle. Throws
/// InsufficientCorpus below cfg.min_approved approved records.
Corpus finalize_corpus(std::vector<CaseRecord> records, const DatagenConfig& cfg,
                       const std::vector<ReviewDecision>& decisions);

/// Writes cases.jsonl, graphs/, global_graph.json, manifest.json,
/// review_export.jsonl and review_decisions.jsonl.
void write_corpus(const Corpus& corpus, const std::filesystem::path& dir);
Corpus load_corpus(const std::filesystem::path& dir);

struct DatagenReport {
  std::size_t built = 0;
  std::size_t reused = 0;
  std::size_t rejected = 0;
};

/// Resumable end-to-end run. Each finished record is appended to
/// cases.partial.jsonl; a rerun reuses records whose hash matches. An existing
/// review_decisions.jsonl is honoured; otherwise every built record is
/// approved and the decisions are written out.
Corpus run_datagen(const std::vector<CaseInput>& inputs, const LlmGateway& gateway, const DatagenConfig& cfg,
                   const std::filesystem::path& out_dir, DatagenReport* report = nullptr);

/// *.txt files of a directory, case id = file stem, sorted.
std::vector<CaseInput> inputs_from_directory(const std::filesystem::path& dir);

std::string read_file(const std::filesystem::path& p);
void write_file(const std::filesystem::path& p, std::string_view content);

}  // namespace casediag
