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
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "casediag/graph.hpp"

namespace casediag {

enum class PromptKind {
  ClassifyCaseType,
  IracSummarize,
  ExtractFactRuleGraph,
  ReconstructCase,
  GenerateQuestions,
  AnswerAndScore,
  GenerateCourtView,
  NodeToQuestion,
};

inline constexpr PromptKind kAllPromptKinds[] = {
    PromptKind::ClassifyCaseType,  PromptKind::IracSummarize,  PromptKind::ExtractFactRuleGraph,
    PromptKind::ReconstructCase,   PromptKind::GenerateQuestions, PromptKind::AnswerAndScore,
    PromptKind::GenerateCourtView, PromptKind::NodeToQuestion,
};

std::string_view to_string(PromptKind kind);
PromptKind parse_prompt_kind(std::string_view name);

/// The instruction text sent ahead of every request of `kind`.
std::string_view prompt_template(PromptKind kind);

enum class Verdict { Yes, No };

std::string_view to_string(Verdict v);

/// "[ -> Yes ]" or "[ -> No ]".
std::string render_stop_token(Verdict v);

struct StopTokenParse {
  std::string body;
  std::optional<Verdict> verdict;
};

/// Strips a trailing `[ -> Yes ]` / `[ -> No ]` (any interior whitespace).
/// A trailing bracket that opens with "->" but does not match throws MalformedToken.
StopTokenParse parse_stop_token(std::string_view text);

struct GatewayConfig {
  std::string backend = "scripted-mock";  // or "http"
  double temperature = 0.8;
  double top_p = 0.9;
  int max_tokens = 4096;
  std::string fixtures;  // JSONL fixture file for the mock
  std::string base_url;
  std::string token_env = "CASEDIAG_LLM_TOKEN";
  int max_concurrency = 4;
  int max_retries = 3;
  int timeout_seconds = 60;

  void validate() const;
};

struct PromptRequest {
  PromptKind kind = PromptKind::ClassifyCaseType;
  std::string case_id;
  std::string discriminator;
  std::string prompt;
  nlohmann::json payload = nlohmann::json::object();
};

struct Completion {
  std::string text;
  bool degraded = false;
};

class LlmBackend {
 public:
  virtual ~LlmBackend() = default;
  virtual Completion complete(const PromptRequest& request) = 0;
  virtual std::string name() const = 0;
  virtual bool healthy() const { return true; }
};

struct FixtureKey {
  PromptKind kind = PromptKind::ClassifyCaseType;
  std::string case_id;
  std::string discriminator;

  auto operator<=>(const FixtureKey&) const = default;
};

class FixtureSet {
 public:
  void add(FixtureKey key, std::string response);
  const std::string* find(const FixtureKey& key) const;
  std::size_t size() const { return rows_.size(); }
  const std::map<FixtureKey, std::string>& rows() const { return rows_; }

  /// One JSON object per line; later rows override earlier ones.
  static FixtureSet from_jsonl(std::string_view content);
  static FixtureSet load(const std::string& path);
  std::string to_jsonl() const;
  void merge(const FixtureSet& other);

 private:
  std::map<FixtureKey, std::string> rows_;
};

/// Offline backend: exact fixture lookup, then a scripted rule per kind.
/// A court-view rule is stored under discriminator "*" as
/// {"view": gold view, "required": [fact labels]}; the verdict is Yes once
/// every required label is confirmed or mentioned in the case text.
class ScriptedMockBackend final : public LlmBackend {
 public:
  explicit ScriptedMockBackend(FixtureSet fixtures);
  Completion complete(const PromptRequest& request) override;
  std::string name() const override { return "scripted-mock"; }
  const FixtureSet& fixtures() const { return fixtures_; }

 private:
  FixtureSet fixtures_;
  FactRuleGraph vocabulary_;
};

/// POSTs {prompt, temperature, top_p, max_tokens} to `<base_url>/v1/complete`
/// and reads {"text"}. Bearer token comes from the configured env var.
class HttpLlmBackend final : public LlmBackend {
 public:
  explicit HttpLlmBackend(GatewayConfig cfg);
  ~HttpLlmBackend() override;
  Completion complete(const PromptRequest& request) override;
  std::string name() const override { return "http"; }
  bool healthy() const override;

 private:
  struct Limiter;
  GatewayConfig cfg_;
  std::unique_ptr<Limiter> limiter_;
};

std::shared_ptr<LlmBackend> make_backend(const GatewayConfig& cfg);

struct QaPair {
  std::string question;
  std::string answer;
};

struct RcQuestionSet {
  std::string case_id;
  std::vector<QaPair> items;
};

inline constexpr std::size_t kQuestionsPerCase = 10;

struct IracSummary {
  std::string issue;
  std::string rule;
  std::string analysis;
  std::string conclusion;

  /// Issue, rule and analysis joined: the fact description.
  std::string description() const;
  std::string render() const;
};

struct CourtView {
  std::string view;
  Verdict verdict = Verdict::No;
  bool degraded = false;
};

struct ConfirmedFact {
  NodeId node;
  std::string answer;
};

// Response parsers. Failures throw ResponseParseError quoting the raw text.
IracSummary parse_irac(std::string_view raw);
RcQuestionSet parse_questions(std::string_view raw, std::string case_id);
std::string render_questions(const RcQuestionSet& q);
/// "Final score: N" with 0 <= N <= n_questions.
int parse_final_score(std::string_view raw, std::size_t n_questions);
FactRuleGraph parse_graph_response(std::string_view raw);

/// Correct answers over |Q|, computed exactly.
double rc_fraction(std::size_t correct, std::size_t total);

/// Key tokens of an answer: lower-cased tokens minus a small stopword list.
std::vector<std::string> key_tokens(std::string_view answer);

/// Discriminator of a court-view request: sorted confirmed labels joined by '|'.
std::string court_view_discriminator(const std::vector<ConfirmedFact>& confirmed);

/// Relation-derived hint used when turning a node into a question.
std::string question_hint(const NodeId& node, const FactRuleGraph& context);

class LlmGateway {
 public:
  LlmGateway(GatewayConfig cfg, std::shared_ptr<LlmBackend> backend);

  const GatewayConfig& config() const { return cfg_; }
  LlmBackend& backend() const { return *backend_; }

  std::string classify_case_type(const std::string& case_id, std::string_view case_text) const;
  FactRuleGraph extract_graph(const std::string& case_id, std::string_view case_text) const;
  IracSummary irac_summarize(const std::string& case_id, std::string_view case_text) const;
  std::string reconstruct_case(const std::string& case_id, std::string_view irac_text,
                               const std::vector<std::string>& masked_aspects) const;
  RcQuestionSet generate_questions(const std::string& case_id, std::string_view conclusion) const;
  double rc_score(const std::string& case_id, std::string_view enhanced_view, const RcQuestionSet& questions) const;
  CourtView generate_court_view(const std::string& case_id, std::string_view case_text,
                                const std::vector<ConfirmedFact>& confirmed) const;
  std::string node_to_question(const std::string& case_id, const NodeId& node, const FactRuleGraph& context) const;

 private:
  Completion call(PromptRequest request) const;

  GatewayConfig cfg_;
  std::shared_ptr<LlmBackend> backend_;
};

}  // namespace casediag
