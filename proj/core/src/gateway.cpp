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

#include "casediag/gateway.hpp"

#include <algorithm>
#include <regex>
#include <set>
#include <sstream>

#include "casediag/error.hpp"
#include "casediag/text.hpp"

namespace casediag {

namespace {

constexpr std::string_view kKindNames[] = {
    "ClassifyCaseType", "IracSummarize",  "ExtractFactRuleGraph", "ReconstructCase",
    "GenerateQuestions", "AnswerAndScore", "GenerateCourtView",    "NodeToQuestion",
};

constexpr std::string_view kTemplates[] = {
    // ClassifyCaseType
    "Choose the single category that best describes the case below. Options: Contract Law, Criminal Law, "
    "Property Law, Intellectual Property Law, Business Law, Tax Law, Estate and Trust Law, Family Law, "
    "Administrative Law, Civil Law, Tort Law, Bankruptcy Law, Environmental Law. Reply with the category name only.",
    // IracSummarize
    "Summarize the case below using four sections, each introduced by its heading on its own line:\n"
    "**Issue:** the legal questions the case raises.\n"
    "**Rule:** the statutes, regulations or precedents that govern those questions.\n"
    "**Analysis:** how the rules apply to the facts of the case.\n"
    "**Conclusion:** the court's judgement on the issue.",
    // ExtractFactRuleGraph
    "Extract a fact-rule graph from the case below, ignoring the outcome. Facts are short generalized phrases "
    "and rules are brief names of bodies of law. An edge links a fact to another fact it depends on "
    "(\"Depends On\") or a fact to a rule it complies with (\"Complies With\") or violates (\"Violates\"). "
    "Only include links the text supports. Reply with a single JSON object "
    "{\"facts\": [...], \"rules\": [...], \"edges\": [{\"source\": ..., \"target\": ..., \"relation\": ...}]} "
    "and nothing else.",
    // ReconstructCase
    "Below are the issue, rule and analysis of a legal case. Rewrite them, leaving out every aspect listed "
    "after the case text.",
    // GenerateQuestions
    "Below is the conclusion of a legal case. Write 10 distinct questions that the conclusion answers, each "
    "followed by its answer. Use the form \"N. question\" then \"Answer: answer\" on the next line. Do not add "
    "any other text.",
    // AnswerAndScore
    "Below are the conclusion of a legal case and 10 questions with reference answers. Answer each question "
    "using only the conclusion. Each question answered correctly earns one point, up to 10. End your reply "
    "with \"Final score: N\".",
    // GenerateCourtView
    "Write the court view for the case below, taking the confirmed facts into account. Finish with "
    "\"[ -> Yes ]\" if the information is sufficient to reach a conclusion, otherwise with \"[ -> No ]\".",
    // NodeToQuestion
    "Turn the fact below into one short, plain-language question for the client, following the form "
    "\"Regarding your case: can you tell me more about <fact>? For example, <hint>.\"",
};

const std::set<std::string> kStopwords = {
    "a",    "an",  "and", "are", "as",   "at",    "be",   "by",   "for",  "from", "has", "have",
    "he",   "her", "his", "in",  "is",   "it",    "its",  "of",   "on",   "or",   "she", "that",
    "the",  "their", "they", "this", "to", "was", "were", "which", "who", "with", "did", "does",
};

std::string rtrim(std::string_view s) {
  std::size_t end = s.size();
  while (end > 0 && std::isspace(static_cast<unsigned char>(s[end - 1]))) --end;
  return std::string(s.substr(0, end));
}

std::string excerpt(std::string_view raw) {
  constexpr std::size_t kMax = 240;
  if (raw.size() <= kMax) return std::string(raw);
  return std::string(raw.substr(0, kMax)) + "...";
}

[[noreturn]] void parse_failure(const std::string& what, std::string_view raw) {
  throw Error(Errc::ResponseParseError, what + "; raw response: \"" + excerpt(raw) + "\"");
}

}  // namespace

std::string_view to_string(PromptKind kind) { return kKindNames[static_cast<int>(kind)]; }

PromptKind parse_prompt_kind(std::string_view name) {
  for (std::size_t i = 0; i < std::size(kKindNames); ++i) {
    if (kKindNames[i] == name) return static_cast<PromptKind>(i);
  }
  throw Error(Errc::InvalidArgument, "unknown prompt kind '" + std::string(name) + "'");
}

std::string_view prompt_template(PromptKind kind) { return kTemplates[static_cast<int>(kind)]; }

std::string_view to_string(Verdict v) { return v == Verdict::Yes ? "Yes" : "No"; }

std::string render_stop_token(Verdict v) { return "[ -> " + std::string(to_string(v)) + " ]"; }

StopTokenParse parse_stop_token(std::string_view text) {
  static const std::regex token(R"(\[\s*->\s*(Yes|No)\s*\]\s*$)");
  const std::string s(text);
  std::smatch m;
  if (std::regex_search(s, m, token)) {
    return {rtrim(std::string_view(s).substr(0, static_cast<std::size_t>(m.position(0)))),
            m[1].str() == "Yes" ? Verdict::Yes : Verdict::No};
  }
  const std::string t = rtrim(s);
  const auto open = t.rfind('[');
  if (open != std::string::npos) {
    std::string inner = t.substr(open + 1);
    const bool closed = !inner.empty() && inner.back() == ']';
    if (closed) inner.pop_back();
    const std::string bare = text::to_lower(text::trim(inner));
    if (inner.find("->") != std::string::npos || (closed && (bare == "yes" || bare == "no"))) {
      throw Error(Errc::MalformedToken, "trailing token \"" + excerpt(t.substr(open)) + "\" is not [ -> Yes ] or [ -> No ]");
    }
  }
  return {t, std::nullopt};
}

void GatewayConfig::validate() const {
  if (backend != "scripted-mock" && backend != "http") {
    throw Error(Errc::ConfigInvalid, "gateway backend must be 'scripted-mock' or 'http', got '" + backend + "'");
  }
  if (!(temperature >= 0.0 && temperature <= 2.0)) throw Error(Errc::ConfigInvalid, "temperature must lie in [0, 2]");
  if (!(top_p > 0.0 && top_p <= 1.0)) throw Error(Errc::ConfigInvalid, "top_p must lie in (0, 1]");
  if (max_tokens < 1) throw Error(Errc::ConfigInvalid, "max_tokens must be positive");
  if (max_concurrency < 1) throw Error(Errc::ConfigInvalid, "max_concurrency must be positive");
  if (max_retries < 0) throw Error(Errc::ConfigInvalid, "max_retries must be non-negative");
  if (timeout_seconds < 1) throw Error(Errc::ConfigInvalid, "timeout_seconds must be positive");
  if (backend == "http" && base_url.empty()) throw Error(Errc::ConfigInvalid, "http backend needs a base_url");
}

void FixtureSet::add(FixtureKey key, std::string response) { rows_[std::move(key)] = std::move(response); }

const std::string* FixtureSet::find(const FixtureKey& key) const {
  const auto it = rows_.find(key);
  return it == rows_.end() ? nullptr : &it->second;
}

void FixtureSet::merge(const FixtureSet& other) {
  for (const auto& [k, v] : other.rows_) rows_[k] = v;
}

FixtureSet FixtureSet::from_jsonl(std::string_view content) {
  FixtureSet set;
  std::istringstream in{std::string(content)};
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (text::trim(line).empty()) continue;
    try {
      const auto row = nlohmann::json::parse(line);
      const auto& key = row.at("key");
      set.add(FixtureKey{parse_prompt_kind(key.at("kind").get<std::string>()), key.at("case_id").get<std::string>(),
                         key.value("discriminator", "")},
              row.at("response").get<std::string>());
    } catch (const nlohmann::json::exception& e) {
      throw Error(Errc::ResponseParseError, "fixture line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return set;
}

std::string FixtureSet::to_jsonl() const {
  std::string out;
  for (const auto& [k, v] : rows_) {
    nlohmann::json row;
    row["key"] = {{"kind", to_string(k.kind)}, {"case_id", k.case_id}, {"discriminator", k.discriminator}};
    row["response"] = v;
    out += row.dump() + "\n";
  }
  return out;
}

std::string IracSummary::description() const { return issue + "\n" + rule + "\n" + analysis; }

std::string IracSummary::render() const {
  return "**Issue:**\n" + issue + "\n**Rule:**\n" + rule + "\n**Analysis:**\n" + analysis + "\n**Conclusion:**\n" +
         conclusion + "\n";
}

IracSummary parse_irac(std::string_view raw) {
  static const std::regex heading(R"((^|\n)[ \t]*\*{0,2}[ \t]*(Issue|Rule|Analysis|Conclusion)[ \t]*:[ \t]*\*{0,2})",
                                  std::regex::icase);
  const std::string s(raw);
  std::map<std::string, std::pair<std::size_t, std::size_t>> spans;  // section -> [content begin, heading begin)
  std::vector<std::pair<std::string, std::size_t>> found;
  std::vector<std::size_t> starts;
  for (auto it = std::sregex_iterator(s.begin(), s.end(), heading); it != std::sregex_iterator(); ++it) {
    found.emplace_back(text::to_lower((*it)[2].str()), static_cast<std::size_t>(it->position(0) + it->length(0)));
    starts.push_back(static_cast<std::size_t>(it->position(0)));
  }
  IracSummary out;
  std::map<std::string, std::string*> slots = {
      {"issue", &out.issue}, {"rule", &out.rule}, {"analysis", &out.analysis}, {"conclusion", &out.conclusion}};
  for (std::size_t i = 0; i < found.size(); ++i) {
    const std::size_t end = i + 1 < found.size() ? starts[i + 1] : s.size();
    std::string* slot = slots.at(found[i].first);
    if (!slot->empty()) parse_failure("IRAC section '" + found[i].first + "' appears twice", raw);
    *slot = text::trim(std::string_view(s).substr(found[i].second, end - found[i].second));
  }
  for (const auto& [name, slot] : slots) {
    if (slot->empty()) parse_failure("IRAC section '" + name + "' is missing or empty", raw);
  }
  return out;
}

RcQuestionSet parse_questions(std::string_view raw, std::string case_id) {
  static const std::regex numbered(R"(^\s*(\d+)\s*[.)]\s*(.*\S)\s*$)");
  static const std::regex answer(R"(^\s*(?:answer|a)\s*[:.]\s*(.*\S)\s*$)", std::regex::icase);
  RcQuestionSet q{std::move(case_id), {}};
  std::istringstream in{std::string(raw)};
  std::string line;
  std::smatch m;
  while (std::getline(in, line)) {
    if (std::regex_match(line, m, answer)) {
      if (q.items.empty() || !q.items.back().answer.empty()) parse_failure("answer without a question", raw);
      q.items.back().answer = m[1].str();
    } else if (std::regex_match(line, m, numbered)) {
      if (!q.items.empty() && q.items.back().answer.empty()) parse_failure("question without an answer", raw);
      q.items.push_back({m[2].str(), ""});
    } else if (!text::trim(line).empty()) {
      parse_failure("unexpected line \"" + excerpt(line) + "\"", raw);
    }
  }
  if (!q.items.empty() && q.items.back().answer.empty()) parse_failure("question without an answer", raw);
  if (q.items.size() != kQuestionsPerCase) {
    parse_failure("expected " + std::to_string(kQuestionsPerCase) + " questions, got " + std::to_string(q.items.size()),
                  raw);
  }
  return q;
}

std::string render_questions(const RcQuestionSet& q) {
  std::string out;
  for (std::size_t i = 0; i < q.items.size(); ++i) {
    out += std::to_string(i + 1) + ". " + q.items[i].question + "\nAnswer: " + q.items[i].answer + "\n";
  }
  return out;
}

int parse_final_score(std::string_view raw, std::size_t n_questions) {
  static const std::regex score(R"(final\s+score\s*[:=]?\s*(\d+))", std::regex::icase);
  const std::string s(raw);
  std::optional<int> value;
  for (auto it = std::sregex_iterator(s.begin(), s.end(), score); it != std::sregex_iterator(); ++it) {
    const auto digits = (*it)[1].str();
    value = digits.size() > 6 ? -1 : std::stoi(digits);
  }
  if (!value) parse_failure("no 'Final score: N' in response", raw);
  if (*value < 0 || static_cast<std::size_t>(*value) > n_questions) {
    parse_failure("score outside 0.." + std::to_string(n_questions), raw);
  }
  return *value;
}

FactRuleGraph parse_graph_response(std::string_view raw) {
  std::string_view body = raw;
  const auto fence = body.find("```");
  if (fence != std::string_view::npos) {
    auto start = body.find('\n', fence);
    const auto close = start == std::string_view::npos ? start : body.find("```", start);
    if (start != std::string_view::npos && close != std::string_view::npos) body = body.substr(start + 1, close - start - 1);
  }
  try {
    return parse_graph(body);
  } catch (const Error& e) {
    if (e.code() != Errc::ResponseParseError) throw;
    parse_failure(e.what(), raw);
  }
}

double rc_fraction(std::size_t correct, std::size_t total) {
  if (total == 0) throw Error(Errc::InvalidArgument, "question set is empty");
  if (correct > total) throw Error(Errc::OutOfRange, "more correct answers than questions");
  return static_cast<double>(correct) / static_cast<double>(total);
}

std::vector<std::string> key_tokens(std::string_view answer) {
  std::vector<std::string> out;
  for (auto& t : text::tokenize(answer)) {
    if (!kStopwords.contains(t)) out.push_back(std::move(t));
  }
  return out;
}

std::string court_view_discriminator(const std::vector<ConfirmedFact>& confirmed) {
  std::vector<std::string> labels;
  for (const auto& c : confirmed) labels.push_back(c.node.label);
  std::sort(labels.begin(), labels.end());
  labels.erase(std::unique(labels.begin(), labels.end()), labels.end());
  return text::join(labels, "|");
}

std::string question_hint(const NodeId& node, const FactRuleGraph& context) {
  for (const auto& e : context.edges()) {
    if (e.source != node) continue;
    switch (e.relation) {
      case Relation::DependsOn:
        return "how it relates to " + e.target.label;
      case Relation::CompliesWith:
      case Relation::Violates:
        return "whether it bears on " + e.target.label;
    }
  }
  for (const auto& e : context.edges()) {
    if (e.target == node) return "how it connects to " + e.source.label;
  }
  return "when and how it happened";
}

LlmGateway::LlmGateway(GatewayConfig cfg, std::shared_ptr<LlmBackend> backend)
    : cfg_(std::move(cfg)), backend_(std::move(backend)) {
  cfg_.validate();
  if (!backend_) throw Error(Errc::BackendUnavailable, "no LLM backend configured");
}

Completion LlmGateway::call(PromptRequest request) const { return backend_->complete(request); }

std::string LlmGateway::classify_case_type(const std::string& case_id, std::string_view case_text) const {
  PromptRequest r{PromptKind::ClassifyCaseType, case_id, "", std::string(prompt_template(PromptKind::ClassifyCaseType)) +
                                                                "\n\nCase:\n" + std::string(case_text)};
  r.payload["text"] = std::string(case_text);
  const auto out = text::trim(call(std::move(r)).text);
  if (out.empty()) parse_failure("empty case type", out);
  return out;
}

FactRuleGraph LlmGateway::extract_graph(const std::string& case_id, std::string_view case_text) const {
  PromptRequest r{PromptKind::ExtractFactRuleGraph, case_id, text::content_id(case_text),
                  std::string(prompt_template(PromptKind::ExtractFactRuleGraph)) + "\n\nCase:\n" + std::string(case_text)};
  r.payload["text"] = std::string(case_text);
  auto g = parse_graph_response(call(std::move(r)).text);
  g.set_case_id(case_id);
  return g;
}

IracSummary LlmGateway::irac_summarize(const std::string& case_id, std::string_view case_text) const {
  PromptRequest r{PromptKind::IracSummarize, case_id, "",
                  std::string(prompt_template(PromptKind::IracSummarize)) + "\n\nCase:\n" + std::string(case_text)};
  r.payload["text"] = std::string(case_text);
  return parse_irac(call(std::move(r)).text);
}

std::string LlmGateway::reconstruct_case(const std::string& case_id, std::string_view irac_text,
                                         const std::vector<std::string>& masked_aspects) const {
  std::vector<std::string> aspects = masked_aspects;
  std::sort(aspects.begin(), aspects.end());
  PromptRequest r{PromptKind::ReconstructCase, case_id, text::join(aspects, "|"),
                  std::string(prompt_template(PromptKind::ReconstructCase)) + "\n\nCase:\n" + std::string(irac_text) +
                      "\n\nAspects to leave out:\n- " + text::join(aspects, "\n- ")};
  r.payload["text"] = std::string(irac_text);
  r.payload["aspects"] = aspects;
  const auto out = text::trim(call(std::move(r)).text);
  if (out.empty()) parse_failure("empty reconstruction", out);
  return out;
}

RcQuestionSet LlmGateway::generate_questions(const std::string& case_id, std::string_view conclusion) const {
  PromptRequest r{PromptKind::GenerateQuestions, case_id, "",
                  std::string(prompt_template(PromptKind::GenerateQuestions)) + "\n\nConclusion:\n" + std::string(conclusion)};
  r.payload["text"] = std::string(conclusion);
  return parse_questions(call(std::move(r)).text, case_id);
}

double LlmGateway::rc_score(const std::string& case_id, std::string_view enhanced_view,
                            const RcQuestionSet& questions) const {
  if (questions.items.empty()) throw Error(Errc::InvalidArgument, "question set is empty");
  PromptRequest r{PromptKind::AnswerAndScore, case_id, text::content_id(enhanced_view),
                  std::string(prompt_template(PromptKind::AnswerAndScore)) + "\n\nConclusion:\n" +
                      std::string(enhanced_view) + "\n\nQuestions:\n" + render_questions(questions)};
  r.payload["view"] = std::string(enhanced_view);
  auto items = nlohmann::json::array();
  for (const auto& qa : questions.items) items.push_back({{"question", qa.question}, {"answer", qa.answer}});
  r.payload["questions"] = std::move(items);
  const int score = parse_final_score(call(std::move(r)).text, questions.items.size());
  return rc_fraction(static_cast<std::size_t>(score), questions.items.size());
}

CourtView LlmGateway::generate_court_view(const std::string& case_id, std::string_view case_text,
                                          const std::vector<ConfirmedFact>& confirmed) const {
  if (text::trim(case_text).empty()) throw Error(Errc::EmptyText, "case text is empty");
  std::string facts;
  auto labels = nlohmann::json::array();
  for (const auto& c : confirmed) {
    facts += "- " + c.node.label + ": " + c.answer + "\n";
    labels.push_back(c.node.label);
  }
  PromptRequest r{PromptKind::GenerateCourtView, case_id, court_view_discriminator(confirmed),
                  std::string(prompt_template(PromptKind::GenerateCourtView)) + "\n\nCase:\n" + std::string(case_text) +
                      "\n\nConfirmed facts:\n" + (facts.empty() ? "(none)\n" : facts)};
  r.payload["text"] = std::string(case_text);
  r.payload["confirmed"] = std::move(labels);
  const auto completion = call(std::move(r));
  auto parsed = parse_stop_token(completion.text);
  return CourtView{parsed.body, parsed.verdict.value_or(Verdict::No), completion.degraded || !parsed.verdict};
}

std::string LlmGateway::node_to_question(const std::string& case_id, const NodeId& node,
                                         const FactRuleGraph& context) const {
  const auto hint = question_hint(node, context);
  PromptRequest r{PromptKind::NodeToQuestion, case_id, node.label,
                  std::string(prompt_template(PromptKind::NodeToQuestion)) + "\n\nFact: " + node.label +
                      "\nHint: " + hint};
  r.payload["label"] = node.label;
  r.payload["hint"] = hint;
  const auto out = text::trim(call(std::move(r)).text);
  if (out.empty()) parse_failure("empty question", out);
  return out;
}

}  // namespace casediag
