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

#include "casediag/corpus.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

#include "casediag/error.hpp"
#include "casediag/rng.hpp"
#include "casediag/text.hpp"

namespace casediag {

namespace fs = std::filesystem;

namespace {

nlohmann::json labels_json(const std::vector<NodeId>& nodes) {
  auto out = nlohmann::json::array();
  for (const auto& n : nodes) out.push_back(n.label);
  return out;
}

std::vector<NodeId> facts_from(const nlohmann::json& j) {
  std::vector<NodeId> out;
  for (const auto& l : j) out.push_back(fact(l.get<std::string>()));
  return out;
}

std::string graph_file(const std::string& case_id, std::string_view kind) {
  return "graphs/" + case_id + "." + std::string(kind) + ".json";
}

nlohmann::json questions_json(const RcQuestionSet& q) {
  auto out = nlohmann::json::array();
  for (const auto& qa : q.items) out.push_back({{"question", qa.question}, {"answer", qa.answer}});
  return out;
}

std::vector<std::string> jsonl_lines(std::string_view content) {
  std::vector<std::string> out;
  std::istringstream in{std::string(content)};
  std::string line;
  while (std::getline(in, line)) {
    if (!text::trim(line).empty()) out.push_back(line);
  }
  return out;
}

std::vector<CaseRecord> load_partial(const fs::path& path) {
  std::vector<CaseRecord> out;
  if (!fs::exists(path)) return out;
  for (const auto& line : jsonl_lines(read_file(path))) {
    try {
      out.push_back(CaseRecord::from_json(nlohmann::json::parse(line)));
    } catch (const std::exception&) {
      // A torn final line from an interrupted run is rebuilt.
    }
  }
  return out;
}

}  // namespace

std::string_view to_string(ReviewStatus s) {
  switch (s) {
    case ReviewStatus::Unreviewed:
      return "unreviewed";
    case ReviewStatus::Approved:
      return "approved";
    case ReviewStatus::Rejected:
      return "rejected";
  }
  return "unreviewed";
}

std::string_view to_string(Split s) {
  switch (s) {
    case Split::Train:
      return "train";
    case Split::Dev:
      return "dev";
    case Split::Test:
      return "test";
    case Split::None:
      break;
  }
  return "none";
}

ReviewStatus parse_review_status(std::string_view s) {
  for (auto v : {ReviewStatus::Unreviewed, ReviewStatus::Approved, ReviewStatus::Rejected}) {
    if (to_string(v) == s) return v;
  }
  throw Error(Errc::InvalidArgument, "unknown review status '" + std::string(s) + "'");
}

Split parse_split(std::string_view s) {
  for (auto v : {Split::None, Split::Train, Split::Dev, Split::Test}) {
    if (to_string(v) == s) return v;
  }
  throw Error(Errc::InvalidArgument, "unknown split '" + std::string(s) + "'");
}

nlohmann::json CaseRecord::to_json(bool inline_graphs) const {
  nlohmann::json j;
  j["case_id"] = case_id;
  j["content_hash"] = content_hash;
  j["raw_text"] = raw_text;
  j["case_type"] = case_type;
  j["irac"] = {{"issue", irac.issue}, {"rule", irac.rule}, {"analysis", irac.analysis}, {"conclusion", irac.conclusion}};
  j["description"] = description;
  j["court_view"] = court_view;
  j["questions"] = questions_json(questions);
  auto graph_ref = [&](const FactRuleGraph& g, std::string_view kind) -> nlohmann::json {
    if (g.nodes().empty()) return nullptr;
    return inline_graphs ? casediag::to_json(g) : nlohmann::json(graph_file(case_id, kind));
  };
  j["graph"] = graph_ref(graph, "graph");
  j["masked_graph"] = graph_ref(masked_graph, "masked");
  j["removed"] = labels_json(removed);
  j["reconstructed_description"] = reconstructed_description;
  j["reconstructed_view"] = reconstructed_view;
  j["subgraph"] = graph_ref(subgraph, "subgraph");
  j["candidates"] = labels_json(candidates);
  j["relevant"] = relevant;
  j["review_status"] = to_string(status);
  j["status_note"] = status_note;
  j["split"] = to_string(split);
  return j;
}

CaseRecord CaseRecord::from_json(const nlohmann::json& j, const fs::path& corpus_dir) {
  CaseRecord r;
  r.case_id = j.at("case_id").get<std::string>();
  r.content_hash = j.at("content_hash").get<std::string>();
  r.raw_text = j.at("raw_text").get<std::string>();
  r.case_type = j.at("case_type").get<std::string>();
  const auto& irac = j.at("irac");
  r.irac = {irac.at("issue").get<std::string>(), irac.at("rule").get<std::string>(),
            irac.at("analysis").get<std::string>(), irac.at("conclusion").get<std::string>()};
  r.description = j.at("description").get<std::string>();
  r.court_view = j.at("court_view").get<std::string>();
  r.questions.case_id = r.case_id;
  for (const auto& qa : j.at("questions")) {
    r.questions.items.push_back({qa.at("question").get<std::string>(), qa.at("answer").get<std::string>()});
  }
  auto load = [&](const char* key) {
    const auto& v = j.at(key);
    if (v.is_null()) return FactRuleGraph{};
    if (v.is_object()) return graph_from_json(v);
    return parse_graph(read_file(corpus_dir / v.get<std::string>()));
  };
  r.graph = load("graph");
  r.masked_graph = load("masked_graph");
  r.subgraph = load("subgraph");
  r.removed = facts_from(j.at("removed"));
  r.reconstructed_description = j.at("reconstructed_description").get<std::string>();
  r.reconstructed_view = j.at("reconstructed_view").get<std::string>();
  r.candidates = facts_from(j.at("candidates"));
  r.relevant = j.value("relevant", std::vector<std::string>{});
  r.status = parse_review_status(j.at("review_status").get<std::string>());
  r.status_note = j.value("status_note", "");
  r.split = parse_split(j.value("split", "none"));
  return r;
}

void DatagenConfig::validate() const {
  if (n_hop < 1) throw Error(Errc::ConfigInvalid, "n_hop must be at least 1");
  if (!(mask_ratio > 0.0 && mask_ratio < 1.0)) throw Error(Errc::ConfigInvalid, "mask_ratio must lie in (0, 1)");
}

std::string record_hash(const CaseInput& input, const DatagenConfig& cfg) {
  std::string key = input.case_id + '\x1f' + input.raw_text + '\x1f' + std::to_string(cfg.seed) + '\x1f' +
                    std::to_string(cfg.mask_ratio);
  if (input.forced_mask) key += '\x1f' + text::join(*input.forced_mask, "|");
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(fnv1a64(key)));
  return buf;
}

CaseRecord build_case(const CaseInput& input, const LlmGateway& gateway, const DatagenConfig& cfg) {
  CaseRecord r;
  r.case_id = input.case_id;
  r.raw_text = input.raw_text;
  r.relevant = input.relevant;
  r.content_hash = record_hash(input, cfg);
  try {
    if (text::trim(input.raw_text).empty()) throw Error(Errc::EmptyText, "raw case text is empty");
    r.graph = gateway.extract_graph(r.case_id, r.raw_text);
    r.case_type = gateway.classify_case_type(r.case_id, r.raw_text);
    r.irac = gateway.irac_summarize(r.case_id, r.raw_text);
    r.description = r.irac.description();
    r.court_view = r.irac.conclusion;
    r.questions = gateway.generate_questions(r.case_id, r.court_view);
    if (input.forced_mask) {
      std::set<NodeId> drop;
      for (const auto& label : *input.forced_mask) {
        const auto n = fact(label);
        if (!r.graph.contains(n)) throw Error(Errc::InvalidArgument, "forced mask names unknown fact '" + label + "'");
        drop.insert(n);
      }
      if (drop.size() >= r.graph.fact_count()) throw Error(Errc::TooFewFacts, "forced mask removes every fact");
      std::set<NodeId> keep;
      for (const auto& n : r.graph.nodes()) {
        if (!drop.contains(n)) keep.insert(n);
      }
      r.masked_graph = r.graph.induced(keep);
      r.masked_graph.set_case_id(r.case_id);
      r.removed.assign(drop.begin(), drop.end());
    } else {
      auto m = mask_graph(r.graph, cfg.mask_ratio, mix_seed(cfg.seed, fnv1a64(r.case_id)));
      r.masked_graph = std::move(m.masked);
      r.removed.assign(m.removed.begin(), m.removed.end());
    }
    std::vector<std::string> aspects;
    for (const auto& n : r.removed) aspects.push_back(n.label);
    r.reconstructed_description = gateway.reconstruct_case(r.case_id, r.description, aspects);
    r.reconstructed_view = gateway.reconstruct_case(r.case_id, r.court_view, aspects);
    r.status = ReviewStatus::Unreviewed;
  } catch (const Error& e) {
    r.status = ReviewStatus::Rejected;
    r.status_note = e.what();
  }
  return r;
}

nlohmann::json review_row(const CaseRecord& r) {
  nlohmann::json j;
  j["case_id"] = r.case_id;
  j["status"] = to_string(r.status);
  j["status_note"] = r.status_note;
  j["raw_text"] = r.raw_text;
  j["case_type"] = r.case_type;
  j["description"] = r.description;
  j["court_view"] = r.court_view;
  j["questions"] = questions_json(r.questions);
  j["graph"] = r.graph.nodes().empty() ? nlohmann::json(nullptr) : casediag::to_json(r.graph);
  j["removed"] = labels_json(r.removed);
  j["reconstructed_description"] = r.reconstructed_description;
  j["reconstructed_view"] = r.reconstructed_view;
  return j;
}

std::vector<ReviewDecision> parse_review_decisions(std::string_view jsonl) {
  std::vector<ReviewDecision> out;
  std::size_t line_no = 0;
  for (const auto& line : jsonl_lines(jsonl)) {
    ++line_no;
    try {
      const auto j = nlohmann::json::parse(line);
      const auto decision = j.at("decision").get<std::string>();
      if (decision != "approve" && decision != "reject") {
        throw Error(Errc::InvalidArgument, "decision must be 'approve' or 'reject'");
      }
      out.push_back({j.at("case_id").get<std::string>(), decision == "approve", j.value("reviewer", ""),
                     j.value("note", "")});
    } catch (const nlohmann::json::exception& e) {
      throw Error(Errc::ResponseParseError, "review decision line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return out;
}

std::string render_review_decisions(const std::vector<ReviewDecision>& d) {
  std::string out;
  for (const auto& r : d) {
    out += nlohmann::json{{"case_id", r.case_id},
                          {"decision", r.approve ? "approve" : "reject"},
                          {"reviewer", r.reviewer},
                          {"note", r.note}}
               .dump() +
           "\n";
  }
  return out;
}

nlohmann::json CorpusManifest::to_json() const {
  return {{"format", "casediag.corpus"},
          {"version", 1},
          {"seed", seed},
          {"n_hop", n_hop},
          {"mask_ratio", mask_ratio},
          {"global_graph", "global_graph.json"},
          {"splits", {{"train", train}, {"dev", dev}, {"test", test}}},
          {"counts",
           {{"records", records},
            {"approved", approved},
            {"rejected", rejected},
            {"train", train.size()},
            {"dev", dev.size()},
            {"test", test.size()},
            {"global_nodes", global_nodes},
            {"global_edges", global_edges}}}};
}

CorpusManifest CorpusManifest::from_json(const nlohmann::json& j) {
  if (j.value("format", "") != "casediag.corpus" || j.value("version", 0) != 1) {
    throw Error(Errc::InvalidArgument, "unsupported corpus manifest format/version");
  }
  CorpusManifest m;
  m.seed = j.at("seed").get<std::uint64_t>();
  m.n_hop = j.at("n_hop").get<int>();
  m.mask_ratio = j.at("mask_ratio").get<double>();
  m.train = j.at("splits").at("train").get<std::vector<std::string>>();
  m.dev = j.at("splits").at("dev").get<std::vector<std::string>>();
  m.test = j.at("splits").at("test").get<std::vector<std::string>>();
  const auto& c = j.at("counts");
  m.records = c.at("records").get<std::size_t>();
  m.approved = c.at("approved").get<std::size_t>();
  m.rejected = c.at("rejected").get<std::size_t>();
  m.global_nodes = c.at("global_nodes").get<std::size_t>();
  m.global_edges = c.at("global_edges").get<std::size_t>();
  return m;
}

const CaseRecord* Corpus::find(const std::string& case_id) const {
  for (const auto& r : records) {
    if (r.case_id == case_id) return &r;
  }
  return nullptr;
}

std::vector<const CaseRecord*> Corpus::split(Split s) const {
  std::vector<const CaseRecord*> out;
  for (const auto& r : records) {
    if (r.split == s && r.status == ReviewStatus::Approved) out.push_back(&r);
  }
  return out;
}

std::vector<const CaseRecord*> Corpus::approved() const {
  std::vector<const CaseRecord*> out;
  for (const auto& r : records) {
    if (r.status == ReviewStatus::Approved) out.push_back(&r);
  }
  return out;
}

Corpus finalize_corpus(std::vector<CaseRecord> records, const DatagenConfig& cfg,
                       const std::vector<ReviewDecision>& decisions) {
  cfg.validate();
  std::sort(records.begin(), records.end(), [](const auto& a, const auto& b) { return a.case_id < b.case_id; });
  for (std::size_t i = 1; i < records.size(); ++i) {
    if (records[i].case_id == records[i - 1].case_id) {
      throw Error(Errc::InvalidArgument, "duplicate case id '" + records[i].case_id + "'");
    }
  }
  std::map<std::string, const ReviewDecision*> by_case;
  for (const auto& d : decisions) by_case[d.case_id] = &d;
  for (auto& r : records) {
    r.split = Split::None;
    r.subgraph = {};
    r.candidates.clear();
    if (r.status == ReviewStatus::Rejected) continue;
    const auto it = by_case.find(r.case_id);
    if (it == by_case.end() || it->second->approve) {
      const bool complete = r.questions.items.size() == kQuestionsPerCase && !r.graph.nodes().empty() &&
                            !r.reconstructed_description.empty() && !r.reconstructed_view.empty();
      r.status = complete ? ReviewStatus::Approved : ReviewStatus::Rejected;
      if (!complete) r.status_note = "record incomplete";
    } else {
      r.status = ReviewStatus::Rejected;
      r.status_note = "review: " + it->second->note;
    }
  }

  Corpus c;
  std::vector<FactRuleGraph> graphs;
  for (const auto& r : records) {
    if (r.status == ReviewStatus::Approved) graphs.push_back(r.graph);
  }
  if (graphs.size() < cfg.min_approved) {
    throw Error(Errc::InsufficientCorpus, "need at least " + std::to_string(cfg.min_approved) +
                                              " approved records, have " + std::to_string(graphs.size()));
  }
  c.global_graph = merge(graphs);

  std::vector<std::string> ids;
  for (auto& r : records) {
    if (r.status != ReviewStatus::Approved) continue;
    std::set<NodeId> seeds(r.masked_graph.nodes().begin(), r.masked_graph.nodes().end());
    r.subgraph = n_hop_subgraph(c.global_graph, seeds, cfg.n_hop);
    r.subgraph.set_case_id(r.case_id);
    r.candidates = candidate_facts(r.subgraph, r.masked_graph).facts;
    ids.push_back(r.case_id);
  }

  Rng rng(mix_seed(cfg.seed, fnv1a64("splits")));
  for (std::size_t i = 0; i + 1 < ids.size(); ++i) std::swap(ids[i], ids[i + rng.index(ids.size() - i)]);
  const std::size_t n_eval = ids.size() / 10;
  auto& m = c.manifest;
  m.seed = cfg.seed;
  m.n_hop = cfg.n_hop;
  m.mask_ratio = cfg.mask_ratio;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    auto& bucket = i < n_eval ? m.dev : i < 2 * n_eval ? m.test : m.train;
    bucket.push_back(ids[i]);
  }
  for (auto* v : {&m.train, &m.dev, &m.test}) std::sort(v->begin(), v->end());
  std::map<std::string, Split> assignment;
  for (const auto& id : m.train) assignment[id] = Split::Train;
  for (const auto& id : m.dev) assignment[id] = Split::Dev;
  for (const auto& id : m.test) assignment[id] = Split::Test;
  for (auto& r : records) {
    if (auto it = assignment.find(r.case_id); it != assignment.end()) r.split = it->second;
  }
  m.records = records.size();
  m.approved = ids.size();
  m.rejected = records.size() - ids.size();
  m.global_nodes = c.global_graph.nodes().size();
  m.global_edges = c.global_graph.edges().size();
  c.records = std::move(records);
  return c;
}

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw Error(Errc::IoError, "cannot read '" + p.string() + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void write_file(const fs::path& p, std::string_view content) {
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(Errc::IoError, "cannot write '" + p.string() + "'");
  out << content;
  if (!out) throw Error(Errc::IoError, "write failed for '" + p.string() + "'");
}

void write_corpus(const Corpus& corpus, const fs::path& dir) {
  fs::create_directories(dir / "graphs");
  std::string cases;
  std::string review;
  for (const auto& r : corpus.records) {
    cases += r.to_json(false).dump() + "\n";
    review += review_row(r).dump() + "\n";
    if (!r.graph.nodes().empty()) write_file(dir / graph_file(r.case_id, "graph"), serialize(r.graph) + "\n");
    if (!r.masked_graph.nodes().empty()) write_file(dir / graph_file(r.case_id, "masked"), serialize(r.masked_graph) + "\n");
    if (!r.subgraph.nodes().empty()) write_file(dir / graph_file(r.case_id, "subgraph"), serialize(r.subgraph) + "\n");
  }
  write_file(dir / "cases.jsonl", cases);
  write_file(dir / "review_export.jsonl", review);
  write_file(dir / "global_graph.json", serialize(corpus.global_graph) + "\n");
  write_file(dir / "manifest.json", corpus.manifest.to_json().dump(2) + "\n");
}

Corpus load_corpus(const fs::path& dir) {
  Corpus c;
  c.manifest = CorpusManifest::from_json(nlohmann::json::parse(read_file(dir / "manifest.json")));
  c.global_graph = parse_graph(read_file(dir / "global_graph.json"));
  for (const auto& line : jsonl_lines(read_file(dir / "cases.jsonl"))) {
    c.records.push_back(CaseRecord::from_json(nlohmann::json::parse(line), dir));
  }
  return c;
}

Corpus run_datagen(const std::vector<CaseInput>& inputs, const LlmGateway& gateway, const DatagenConfig& cfg,
                   const fs::path& out_dir, DatagenReport* report) {
  cfg.validate();
  fs::create_directories(out_dir);
  const auto partial_path = out_dir / "cases.partial.jsonl";
  std::map<std::string, CaseRecord> done;
  for (auto& r : load_partial(partial_path)) done[r.content_hash] = std::move(r);

  DatagenReport rep;
  std::vector<CaseRecord> records;
  std::ofstream partial(partial_path, std::ios::app | std::ios::binary);
  if (!partial) throw Error(Errc::IoError, "cannot append to '" + partial_path.string() + "'");
  for (const auto& input : inputs) {
    const auto hash = record_hash(input, cfg);
    if (auto it = done.find(hash); it != done.end() && it->second.case_id == input.case_id) {
      records.push_back(it->second);
      ++rep.reused;
    } else {
      records.push_back(build_case(input, gateway, cfg));
      ++rep.built;
      partial << records.back().to_json(true).dump() << "\n";
      partial.flush();
    }
    if (records.back().status == ReviewStatus::Rejected) ++rep.rejected;
  }
  partial.close();

  const auto decisions_path = out_dir / "review_decisions.jsonl";
  std::vector<ReviewDecision> decisions;
  if (fs::exists(decisions_path)) {
    decisions = parse_review_decisions(read_file(decisions_path));
  } else {
    std::string review;
    for (const auto& r : records) {
      review += review_row(r).dump() + "\n";
      if (r.status != ReviewStatus::Rejected) decisions.push_back({r.case_id, true, "auto", ""});
    }
    std::sort(decisions.begin(), decisions.end(), [](const auto& a, const auto& b) { return a.case_id < b.case_id; });
    write_file(out_dir / "review_export.jsonl", review);
    write_file(decisions_path, render_review_decisions(decisions));
  }
  auto corpus = finalize_corpus(std::move(records), cfg, decisions);
  write_corpus(corpus, out_dir);
  if (report != nullptr) *report = rep;
  return corpus;
}

std::vector<CaseInput> inputs_from_directory(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw Error(Errc::IoError, "'" + dir.string() + "' is not a directory");
  std::vector<CaseInput> out;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ".txt") {
      out.push_back({entry.path().stem().string(), read_file(entry.path()), {}, std::nullopt});
    }
  }
  std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.case_id < b.case_id; });
  return out;
}

}  // namespace casediag
