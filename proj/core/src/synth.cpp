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

#include "casediag/synth.hpp"

#include <algorithm>
#include <cstdio>

#include <nlohmann/json.hpp>

#include "casediag/error.hpp"
#include "casediag/rng.hpp"
#include "casediag/text.hpp"

namespace casediag {

namespace {

constexpr const char* kEvidenceRule = "rules of evidence";
constexpr const char* kCriminalCode = "criminal code";

struct FactSpec {
  const char* label;
  const char* sentence;
  Relation statute;        // relation to the template statute
  bool evidence = false;   // also complies with the rules of evidence
  bool exculpatory = false;
  const char* depends_on = nullptr;
};

struct Template {
  const char* crime;
  const char* statute;
  int core;  // the first `core` facts are always present
  std::vector<FactSpec> facts;
};

const std::vector<Template>& templates() {
  static const std::vector<Template> t = {
      {"burglary",
       "burglary statute",
       3,
       {
           {"forced entry", "Investigators documented forced entry at the rear of the building.", Relation::Violates},
           {"stolen goods", "Police recovered stolen goods from the accused's garage.", Relation::Violates, false, false,
            "forced entry"},
           {"dwelling", "The premises were a dwelling occupied by a family of four.", Relation::Violates},
           {"night visit", "A neighbour reported a night visit to the property.", Relation::Violates, false, false,
            "forced entry"},
           {"broken window", "Officers photographed a broken window beside the kitchen.", Relation::Violates},
           {"crowbar", "A crowbar was found near the garden shed.", Relation::Violates},
           {"fingerprints", "Fingerprints lifted from the frame matched the accused.", Relation::Violates, true},
           {"neighbour witness", "A neighbour witness described a figure leaving with a bag.", Relation::Violates, true},
           {"pawn shop sale", "Records show a pawn shop sale of jewellery two days later.", Relation::Violates, false,
            false, "stolen goods"},
           {"security footage", "Security footage from the street showed a hooded man.", Relation::Violates, true},
           {"prior burglary conviction", "The accused has a prior burglary conviction from five years ago.",
            Relation::Violates},
           {"getaway car", "A getaway car was seen idling at the corner.", Relation::Violates},
       }},
      {"assault",
       "assault statute",
       3,
       {
           {"physical altercation", "There was a physical altercation outside the venue.", Relation::Violates},
           {"bodily injury", "The complainant suffered bodily injury to the face.", Relation::Violates, false, false,
            "physical altercation"},
           {"victim statement", "The victim statement names the accused as the aggressor.", Relation::Violates, true},
           {"alibi", "Colleagues confirm an alibi placing the accused at work during the incident.",
            Relation::CompliesWith, true, true},
           {"self defense claim", "The accused raised a self defense claim during questioning.", Relation::CompliesWith,
            false, true},
           {"bar fight", "The dispute began as a bar fight over a spilled drink.", Relation::Violates, false, false,
            "physical altercation"},
           {"medical report", "A medical report lists bruising and a cut lip.", Relation::Violates, true},
           {"threatening message", "A threatening message was sent an hour before.", Relation::Violates},
           {"weapon present", "Staff said a weapon present at the scene was a bottle.", Relation::Violates},
           {"intoxication", "Both men showed intoxication according to the bouncer.", Relation::Violates},
           {"bystander video", "A bystander video captured part of the exchange.", Relation::Violates, true},
           {"provocation", "Witnesses mention provocation by the complainant.", Relation::CompliesWith},
       }},
      {"fraud",
       "fraud statute",
       3,
       {
           {"false invoice", "The company paid a false invoice for services never rendered.", Relation::Violates},
           {"financial loss", "The employer suffered a financial loss of forty thousand.", Relation::Violates, false,
            false, "false invoice"},
           {"bank transfer", "Each payment left by bank transfer to a private account.", Relation::Violates},
           {"forged signature", "The approval form bears a forged signature of the manager.", Relation::Violates},
           {"shell company", "The payee was a shell company registered to a relative.", Relation::Violates},
           {"email records", "Email records show the accused drafting the invoices.", Relation::Violates, true},
           {"accountant testimony", "An accountant testimony explains the ledger gaps.", Relation::Violates, true},
           {"repeated payments", "There were repeated payments over eleven months.", Relation::Violates, false, false,
            "bank transfer"},
           {"fake identity", "A fake identity was used to open the account.", Relation::Violates},
           {"audit findings", "The audit findings flagged unusual vendor activity.", Relation::Violates, true},
           {"offshore account", "Funds later moved to an offshore account.", Relation::Violates},
           {"refund request", "The accused filed a refund request after discovery.", Relation::CompliesWith},
       }},
      {"drug possession",
       "controlled substances act",
       3,
       {
           {"seized narcotics", "Officers logged seized narcotics weighing forty grams.", Relation::Violates},
           {"traffic stop", "The encounter started with a traffic stop for speeding.", Relation::CompliesWith},
           {"lab analysis", "A lab analysis confirmed the powder was cocaine.", Relation::Violates, true, false,
            "seized narcotics"},
           {"vehicle search", "A vehicle search revealed a hidden compartment.", Relation::Violates, false, false,
            "traffic stop"},
           {"digital scale", "A digital scale was found beside the seat.", Relation::Violates},
           {"large cash amount", "Police noted a large cash amount in small bills.", Relation::Violates},
           {"informant tip", "An informant tip had described the car.", Relation::Violates},
           {"search warrant", "No search warrant had been issued that day.", Relation::CompliesWith},
           {"chain of custody", "Defence counsel questioned the chain of custody.", Relation::CompliesWith, true},
           {"prior drug arrest", "The driver had a prior drug arrest in another county.", Relation::Violates},
           {"passenger present", "A passenger present in the car denied ownership.", Relation::CompliesWith},
           {"admission to officer", "The driver made an admission to officer at the roadside.", Relation::Violates,
            true},
       }},
      {"theft",
       "theft statute",
       3,
       {
           {"shoplifting", "Store staff reported shoplifting from the electronics aisle.", Relation::Violates},
           {"loss prevention officer", "A loss prevention officer stopped the accused.", Relation::Violates, true},
           {"concealed merchandise", "Concealed merchandise was found inside a coat lining.", Relation::Violates, false,
            false, "shoplifting"},
           {"store receipt", "The accused produced a store receipt for one item.", Relation::CompliesWith, false, true},
           {"in store camera", "The in store camera recorded the aisle.", Relation::Violates, true},
           {"price tag removal", "Staff noticed price tag removal on two boxes.", Relation::Violates},
           {"accomplice", "An accomplice distracted the cashier.", Relation::Violates},
           {"merchandise value", "The merchandise value was estimated at six hundred.", Relation::Violates},
           {"exit alarm", "The exit alarm sounded at the doors.", Relation::Violates},
           {"prior warning", "Management had issued a prior warning last spring.", Relation::Violates},
           {"return attempt", "There was a return attempt at another branch.", Relation::Violates},
           {"empty bag", "The accused carried an empty bag on arrival.", Relation::Violates},
       }},
  };
  return t;
}

const char* kNumbers[] = {"one", "two", "three", "four", "five", "six", "seven", "eight"};

SynthCase build(const std::string& case_id, const Template& t, const std::vector<std::size_t>& chosen,
                int sentence_years) {
  SynthCase c;
  c.case_id = case_id;
  c.crime = t.crime;
  c.graph.set_case_id(case_id);
  std::set<std::string> present;
  for (auto i : chosen) present.insert(t.facts[i].label);
  bool exculpated = false;
  for (auto i : chosen) {
    const auto& f = t.facts[i];
    const auto node = fact(f.label);
    c.graph.add_edge(node, rule(t.statute), f.statute);
    if (f.evidence) c.graph.add_edge(node, rule(kEvidenceRule), Relation::CompliesWith);
    if (&f == &t.facts.front()) c.graph.add_edge(node, rule(kCriminalCode), Relation::Violates);
    if (f.depends_on != nullptr && present.contains(f.depends_on)) {
      c.graph.add_edge(node, fact(f.depends_on), Relation::DependsOn);
    }
    exculpated = exculpated || f.exculpatory;
  }
  for (const auto& f : t.facts) c.relevant.emplace_back(f.label);

  std::vector<std::string> facts_sorted;
  for (const auto& n : c.graph.fact_nodes()) facts_sorted.push_back(n.label);
  for (const auto& label : facts_sorted) {
    for (const auto& f : t.facts) {
      if (label == f.label) c.fact_sentences.emplace_back(f.sentence);
    }
  }
  const std::string verdict = exculpated ? "not guilty" : "guilty";
  const std::string sentence_text = exculpated ? "No custodial term was imposed."
                                               : std::string("The custodial term is ") + kNumbers[sentence_years - 1] +
                                                     " years.";
  c.irac.issue = "Whether the accused is criminally liable for " + std::string(t.crime) + ".";
  c.irac.rule = "The " + std::string(t.statute) + " and the " + kCriminalCode + " govern liability, and the " +
                kEvidenceRule + " govern proof.";
  c.irac.analysis = text::join(c.fact_sentences, " ");
  std::vector<std::string> conclusion{"The court finds the accused " + verdict + " of " + t.crime + ".", sentence_text,
                                      "The court applied the " + std::string(t.statute) + "."};
  for (const auto& label : facts_sorted) conclusion.push_back("The court relied on the " + label + ".");
  c.irac.conclusion = text::join(conclusion, " ");

  c.raw_text = "Case " + case_id + ". The accused was charged with " + t.crime + ". " + c.irac.analysis +
               " The matter proceeded to judgment under the " + t.statute + ".";

  c.questions.case_id = case_id;
  c.questions.items.push_back({"What offence was the accused charged with?", t.crime});
  c.questions.items.push_back({"What was the verdict?", verdict});
  c.questions.items.push_back(
      {"What custodial term was imposed?", exculpated ? "no custodial term" : std::string(kNumbers[sentence_years - 1]) + " years"});
  for (std::size_t k = 0; k < facts_sorted.size() && c.questions.items.size() < kQuestionsPerCase; ++k) {
    c.questions.items.push_back({"Which fact did the court rely on, item " + std::to_string(k + 1) + "?", facts_sorted[k]});
  }
  const std::pair<const char*, std::string> fillers[] = {
      {"Which statute did the court apply?", t.statute},
      {"Who was the judgment about?", "the accused"},
      {"Which body issued the decision?", "the court"},
  };
  for (const auto& [q, a] : fillers) {
    if (c.questions.items.size() >= kQuestionsPerCase) break;
    c.questions.items.push_back({q, a});
  }
  return c;
}

std::vector<std::size_t> draw_facts(const Template& t, Rng& rng) {
  const int pool = static_cast<int>(t.facts.size());
  const int k = kSynthMinFacts + static_cast<int>(rng.index(static_cast<std::size_t>(std::min(kSynthMaxFacts, pool) - kSynthMinFacts + 1)));
  std::vector<std::size_t> optional;
  for (int i = t.core; i < pool; ++i) optional.push_back(static_cast<std::size_t>(i));
  for (std::size_t i = 0; i + 1 < optional.size(); ++i) std::swap(optional[i], optional[i + rng.index(optional.size() - i)]);
  std::vector<std::size_t> chosen;
  for (int i = 0; i < t.core; ++i) chosen.push_back(static_cast<std::size_t>(i));
  for (int i = 0; i < k - t.core; ++i) chosen.push_back(optional[static_cast<std::size_t>(i)]);
  std::sort(chosen.begin(), chosen.end());
  return chosen;
}

}  // namespace

FixtureSet fixtures_for(const SynthCase& c) {
  FixtureSet f;
  f.add({PromptKind::ExtractFactRuleGraph, c.case_id, text::content_id(c.raw_text)}, serialize(c.graph));
  f.add({PromptKind::ClassifyCaseType, c.case_id, ""}, "Criminal Law");
  f.add({PromptKind::IracSummarize, c.case_id, ""}, c.irac.render());
  f.add({PromptKind::GenerateQuestions, c.case_id, ""}, render_questions(c.questions));
  std::vector<std::string> required;
  for (const auto& n : c.graph.fact_nodes()) required.push_back(n.label);
  f.add({PromptKind::GenerateCourtView, c.case_id, "*"},
        nlohmann::json{{"view", c.irac.conclusion}, {"required", required}}.dump());
  return f;
}

SynthCorpus synth_corpus(int n_cases, std::uint64_t seed) {
  if (n_cases < 1) throw Error(Errc::InvalidArgument, "synthetic corpus needs at least one case");
  SynthCorpus out;
  Rng rng(mix_seed(seed, fnv1a64("synth")));
  const auto& ts = templates();
  for (int i = 0; i < n_cases; ++i) {
    char id[32];
    std::snprintf(id, sizeof(id), "synth-%04d", i + 1);
    const auto& t = ts[static_cast<std::size_t>(i) % ts.size()];
    const auto chosen = draw_facts(t, rng);
    const int years = 1 + static_cast<int>(rng.index(8));
    auto c = build(id, t, chosen, years);
    out.fixtures.merge(fixtures_for(c));
    out.cases.push_back(std::move(c));
  }
  return out;
}

std::vector<std::string> synth_fact_vocabulary() {
  std::vector<std::string> out;
  for (const auto& t : templates()) {
    for (const auto& f : t.facts) out.emplace_back(f.label);
  }
  return out;
}

DemoScenario demo_scenario() {
  const auto& assault = templates()[1];
  // physical altercation, bodily injury, victim statement, alibi, bar fight
  DemoScenario d;
  d.full = build("demo-alibi", assault, {0, 1, 2, 3, 5}, 1);
  d.masked = {"alibi"};
  // The judgment turns on the alibi, so most comprehension questions do too.
  auto& items = d.full.questions.items;
  items.resize(kQuestionsPerCase - 3);
  items.push_back({"What placed the accused at work during the incident?", "alibi"});
  items.push_back({"Which defence led to the acquittal?", "alibi"});
  items.push_back({"What did colleagues confirm?", "alibi"});
  return d;
}

}  // namespace casediag
