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

// casediag: data generation, training, simulation, evaluation and the
// consultation service.
#include <pthread.h>

#include <chrono>
#include <csignal>
#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <nlohmann/json.hpp>

#include "casediag/app_config.hpp"
#include "casediag/error.hpp"
#include "casediag/pipeline.hpp"
#include "casediag/purl.hpp"
#include "casediag/service.hpp"
#include "casediag/text.hpp"

#include <CLI11.hpp>

namespace fs = std::filesystem;
using namespace casediag;

namespace {

std::string g_command = "casediag";
const auto g_start = std::chrono::steady_clock::now();

// One JSON object per line on stderr.
void log_event(std::string_view level, std::string_view event, nlohmann::json fields = nlohmann::json::object()) {
  fields["level"] = level;
  fields["command"] = g_command;
  fields["event"] = event;
  fields["elapsed_ms"] =
      std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::steady_clock::now() - g_start).count();
  std::cerr << fields.dump() << std::endl;
}

struct Common {
  std::optional<std::string> config;
  std::optional<std::uint64_t> seed;
  std::vector<std::string> sets;
  std::vector<std::pair<std::string, std::string>> overrides;
};

void add_common(CLI::App* sub, Common& c) {
  sub->add_option("--config", c.config, "key=value config file (default: $PURL_CONFIG)");
  sub->add_option("--seed", c.seed, "random seed");
  sub->add_option("--set", c.sets, "override one config key, key=value (repeatable)");
}

template <typename T>
void flag_override(Common& c, const std::string& key, const std::optional<T>& v) {
  if (!v) return;
  if constexpr (std::is_same_v<T, std::string>) {
    c.overrides.emplace_back(key, *v);
  } else {
    std::ostringstream os;
    os.precision(17);
    os << *v;
    c.overrides.emplace_back(key, os.str());
  }
}

AppConfig resolve(Common& c) {
  std::vector<std::pair<std::string, std::string>> all;
  for (const auto& s : c.sets) {
    const auto eq = s.find('=');
    if (eq == std::string::npos) throw Error(Errc::ConfigInvalid, "--set expects key=value, got '" + s + "'");
    all.emplace_back(text::trim(std::string_view(s).substr(0, eq)), text::trim(std::string_view(s).substr(eq + 1)));
  }
  all.insert(all.end(), c.overrides.begin(), c.overrides.end());
  if (c.seed) all.emplace_back("seed", std::to_string(*c.seed));
  std::optional<fs::path> path;
  if (c.config) path = *c.config;
  auto cfg = load_app_config(path, all);
  cfg.datagen.seed = cfg.seed;
  cfg.pu.seed = cfg.seed;
  cfg.bandit.seed = cfg.seed;
  log_event("info", "start", {{"seed", cfg.seed}, {"config_hash", cfg.hash()}});
  return cfg;
}

Split split_arg(const std::string& s) { return s == "all" ? Split::None : parse_split(s); }

void write_jsonl(const fs::path& p, const std::vector<nlohmann::json>& rows) {
  std::string out;
  for (const auto& r : rows) out += r.dump() + "\n";
  write_file(p, out);
}

std::map<std::string, std::string> read_views(const fs::path& p) {
  std::map<std::string, std::string> out;
  const auto content = read_file(p);
  std::size_t pos = 0;
  int line_no = 0;
  while (pos < content.size()) {
    const auto nl = content.find('\n', pos);
    const auto line = text::trim(std::string_view(content).substr(pos, nl == std::string::npos ? std::string::npos : nl - pos));
    pos = nl == std::string::npos ? content.size() : nl + 1;
    ++line_no;
    if (line.empty()) continue;
    const auto j = nlohmann::json::parse(line, nullptr, false);
    if (j.is_discarded() || !j.contains("case_id") || !j.contains("view")) {
      throw Error(Errc::ResponseParseError, p.string() + ":" + std::to_string(line_no) + ": expected {case_id, view}");
    }
    out[j["case_id"].get<std::string>()] = j["view"].get<std::string>();
  }
  return out;
}

// ---- datagen ---------------------------------------------------------------

struct DatagenArgs {
  Common common;
  std::string input;
  std::optional<std::string> out;
  std::optional<int> n_hop;
  std::optional<double> mask_ratio;
};

struct PreparedInputs {
  std::vector<CaseInput> inputs;
  std::optional<FixtureSet> fixtures;
};

PreparedInputs prepare_inputs(const std::string& spec, std::uint64_t seed) {
  auto count = [&](std::string_view prefix) {
    const auto n = std::stoi(spec.substr(prefix.size()));
    if (n < 1) throw Error(Errc::InvalidArgument, "case count must be positive");
    return n;
  };
  if (spec.rfind("synth:", 0) == 0) {
    auto synth = synth_corpus(count("synth:"), seed);
    return {synth_inputs(synth), synth.fixtures};
  }
  if (spec.rfind("demo:", 0) == 0) {
    auto bundle = demo_bundle(count("demo:"), seed);
    return {bundle.inputs, bundle.fixtures};
  }
  return {inputs_from_directory(spec), std::nullopt};
}

Corpus run_datagen_command(const AppConfig& cfg, const std::string& input) {
  auto prepared = prepare_inputs(input, cfg.seed);
  const fs::path out = cfg.corpus_dir;
  fs::create_directories(out);
  auto gcfg = cfg.gateway;
  if (prepared.fixtures && gcfg.backend == "scripted-mock") {
    if (!gcfg.fixtures.empty()) prepared.fixtures->merge(FixtureSet::load(gcfg.fixtures));
    write_file(out / "fixtures.jsonl", prepared.fixtures->to_jsonl());
    gcfg.fixtures = (out / "fixtures.jsonl").string();
  }
  AppConfig with = cfg;
  with.gateway = gcfg;
  const auto gateway = make_gateway(with);
  DatagenReport report;
  auto corpus = run_datagen(prepared.inputs, *gateway, cfg.datagen, out, &report);
  std::vector<nlohmann::json> gold;
  for (const auto* r : corpus.approved()) gold.push_back({{"case_id", r->case_id}, {"view", r->court_view}});
  write_jsonl(out / "gold_views.jsonl", gold);
  for (auto split : {Split::Train, Split::Dev, Split::Test}) {
    std::vector<nlohmann::json> rows;
    for (const auto* r : corpus.split(split)) rows.push_back({{"case_id", r->case_id}, {"view", r->court_view}});
    write_jsonl(out / ("gold_" + std::string(to_string(split)) + ".jsonl"), rows);
  }
  log_event("info", "datagen_done",
            {{"out", out.string()},
             {"built", report.built},
             {"reused", report.reused},
             {"rejected", report.rejected},
             {"approved", corpus.manifest.approved},
             {"train", corpus.manifest.train.size()},
             {"dev", corpus.manifest.dev.size()},
             {"test", corpus.manifest.test.size()}});
  return corpus;
}

// ---- training --------------------------------------------------------------

struct TrainArgs {
  Common common;
  std::string split = "train";
  std::optional<std::string> corpus;
  std::optional<std::string> out;
  std::optional<int> epochs;
};

PuModel run_train_pu(const AppConfig& cfg, const Corpus& corpus, Split split) {
  const auto embedder = make_embedding_provider(cfg.embedding);
  const auto records = select_records(corpus, split);
  const auto result = train_pu_on(records, *embedder, cfg.pu);
  write_file(cfg.pu_checkpoint, result.model.to_json().dump() + "\n");
  std::vector<nlohmann::json> log;
  for (std::size_t e = 0; e < result.epoch_risk.size(); ++e) log.push_back({{"epoch", e}, {"risk", result.epoch_risk[e]}});
  write_jsonl(fs::path(cfg.pu_checkpoint).replace_extension(".log.jsonl"), log);
  nlohmann::json fields = {{"checkpoint", cfg.pu_checkpoint}, {"records", records.size()}, {"epochs", cfg.pu.epochs}};
  if (!result.epoch_risk.empty()) fields["final_risk"] = result.epoch_risk.back();
  for (auto s : {Split::Dev, Split::Test}) {
    try {
      fields[std::string("eval_") + std::string(to_string(s))] =
          metrics::to_json(evaluate_pu(result.model, corpus.split(s), *embedder));
    } catch (const Error&) {
      // no labelled truth in this split
    }
  }
  log_event("info", "train_pu_done", fields);
  return result.model;
}

BanditArchive run_train_bandit(const AppConfig& cfg, const Corpus& corpus, Split split) {
  const auto embedder = make_embedding_provider(cfg.embedding);
  const auto model = PuModel::from_json(nlohmann::json::parse(read_file(cfg.pu_checkpoint)));
  const auto gateway = make_gateway(cfg);
  const auto records = select_records(corpus, split);
  const auto result = train_purl(records, model, *gateway, *embedder, cfg.bandit);
  write_file(cfg.bandit_checkpoint, result.archive.to_json().dump() + "\n");
  std::vector<nlohmann::json> log;
  double regret = 0.0;
  for (const auto& row : result.log) {
    log.push_back(row.to_json());
    regret += row.regret;
  }
  write_jsonl(fs::path(cfg.bandit_checkpoint).replace_extension(".log.jsonl"), log);
  log_event("info", "train_bandit_done",
            {{"checkpoint", cfg.bandit_checkpoint},
             {"cases", result.archive.states.size()},
             {"rounds", result.log.size()},
             {"mean_regret", result.log.empty() ? 0.0 : regret / static_cast<double>(result.log.size())}});
  return result.archive;
}

// ---- simulate --------------------------------------------------------------

void run_simulate(const AppConfig& cfg, Split split, const fs::path& out, const std::optional<std::string>& pred) {
  std::string why;
  const auto models = load_models(cfg, &why);
  if (!models) throw Error(Errc::BackendUnavailable, "cannot load models: " + why);
  const auto corpus = load_corpus(cfg.corpus_dir);
  const auto gateway = make_gateway(cfg);
  const SessionModels sm{&models->pu, &models->bandits, models->embedder.get(), &models->global_graph, models->n_hop,
                         [] { return std::int64_t{0}; }};
  const auto reports = simulate_records(select_records(corpus, split), sm, *gateway, cfg.max_turns);
  write_file(out, reports_jsonl(reports));
  if (pred) {
    std::vector<nlohmann::json> rows;
    for (const auto& r : reports) rows.push_back({{"case_id", r.case_id}, {"view", r.final_view}});
    write_jsonl(*pred, rows);
  }
  double recovery = 0.0;
  double turns = 0.0;
  double rouge1 = 0.0;
  for (const auto& r : reports) {
    recovery += r.recovery_rate;
    turns += r.turns;
    rouge1 += r.scores.rouge1;
  }
  const double n = std::max<double>(1.0, static_cast<double>(reports.size()));
  log_event("info", "simulate_done",
            {{"out", out.string()},
             {"cases", reports.size()},
             {"mean_recovery", recovery / n},
             {"mean_turns", turns / n},
             {"mean_rouge1", rouge1 / n}});
}

// ---- serve -----------------------------------------------------------------

void run_serve(const AppConfig& cfg) {
  std::string why;
  auto models = load_models(cfg, &why);
  if (!models) log_event("warn", "models_unavailable", {{"reason", why}});
  SessionManager manager(std::move(models), make_gateway(cfg), cfg.max_sessions, cfg.max_turns, cfg.seed);

  sigset_t signals;
  sigemptyset(&signals);
  sigaddset(&signals, SIGINT);
  sigaddset(&signals, SIGTERM);
  pthread_sigmask(SIG_BLOCK, &signals, nullptr);

  HttpService http(manager);
  const int port = http.bind(cfg.bind_host(), cfg.bind_port());
  log_event("info", "serving", {{"host", cfg.bind_host()}, {"port", port}, {"health", manager.health()}});
  std::thread server([&] { http.listen(); });
  int sig = 0;
  sigwait(&signals, &sig);
  log_event("info", "shutdown", {{"signal", sig}});
  http.stop();
  server.join();
}

// ---- demo ------------------------------------------------------------------

void run_demo(AppConfig cfg, const fs::path& out, int background) {
  cfg.corpus_dir = (out / "corpus").string();
  cfg.pu_checkpoint = (out / "checkpoints" / "pu.json").string();
  cfg.bandit_checkpoint = (out / "checkpoints" / "bandits.json").string();
  const auto corpus = run_datagen_command(cfg, "demo:" + std::to_string(background));
  const auto* demo = corpus.find("demo-alibi");
  if (demo == nullptr || demo->status != ReviewStatus::Approved) {
    throw Error(Errc::InsufficientCorpus, "the demo case did not survive data generation");
  }
  // Let a narrative typed without a case id reach the demo's court-view rule.
  const auto fixtures_path = fs::path(cfg.corpus_dir) / "fixtures.jsonl";
  auto fixtures = FixtureSet::load(fixtures_path.string());
  if (const auto* rule = fixtures.find({PromptKind::GenerateCourtView, "demo-alibi", "*"})) {
    fixtures.add({PromptKind::GenerateCourtView, text::content_id(demo->reconstructed_description), "*"}, *rule);
    write_file(fixtures_path, fixtures.to_jsonl());
  }
  run_train_pu(cfg, corpus, Split::None);
  run_train_bandit(cfg, corpus, Split::None);
  write_file(out / "narrative.txt", demo->reconstructed_description + "\n");
  write_file(out / "demo.conf", "# Generated by casediag demo\n" + cfg.canonical());
  log_event("info", "demo_done", {{"out", out.string()}, {"config", (out / "demo.conf").string()}});
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"casediag: diagnostic legal-dialogue engine"};
  app.require_subcommand(1);

  DatagenArgs dg;
  auto* datagen = app.add_subcommand("datagen", "Build a reviewed case corpus");
  add_common(datagen, dg.common);
  datagen->add_option("--input", dg.input, "directory of .txt cases, synth:N or demo:N")->required();
  datagen->add_option("--out", dg.out, "corpus directory (paths.corpus)");
  datagen->add_option("--n-hop", dg.n_hop, "subgraph radius (datagen.n_hop)");
  datagen->add_option("--mask-ratio", dg.mask_ratio, "fraction of facts removed (datagen.mask_ratio)");

  TrainArgs tp;
  auto* train_pu = app.add_subcommand("train-pu", "Train the domain scorer");
  add_common(train_pu, tp.common);
  train_pu->add_option("--corpus", tp.corpus, "corpus directory (paths.corpus)");
  train_pu->add_option("--out", tp.out, "checkpoint path (paths.pu_checkpoint)");
  train_pu->add_option("--epochs", tp.epochs, "training epochs (pu.epochs)");
  train_pu->add_option("--split", tp.split, "train, dev, test or all");

  TrainArgs tb;
  auto* train_bandit = app.add_subcommand("train-bandit", "Train per-case question-selection bandits");
  add_common(train_bandit, tb.common);
  train_bandit->add_option("--corpus", tb.corpus, "corpus directory (paths.corpus)");
  train_bandit->add_option("--out", tb.out, "archive path (paths.bandit_checkpoint)");
  train_bandit->add_option("--split", tb.split, "train, dev, test or all");

  Common sim_common;
  std::string sim_split = "test";
  std::string sim_out = "reports.jsonl";
  std::optional<std::string> sim_pred;
  auto* simulate_cmd = app.add_subcommand("simulate", "Run simulated consultations and score them");
  add_common(simulate_cmd, sim_common);
  simulate_cmd->add_option("--split", sim_split, "train, dev, test or all");
  simulate_cmd->add_option("--out", sim_out, "per-case report JSONL");
  simulate_cmd->add_option("--pred", sim_pred, "also write {case_id, view} predictions");

  std::string eval_pred;
  std::string eval_gold;
  std::string eval_out = "report.json";
  auto* eval = app.add_subcommand("eval", "Score predicted views against gold views");
  eval->add_option("--pred", eval_pred, "predictions JSONL {case_id, view}")->required();
  eval->add_option("--gold", eval_gold, "gold JSONL {case_id, view}")->required();
  eval->add_option("--out", eval_out, "report path");

  Common serve_common;
  std::optional<std::string> serve_bind;
  auto* serve = app.add_subcommand("serve", "Serve the consultation API");
  add_common(serve, serve_common);
  serve->add_option("--bind", serve_bind, "host:port (service.bind)");

  Common demo_common;
  std::string demo_out = "data/demo";
  int demo_background = 20;
  auto* demo = app.add_subcommand("demo", "Build the bundled consultation scenario end to end");
  add_common(demo, demo_common);
  demo->add_option("--out", demo_out, "output directory");
  demo->add_option("--background", demo_background, "synthetic background cases")->check(CLI::PositiveNumber);

  Common config_common;
  auto* config_cmd = app.add_subcommand("config", "Validate and print the resolved configuration");
  add_common(config_cmd, config_common);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    if (*datagen) {
      g_command = "datagen";
      flag_override(dg.common, "paths.corpus", dg.out);
      flag_override(dg.common, "datagen.n_hop", dg.n_hop);
      flag_override(dg.common, "datagen.mask_ratio", dg.mask_ratio);
      run_datagen_command(resolve(dg.common), dg.input);
    } else if (*train_pu) {
      g_command = "train-pu";
      flag_override(tp.common, "paths.corpus", tp.corpus);
      flag_override(tp.common, "paths.pu_checkpoint", tp.out);
      flag_override(tp.common, "pu.epochs", tp.epochs);
      const auto cfg = resolve(tp.common);
      run_train_pu(cfg, load_corpus(cfg.corpus_dir), split_arg(tp.split));
    } else if (*train_bandit) {
      g_command = "train-bandit";
      flag_override(tb.common, "paths.corpus", tb.corpus);
      flag_override(tb.common, "paths.bandit_checkpoint", tb.out);
      const auto cfg = resolve(tb.common);
      run_train_bandit(cfg, load_corpus(cfg.corpus_dir), split_arg(tb.split));
    } else if (*simulate_cmd) {
      g_command = "simulate";
      run_simulate(resolve(sim_common), split_arg(sim_split), sim_out, sim_pred);
    } else if (*eval) {
      g_command = "eval";
      log_event("info", "start", {{"pred", eval_pred}, {"gold", eval_gold}});
      const auto report = metrics::evaluate_views(read_views(eval_pred), read_views(eval_gold));
      write_file(eval_out, report.dump(2) + "\n");
      log_event("info", "eval_done", {{"out", eval_out}, {"mean", report["mean"]}});
    } else if (*serve) {
      g_command = "serve";
      flag_override(serve_common, "service.bind", serve_bind);
      run_serve(resolve(serve_common));
    } else if (*demo) {
      g_command = "demo";
      run_demo(resolve(demo_common), demo_out, demo_background);
    } else if (*config_cmd) {
      g_command = "config";
      std::cout << resolve(config_common).canonical();
    }
  } catch (const Error& e) {
    const std::string msg = e.what();
    nlohmann::json fields = {{"code", errc_name(e.code())}, {"message", msg}};
    if (e.code() == Errc::ConfigInvalid) {
      nlohmann::json errors = nlohmann::json::array();
      std::size_t pos = msg.find('\n');
      while (pos != std::string::npos) {
        const auto next = msg.find('\n', pos + 1);
        errors.push_back(msg.substr(pos + 1, next == std::string::npos ? std::string::npos : next - pos - 1));
        pos = next;
      }
      fields["errors"] = errors;
    }
    log_event("error", "failed", fields);
    return e.code() == Errc::ConfigInvalid ? 2 : 1;
  } catch (const std::exception& e) {
    log_event("error", "failed", {{"code", "Internal"}, {"message", e.what()}});
    return 1;
  }
  log_event("info", "done");
  return 0;
}
