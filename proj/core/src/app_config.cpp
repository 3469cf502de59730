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

#include "casediag/app_config.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <map>

#include "casediag/error.hpp"
#include "casediag/rng.hpp"
#include "casediag/text.hpp"

namespace casediag {
namespace {

std::string fmt_double(double v) {
  // Shortest form that round-trips.
  char buf[32];
  const auto r = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, r.ptr);
}

template <typename T>
T parse_number(std::string_view key, std::string_view v) {
  T out{};
  const auto* end = v.data() + v.size();
  auto [ptr, ec] = std::from_chars(v.data(), end, out);
  if (ec != std::errc{} || ptr != end || v.empty()) {
    throw Error(Errc::ConfigInvalid, std::string(key) + ": cannot parse '" + std::string(v) + "'");
  }
  return out;
}

double parse_double(std::string_view key, std::string_view v) {
  const std::string s(v);
  char* end = nullptr;
  const double out = std::strtod(s.c_str(), &end);
  if (s.empty() || end != s.c_str() + s.size() || !std::isfinite(out)) {
    throw Error(Errc::ConfigInvalid, std::string(key) + ": cannot parse '" + s + "'");
  }
  return out;
}

std::string_view objective_name(PuObjective o) {
  switch (o) {
    case PuObjective::NonNegative:
      return "nonnegative";
    case PuObjective::Unbiased:
      return "unbiased";
    case PuObjective::PositiveNegative:
      return "pn";
  }
  return "nonnegative";
}

struct Field {
  std::function<std::string(const AppConfig&)> get;
  std::function<void(AppConfig&, std::string_view key, std::string_view)> set;
  std::function<std::optional<std::string>(const AppConfig&)> check;
};

template <typename T>
Field int_field(T AppConfig::*member, T lo) {
  return {[=](const AppConfig& c) { return std::to_string(c.*member); },
          [=](AppConfig& c, std::string_view k, std::string_view v) { c.*member = parse_number<T>(k, v); },
          [=](const AppConfig& c) -> std::optional<std::string> {
            if (c.*member < lo) return "must be at least " + std::to_string(lo);
            return std::nullopt;
          }};
}

template <typename S, typename T>
Field nested_int(S AppConfig::*section, T S::*member, T lo) {
  return {[=](const AppConfig& c) { return std::to_string(c.*section.*member); },
          [=](AppConfig& c, std::string_view k, std::string_view v) { c.*section.*member = parse_number<T>(k, v); },
          [=](const AppConfig& c) -> std::optional<std::string> {
            if (c.*section.*member < lo) return "must be at least " + std::to_string(lo);
            return std::nullopt;
          }};
}

// Range check on (lo, hi) with per-end inclusivity.
template <typename S>
Field nested_double(S AppConfig::*section, double S::*member, double lo, bool lo_incl, double hi, bool hi_incl) {
  return {[=](const AppConfig& c) { return fmt_double(c.*section.*member); },
          [=](AppConfig& c, std::string_view k, std::string_view v) { c.*section.*member = parse_double(k, v); },
          [=](const AppConfig& c) -> std::optional<std::string> {
            const double x = c.*section.*member;
            const bool ok = (lo_incl ? x >= lo : x > lo) && (hi_incl ? x <= hi : x < hi);
            if (ok) return std::nullopt;
            if (hi >= 1e300) return std::string(lo_incl ? "must be at least " : "must exceed ") + fmt_double(lo);
            return "must lie in " + std::string(lo_incl ? "[" : "(") + fmt_double(lo) + ", " + fmt_double(hi) +
                   (hi_incl ? "]" : ")");
          }};
}

template <typename S>
Field nested_string(S AppConfig::*section, std::string S::*member, std::vector<std::string> allowed = {}) {
  return {[=](const AppConfig& c) { return c.*section.*member; },
          [=](AppConfig& c, std::string_view, std::string_view v) { c.*section.*member = std::string(v); },
          [=](const AppConfig& c) -> std::optional<std::string> {
            const auto& x = c.*section.*member;
            if (allowed.empty() || std::find(allowed.begin(), allowed.end(), x) != allowed.end()) return std::nullopt;
            return "must be one of " + text::join(allowed, ", ") + ", got '" + x + "'";
          }};
}

Field path_field(std::string AppConfig::*member) {
  return {[=](const AppConfig& c) { return c.*member; },
          [=](AppConfig& c, std::string_view, std::string_view v) { c.*member = std::string(v); },
          [=](const AppConfig& c) -> std::optional<std::string> {
            if ((c.*member).empty()) return std::string("must not be empty");
            return std::nullopt;
          }};
}

constexpr double kInf = 1e300;

const std::map<std::string, Field>& fields() {
  static const std::map<std::string, Field> f = [] {
    std::map<std::string, Field> m;
    m["seed"] = {[](const AppConfig& c) { return std::to_string(c.seed); },
                 [](AppConfig& c, std::string_view k, std::string_view v) { c.seed = parse_number<std::uint64_t>(k, v); },
                 [](const AppConfig&) { return std::optional<std::string>{}; }};
    m["paths.corpus"] = path_field(&AppConfig::corpus_dir);
    m["paths.pu_checkpoint"] = path_field(&AppConfig::pu_checkpoint);
    m["paths.bandit_checkpoint"] = path_field(&AppConfig::bandit_checkpoint);

    m["embedding.provider"] = nested_string(&AppConfig::embedding, &EmbeddingConfig::provider, {"test-hash", "http"});
    m["embedding.base_url"] = nested_string(&AppConfig::embedding, &EmbeddingConfig::base_url);
    m["embedding.dim"] = nested_int(&AppConfig::embedding, &EmbeddingConfig::dim, 1);

    m["gateway.backend"] = nested_string(&AppConfig::gateway, &GatewayConfig::backend, {"scripted-mock", "http"});
    m["gateway.fixtures"] = nested_string(&AppConfig::gateway, &GatewayConfig::fixtures);
    m["gateway.base_url"] = nested_string(&AppConfig::gateway, &GatewayConfig::base_url);
    m["gateway.token_env"] = nested_string(&AppConfig::gateway, &GatewayConfig::token_env);
    m["gateway.temperature"] = nested_double(&AppConfig::gateway, &GatewayConfig::temperature, 0.0, true, 2.0, true);
    m["gateway.top_p"] = nested_double(&AppConfig::gateway, &GatewayConfig::top_p, 0.0, false, 1.0, true);
    m["gateway.max_tokens"] = nested_int(&AppConfig::gateway, &GatewayConfig::max_tokens, 1);
    m["gateway.max_concurrency"] = nested_int(&AppConfig::gateway, &GatewayConfig::max_concurrency, 1);
    m["gateway.max_retries"] = nested_int(&AppConfig::gateway, &GatewayConfig::max_retries, 0);
    m["gateway.timeout_seconds"] = nested_int(&AppConfig::gateway, &GatewayConfig::timeout_seconds, 1);

    m["datagen.n_hop"] = nested_int(&AppConfig::datagen, &DatagenConfig::n_hop, 1);
    m["datagen.mask_ratio"] = nested_double(&AppConfig::datagen, &DatagenConfig::mask_ratio, 0.0, false, 1.0, false);
    m["datagen.min_approved"] = {
        [](const AppConfig& c) { return std::to_string(c.datagen.min_approved); },
        [](AppConfig& c, std::string_view k, std::string_view v) {
          c.datagen.min_approved = parse_number<std::size_t>(k, v);
        },
        [](const AppConfig&) { return std::optional<std::string>{}; }};

    m["pu.conv_layers"] = {[](const AppConfig& c) { return std::to_string(c.pu.arch.conv_layers); },
                           [](AppConfig& c, std::string_view k, std::string_view v) {
                             c.pu.arch.conv_layers = parse_number<int>(k, v);
                           },
                           [](const AppConfig& c) -> std::optional<std::string> {
                             if (c.pu.arch.conv_layers < 0) return std::string("must be at least 0");
                             return std::nullopt;
                           }};
    m["pu.mlp_hidden"] = {[](const AppConfig& c) {
                            std::vector<std::string> parts;
                            for (int w : c.pu.arch.mlp_hidden) parts.push_back(std::to_string(w));
                            return text::join(parts, ",");
                          },
                          [](AppConfig& c, std::string_view k, std::string_view v) {
                            c.pu.arch.mlp_hidden.clear();
                            std::string_view rest = v;
                            while (!rest.empty()) {
                              const auto comma = rest.find(',');
                              const auto part = text::trim(rest.substr(0, comma));
                              c.pu.arch.mlp_hidden.push_back(parse_number<int>(k, part));
                              rest = comma == std::string_view::npos ? std::string_view{} : rest.substr(comma + 1);
                            }
                          },
                          [](const AppConfig& c) -> std::optional<std::string> {
                            for (int w : c.pu.arch.mlp_hidden) {
                              if (w < 1) return std::string("widths must be positive");
                            }
                            return std::nullopt;
                          }};
    m["pu.epochs"] = nested_int(&AppConfig::pu, &TrainingConfig::epochs, 0);
    m["pu.step_size"] = nested_double(&AppConfig::pu, &TrainingConfig::step_size, 0.0, false, kInf, true);
    m["pu.discount"] = nested_double(&AppConfig::pu, &TrainingConfig::discount, 0.0, false, 1.0, true);
    m["pu.batch_size"] = nested_int(&AppConfig::pu, &TrainingConfig::batch_size, 2);
    m["pu.prior"] = {[](const AppConfig& c) { return c.pu.global_prior ? fmt_double(*c.pu.global_prior) : "case"; },
                     [](AppConfig& c, std::string_view k, std::string_view v) {
                       if (v == "case") {
                         c.pu.global_prior.reset();
                       } else {
                         c.pu.global_prior = parse_double(k, v);
                       }
                     },
                     [](const AppConfig& c) -> std::optional<std::string> {
                       if (c.pu.global_prior && !(*c.pu.global_prior > 0.0 && *c.pu.global_prior < 1.0)) {
                         return std::string("must be 'case' or lie in (0, 1)");
                       }
                       return std::nullopt;
                     }};
    m["pu.objective"] = {[](const AppConfig& c) { return std::string(objective_name(c.pu.objective)); },
                         [](AppConfig& c, std::string_view k, std::string_view v) {
                           for (auto o : {PuObjective::NonNegative, PuObjective::Unbiased, PuObjective::PositiveNegative}) {
                             if (objective_name(o) == v) {
                               c.pu.objective = o;
                               return;
                             }
                           }
                           throw Error(Errc::ConfigInvalid, std::string(k) + ": must be one of nonnegative, unbiased, pn");
                         },
                         [](const AppConfig&) { return std::optional<std::string>{}; }};

    m["bandit.hidden"] = nested_int(&AppConfig::bandit, &BanditConfig::hidden, 1);
    m["bandit.exploration"] = nested_double(&AppConfig::bandit, &BanditConfig::exploration, 0.0, true, kInf, true);
    m["bandit.regularizer"] = nested_double(&AppConfig::bandit, &BanditConfig::regularizer, 0.0, false, kInf, true);
    m["bandit.horizon"] = nested_int(&AppConfig::bandit, &BanditConfig::horizon, 1);
    m["bandit.update_steps"] = nested_int(&AppConfig::bandit, &BanditConfig::update_steps, 0);
    m["bandit.update_step_size"] =
        nested_double(&AppConfig::bandit, &BanditConfig::update_step_size, 0.0, false, kInf, true);
    m["bandit.lambda"] = nested_double(&AppConfig::bandit, &BanditConfig::lambda, 0.0, true, kInf, true);

    m["session.max_turns"] = int_field(&AppConfig::max_turns, 1);
    m["session.n_hop"] = int_field(&AppConfig::session_n_hop, 1);
    m["service.bind"] = {[](const AppConfig& c) { return c.bind; },
                         [](AppConfig& c, std::string_view, std::string_view v) { c.bind = std::string(v); },
                         [](const AppConfig& c) -> std::optional<std::string> {
                           const auto colon = c.bind.rfind(':');
                           if (colon == std::string::npos || colon == 0) return std::string("must be host:port");
                           int port = -1;
                           const auto p = std::string_view(c.bind).substr(colon + 1);
                           auto [ptr, ec] = std::from_chars(p.data(), p.data() + p.size(), port);
                           if (ec != std::errc{} || ptr != p.data() + p.size() || port < 0 || port > 65535) {
                             return std::string("port must lie in [0, 65535]");
                           }
                           return std::nullopt;
                         }};
    m["service.max_sessions"] = int_field(&AppConfig::max_sessions, 1);
    return m;
  }();
  return f;
}

}  // namespace

AppConfig::AppConfig() {
  embedding.dim = 16;
  pu.arch.dim = embedding.dim;
  pu.epochs = 100;
  pu.step_size = 1e-3;
  pu.global_prior = 0.5;
}

void AppConfig::set(std::string_view key, std::string_view value) {
  const auto it = fields().find(std::string(key));
  if (it == fields().end()) {
    if (key.find("token") != std::string_view::npos && key != "gateway.token_env") {
      throw Error(Errc::ConfigInvalid, "unknown key '" + std::string(key) +
                                           "' (credentials are read from the environment only)");
    }
    throw Error(Errc::ConfigInvalid, "unknown key '" + std::string(key) + "'");
  }
  it->second.set(*this, key, text::trim(value));
  pu.arch.dim = embedding.dim;
}

std::vector<std::string> AppConfig::problems() const {
  std::vector<std::string> out;
  for (const auto& [key, f] : fields()) {
    if (auto p = f.check(*this)) out.push_back(key + ": " + *p);
  }
  if (gateway.backend == "http" && gateway.base_url.empty()) out.push_back("gateway.base_url: required by the http backend");
  if (embedding.provider == "http" && embedding.base_url.empty()) {
    out.push_back("embedding.base_url: required by the http provider");
  }
  return out;
}

std::string AppConfig::canonical() const {
  std::string out;
  for (const auto& [key, f] : fields()) out += key + "=" + f.get(*this) + "\n";
  return out;
}

std::string AppConfig::hash() const {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(fnv1a64(canonical())));
  return buf;
}

std::string AppConfig::bind_host() const { return bind.substr(0, bind.rfind(':')); }

int AppConfig::bind_port() const { return std::atoi(bind.substr(bind.rfind(':') + 1).c_str()); }

const std::vector<std::string>& app_config_keys() {
  static const std::vector<std::string> keys = [] {
    std::vector<std::string> k;
    for (const auto& [key, f] : fields()) k.push_back(key);
    return k;
  }();
  return keys;
}

namespace {

std::string bare(const Error& e) {
  std::string m = e.what();
  const std::string prefix = std::string(errc_name(e.code())) + ": ";
  return m.rfind(prefix, 0) == 0 ? m.substr(prefix.size()) : m;
}

AppConfig finish(AppConfig cfg, std::vector<std::string> errors) {
  for (auto& p : cfg.problems()) errors.push_back(std::move(p));
  if (!errors.empty()) {
    throw Error(Errc::ConfigInvalid, std::to_string(errors.size()) + " problem(s)\n" + text::join(errors, "\n"));
  }
  return cfg;
}

void apply_lines(AppConfig& cfg, std::string_view text, std::vector<std::string>& errors) {
  int line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const auto nl = text.find('\n', pos);
    auto raw = text.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
    pos = nl == std::string_view::npos ? text.size() + 1 : nl + 1;
    ++line_no;
    if (const auto hash = raw.find('#'); hash != std::string_view::npos) raw = raw.substr(0, hash);
    const std::string line = text::trim(raw);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      errors.push_back("line " + std::to_string(line_no) + ": expected key = value");
      continue;
    }
    try {
      cfg.set(text::trim(std::string_view(line).substr(0, eq)), std::string_view(line).substr(eq + 1));
    } catch (const Error& e) {
      errors.push_back("line " + std::to_string(line_no) + ": " + bare(e));
    }
  }
}

}  // namespace

AppConfig parse_app_config(std::string_view text, AppConfig base) {
  std::vector<std::string> errors;
  apply_lines(base, text, errors);
  return finish(std::move(base), std::move(errors));
}

AppConfig load_app_config(const std::optional<std::filesystem::path>& explicit_path,
                          const std::vector<std::pair<std::string, std::string>>& overrides) {
  AppConfig cfg;
  std::vector<std::string> errors;
  std::optional<std::filesystem::path> path = explicit_path;
  if (!path) {
    if (const char* env = std::getenv(kConfigEnvVar); env != nullptr && *env != '\0') path = env;
  }
  if (path) apply_lines(cfg, read_file(*path), errors);
  for (const auto& [k, v] : overrides) {
    try {
      cfg.set(k, v);
    } catch (const Error& e) {
      errors.push_back("flag: " + bare(e));
    }
  }
  return finish(std::move(cfg), std::move(errors));
}

}  // namespace casediag
