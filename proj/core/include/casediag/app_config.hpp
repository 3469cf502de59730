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
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "casediag/bandit.hpp"
#include "casediag/corpus.hpp"
#include "casediag/embedding.hpp"
#include "casediag/gateway.hpp"
#include "casediag/pu_train.hpp"

namespace casediag {

inline constexpr const char* kConfigEnvVar = "PURL_CONFIG";

/// Every setting of the command-line tool and the session service.
struct AppConfig {
  std::uint64_t seed = 0;
  std::string corpus_dir = "corpus";
  std::string pu_checkpoint = "checkpoints/pu.json";
  std::string bandit_checkpoint = "checkpoints/bandits.json";
  EmbeddingConfig embedding;
  GatewayConfig gateway;
  DatagenConfig datagen;
  TrainingConfig pu;
  BanditConfig bandit;
  int max_turns = 8;
  int session_n_hop = 2;
  std::string bind = "127.0.0.1:8080";
  int max_sessions = 256;

  AppConfig();

  /// Sets one key from its text form. Throws ConfigInvalid for unknown keys
  /// and unparsable values.
  void set(std::string_view key, std::string_view value);
  /// Cross-field checks; returns every problem found.
  std::vector<std::string> problems() const;
  /// Canonical "key=value" lines of every key, sorted.
  std::string canonical() const;
  /// fnv1a64 of canonical(), as 16 hex digits.
  std::string hash() const;
  std::string bind_host() const;
  int bind_port() const;
};

/// Every key accepted by AppConfig::set, sorted.
const std::vector<std::string>& app_config_keys();

/// Parses "key = value" lines ('#' starts a comment) over `base`, then
/// validates. All problems are collected and thrown together as one
/// ConfigInvalid error, one per line.
AppConfig parse_app_config(std::string_view text, AppConfig base = {});

/// Reads `explicit_path`, else the file named by PURL_CONFIG, else defaults.
/// `overrides` are applied after the file and before validation.
AppConfig load_app_config(const std::optional<std::filesystem::path>& explicit_path,
                          const std::vector<std::pair<std::string, std::string>>& overrides = {});

}  // namespace casediag
