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

#include <string>
#include <string_view>
#include <vector>

namespace casediag::text {

std::string trim(std::string_view s);
std::string to_lower(std::string_view s);

// Trim, lower-case and collapse internal whitespace runs to a single space.
std::string normalize_label(std::string_view s);

// Lower-cased whitespace tokens with punctuation removed; empty tokens dropped.
std::vector<std::string> tokenize(std::string_view s);

// Splits on '.', '!', '?' and newlines; returns trimmed non-empty sentences
// including their terminal punctuation.
std::vector<std::string> split_sentences(std::string_view s);

// True when the token sequence of `phrase` occurs contiguously in `tokens`.
bool contains_phrase(const std::vector<std::string>& tokens, std::string_view phrase);

// Short hex content identifier (FNV-1a of the normalized text).
std::string content_id(std::string_view s);

std::string join(const std::vector<std::string>& parts, std::string_view sep);

}  // namespace casediag::text
