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
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "casediag/graph.hpp"

namespace casediag {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

inline constexpr int kDefaultEmbeddingDim = 64;

/// Text encoder interface. Implementations must be safe for concurrent calls.
class EmbeddingProvider {
 public:
  virtual ~EmbeddingProvider() = default;
  virtual int dim() const = 0;
  /// Unit-norm embedding of `text`. Throws EmptyText on blank input.
  virtual Vector embed_text(std::string_view text) const = 0;
  virtual std::string name() const = 0;
};

/// Offline provider: bag of hashed tokens, each token mapped to a fixed
/// pseudo-random direction, summed by count and normalized.
class HashEmbeddingProvider final : public EmbeddingProvider {
 public:
  explicit HashEmbeddingProvider(int dim = kDefaultEmbeddingDim, std::uint64_t salt = 0);
  int dim() const override { return dim_; }
  Vector embed_text(std::string_view text) const override;
  std::string name() const override { return "test-hash"; }

 private:
  int dim_;
  std::uint64_t salt_;
};

/// Remote provider: POST {"text": ...} to `<base_url>/embed`, expects {"vector": [...]}.
class HttpEmbeddingProvider final : public EmbeddingProvider {
 public:
  HttpEmbeddingProvider(std::string base_url, int dim, int timeout_seconds = 30);
  int dim() const override { return dim_; }
  Vector embed_text(std::string_view text) const override;
  std::string name() const override { return "http"; }

 private:
  std::string base_url_;
  int dim_;
  int timeout_seconds_;
};

struct EmbeddingConfig {
  std::string provider = "test-hash";
  std::string base_url;
  int dim = kDefaultEmbeddingDim;
};

std::unique_ptr<EmbeddingProvider> make_embedding_provider(const EmbeddingConfig& cfg);

/// Node rows in a fixed order together with the lookup from node to row.
struct EmbeddingMatrix {
  std::vector<NodeId> order;
  std::map<NodeId, int> index;
  Matrix rows;  // order.size() x d

  int row_of(const NodeId& node) const { return index.at(node); }
};

/// Initial row for one node: i.i.d. uniform in [-1/sqrt(d), 1/sqrt(d)],
/// a pure function of (label, kind, seed).
Vector init_node_row(const NodeId& node, int dim, std::uint64_t seed);

EmbeddingMatrix init_node_embeddings(const std::vector<NodeId>& nodes, int dim, std::uint64_t seed);

double cosine_similarity(const Vector& a, const Vector& b);

}  // namespace casediag
