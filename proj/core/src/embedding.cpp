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

#include "casediag/embedding.hpp"

#include <cmath>
#include <map>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "casediag/error.hpp"
#include "casediag/rng.hpp"
#include "casediag/text.hpp"

namespace casediag {

namespace {

void fill_uniform(Eigen::Ref<Vector> out, std::uint64_t state, double bound) {
  for (Eigen::Index i = 0; i < out.size(); ++i) {
    const double u = static_cast<double>(splitmix64(state) >> 11) * 0x1.0p-53;
    out[i] = (2.0 * u - 1.0) * bound;
  }
}

}  // namespace

HashEmbeddingProvider::HashEmbeddingProvider(int dim, std::uint64_t salt) : dim_(dim), salt_(salt) {
  if (dim < 1) throw Error(Errc::InvalidArgument, "embedding dimension must be positive");
}

Vector HashEmbeddingProvider::embed_text(std::string_view text) const {
  const auto tokens = text::tokenize(text);
  if (tokens.empty()) throw Error(Errc::EmptyText, "cannot embed empty text");
  std::map<std::string, int> counts;
  for (const auto& t : tokens) ++counts[t];
  Vector acc = Vector::Zero(dim_);
  Vector direction(dim_);
  for (const auto& [token, count] : counts) {
    fill_uniform(direction, fnv1a64(token) ^ salt_, 1.0);
    acc += static_cast<double>(count) * direction;
  }
  const double norm = acc.norm();
  if (!(norm > 0.0) || !std::isfinite(norm)) {
    acc = Vector::Zero(dim_);
    acc[0] = 1.0;
    return acc;
  }
  return acc / norm;
}

HttpEmbeddingProvider::HttpEmbeddingProvider(std::string base_url, int dim, int timeout_seconds)
    : base_url_(std::move(base_url)), dim_(dim), timeout_seconds_(timeout_seconds) {}

Vector HttpEmbeddingProvider::embed_text(std::string_view text) const {
  if (text::trim(text).empty()) throw Error(Errc::EmptyText, "cannot embed empty text");
  httplib::Client client(base_url_);
  client.set_connection_timeout(timeout_seconds_, 0);
  client.set_read_timeout(timeout_seconds_, 0);
  const nlohmann::json body = {{"text", std::string(text)}};
  auto res = client.Post("/embed", body.dump(), "application/json");
  if (!res) {
    throw Error(Errc::ProviderUnavailable, "embedding request to " + base_url_ + " failed: " +
                                               httplib::to_string(res.error()));
  }
  if (res->status != 200) {
    throw Error(Errc::ProviderUnavailable, "embedding service returned HTTP " + std::to_string(res->status));
  }
  nlohmann::json reply;
  try {
    reply = nlohmann::json::parse(res->body);
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::ProviderUnavailable, std::string("embedding reply is not JSON: ") + e.what());
  }
  if (!reply.contains("vector") || !reply["vector"].is_array()) {
    throw Error(Errc::ProviderUnavailable, "embedding reply lacks a 'vector' array");
  }
  const auto& values = reply["vector"];
  if (static_cast<int>(values.size()) != dim_) {
    throw Error(Errc::DimensionMismatch, "embedding service returned " + std::to_string(values.size()) +
                                             " components, expected " + std::to_string(dim_));
  }
  Vector v(dim_);
  for (int i = 0; i < dim_; ++i) v[i] = values[static_cast<std::size_t>(i)].get<double>();
  const double norm = v.norm();
  if (!std::isfinite(norm) || norm == 0.0) {
    throw Error(Errc::ProviderUnavailable, "embedding service returned a degenerate vector");
  }
  return v / norm;
}

std::unique_ptr<EmbeddingProvider> make_embedding_provider(const EmbeddingConfig& cfg) {
  if (cfg.provider == "test-hash") return std::make_unique<HashEmbeddingProvider>(cfg.dim);
  if (cfg.provider == "http") return std::make_unique<HttpEmbeddingProvider>(cfg.base_url, cfg.dim);
  throw Error(Errc::ConfigInvalid, "unknown embedding provider '" + cfg.provider + "'");
}

Vector init_node_row(const NodeId& node, int dim, std::uint64_t seed) {
  Vector row(dim);
  const std::uint64_t key = fnv1a64(node.label, fnv1a64(to_string(node.kind)));
  fill_uniform(row, mix_seed(key, seed), 1.0 / std::sqrt(static_cast<double>(dim)));
  return row;
}

EmbeddingMatrix init_node_embeddings(const std::vector<NodeId>& nodes, int dim, std::uint64_t seed) {
  if (dim < 1) throw Error(Errc::InvalidArgument, "embedding dimension must be positive");
  EmbeddingMatrix m;
  m.order = nodes;
  m.rows.resize(static_cast<Eigen::Index>(nodes.size()), dim);
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    m.index.emplace(nodes[i], static_cast<int>(i));
    m.rows.row(static_cast<Eigen::Index>(i)) = init_node_row(nodes[i], dim, seed).transpose();
  }
  return m;
}

double cosine_similarity(const Vector& a, const Vector& b) {
  const double denom = a.norm() * b.norm();
  return denom > 0.0 ? a.dot(b) / denom : 0.0;
}

}  // namespace casediag
