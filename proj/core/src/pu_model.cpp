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

#include "casediag/pu_model.hpp"

#include <algorithm>
#include <cmath>

#include <nlohmann/json.hpp>

#include "casediag/error.hpp"
#include "casediag/rng.hpp"

namespace casediag {

namespace {

Matrix relu(const Matrix& m) { return m.cwiseMax(0.0); }

Matrix relu_mask(const Matrix& pre) { return (pre.array() > 0.0).cast<double>().matrix(); }

void fill_uniform(Matrix& m, Rng& rng, double bound) {
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = rng.uniform(-bound, bound);
}

nlohmann::json matrix_json(const Matrix& m) {
  auto rows = nlohmann::json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    auto row = nlohmann::json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    rows.push_back(std::move(row));
  }
  return rows;
}

nlohmann::json vector_json(const Vector& v) {
  return nlohmann::json(std::vector<double>(v.data(), v.data() + v.size()));
}

Matrix matrix_from(const nlohmann::json& j, Eigen::Index rows, Eigen::Index cols) {
  if (!j.is_array() || static_cast<Eigen::Index>(j.size()) != rows) {
    throw Error(Errc::DimensionMismatch, "checkpoint matrix has wrong row count");
  }
  Matrix m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    const auto& row = j[static_cast<std::size_t>(r)];
    if (static_cast<Eigen::Index>(row.size()) != cols) {
      throw Error(Errc::DimensionMismatch, "checkpoint matrix has wrong column count");
    }
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = row[static_cast<std::size_t>(c)].get<double>();
  }
  return m;
}

Vector vector_from(const nlohmann::json& j, Eigen::Index size) {
  if (!j.is_array() || static_cast<Eigen::Index>(j.size()) != size) {
    throw Error(Errc::DimensionMismatch, "checkpoint vector has wrong length");
  }
  Vector v(size);
  for (Eigen::Index i = 0; i < size; ++i) v[i] = j[static_cast<std::size_t>(i)].get<double>();
  return v;
}

}  // namespace

std::vector<int> PuArchitecture::head_widths() const {
  std::vector<int> widths{2 * dim};
  if (mlp_hidden.empty()) {
    widths.insert(widths.end(), 5, 2 * dim);
  } else {
    widths.insert(widths.end(), mlp_hidden.begin(), mlp_hidden.end());
  }
  widths.push_back(1);
  return widths;
}

PuParams PuParams::zeros_like() const {
  PuParams z;
  for (const auto& w : conv_w) z.conv_w.push_back(Matrix::Zero(w.rows(), w.cols()));
  for (const auto& b : conv_b) z.conv_b.push_back(Vector::Zero(b.size()));
  z.att_w = Vector::Zero(att_w.size());
  z.att_b = 0.0;
  for (const auto& w : mlp_w) z.mlp_w.push_back(Matrix::Zero(w.rows(), w.cols()));
  for (const auto& b : mlp_b) z.mlp_b.push_back(Vector::Zero(b.size()));
  z.known_row = Vector::Zero(known_row.size());
  return z;
}

Matrix normalized_adjacency(const FactRuleGraph& g, const std::vector<NodeId>& order) {
  const auto n = static_cast<Eigen::Index>(order.size());
  std::map<NodeId, Eigen::Index> index;
  for (Eigen::Index i = 0; i < n; ++i) index.emplace(order[static_cast<std::size_t>(i)], i);
  Matrix a = Matrix::Identity(n, n);
  for (const auto& e : g.edges()) {
    auto s = index.find(e.source);
    auto t = index.find(e.target);
    if (s == index.end() || t == index.end()) continue;
    a(s->second, t->second) = 1.0;
  }
  for (Eigen::Index i = 0; i < n; ++i) a.row(i) /= a.row(i).sum();
  return a;
}

PuInput make_pu_input(const FactRuleGraph& g_prime, const std::vector<NodeId>& candidates, Vector text,
                      const std::set<NodeId>& known) {
  PuInput in;
  in.text = std::move(text);
  in.nodes = g_prime.ordered_nodes();
  if (!known.empty()) {
    for (const auto& n : in.nodes) in.known.push_back(known.contains(n) ? 1 : 0);
  }
  in.adjacency = normalized_adjacency(g_prime, in.nodes);
  std::map<NodeId, int> index;
  for (std::size_t i = 0; i < in.nodes.size(); ++i) index.emplace(in.nodes[i], static_cast<int>(i));
  for (const auto& c : candidates) {
    auto it = index.find(c);
    if (it == index.end()) {
      throw Error(Errc::InvalidArgument, "candidate '" + c.label + "' is not in the subgraph");
    }
    in.scored.push_back(it->second);
  }
  return in;
}

PuBatch make_pu_batch(std::string case_id, const FactRuleGraph& g_prime,
                      const std::vector<NodeId>& candidates, const std::set<NodeId>& masked, Vector text,
                      const std::set<NodeId>& known) {
  PuBatch b;
  b.case_id = std::move(case_id);
  b.input = make_pu_input(g_prime, candidates, std::move(text), known);
  for (std::size_t j = 0; j < candidates.size(); ++j) {
    (masked.contains(candidates[j]) ? b.positive : b.unlabeled).push_back(static_cast<int>(j));
  }
  const double n = static_cast<double>(candidates.size());
  b.prior = n > 0 ? static_cast<double>(b.positive.size()) / n : 0.5;
  return b;
}

Matrix graph_conv_forward(const Matrix& adjacency, const Matrix& h0, const PuParams& params) {
  if (adjacency.rows() != h0.rows() || adjacency.cols() != h0.rows()) {
    throw Error(Errc::DimensionMismatch, "adjacency does not match node rows");
  }
  Matrix h = h0;
  for (std::size_t l = 0; l < params.conv_w.size(); ++l) {
    if (h.cols() != params.conv_w[l].rows()) {
      throw Error(Errc::DimensionMismatch, "node rows do not match conv layer width");
    }
    Matrix pre = adjacency * h * params.conv_w[l];
    pre.rowwise() += params.conv_b[l].transpose();
    h = relu(pre);
  }
  return h;
}

AttentionResult node_attention(const Vector& text, const Matrix& rows, const PuParams& params) {
  if (rows.rows() == 0) throw Error(Errc::EmptyNodeSet, "attention over an empty node set");
  const Eigen::Index d = rows.cols();
  if (text.size() != d || params.att_w.size() != 2 * d) {
    throw Error(Errc::DimensionMismatch, "attention inputs have inconsistent widths");
  }
  AttentionResult out;
  const double text_part = params.att_w.head(d).dot(text);
  out.pre = (rows * params.att_w.tail(d)).array() + text_part + params.att_b;
  const Vector e = out.pre.cwiseMax(0.0);
  const double peak = e.maxCoeff();
  Vector w = (e.array() - peak).exp();
  out.alpha = w / w.sum();
  out.z = rows.transpose() * out.alpha;
  return out;
}

double score_logit(const Vector& node_row, const Vector& z, const PuParams& params) {
  if (node_row.size() != z.size() || params.mlp_w.empty() ||
      params.mlp_w.front().cols() != node_row.size() + z.size()) {
    throw Error(Errc::DimensionMismatch, "score inputs do not match the head width");
  }
  Vector x(z.size() + node_row.size());
  x << z, node_row;
  for (std::size_t k = 0; k < params.mlp_w.size(); ++k) {
    Vector pre = params.mlp_w[k] * x + params.mlp_b[k];
    x = k + 1 < params.mlp_w.size() ? Vector(pre.cwiseMax(0.0)) : pre;
  }
  return x[0];
}

double score(const Vector& node_row, const Vector& z, const PuParams& params) {
  return probability_from_logit(score_logit(node_row, z, params));
}

PuModel PuModel::initialize(const PuArchitecture& arch, std::uint64_t seed) {
  if (arch.dim < 1 || arch.conv_layers < 0) throw Error(Errc::InvalidArgument, "invalid architecture");
  PuModel m;
  m.arch_ = arch;
  m.seed_ = seed;
  Rng rng(mix_seed(seed, 0x70756d6f64656cULL));
  const int d = arch.dim;
  for (int l = 0; l < arch.conv_layers; ++l) {
    Matrix w(d, d);
    fill_uniform(w, rng, std::sqrt(6.0 / (2.0 * d)));
    m.params_.conv_w.push_back(std::move(w));
    m.params_.conv_b.push_back(Vector::Zero(d));
  }
  Matrix att(2 * d, 1);
  fill_uniform(att, rng, 1.0 / std::sqrt(2.0 * d));
  m.params_.att_w = att.col(0);
  m.params_.att_b = 0.0;
  const auto widths = arch.head_widths();
  for (std::size_t k = 0; k + 1 < widths.size(); ++k) {
    Matrix w(widths[k + 1], widths[k]);
    fill_uniform(w, rng, std::sqrt(6.0 / widths[k]));
    m.params_.mlp_w.push_back(std::move(w));
    m.params_.mlp_b.push_back(Vector::Zero(widths[k + 1]));
  }
  Matrix known(d, 1);
  fill_uniform(known, rng, 1.0 / std::sqrt(static_cast<double>(d)));
  m.params_.known_row = known.col(0);
  return m;
}

void PuModel::register_nodes(std::span<const NodeId> nodes) {
  for (const auto& n : nodes) {
    if (!params_.node_rows.contains(n)) params_.node_rows.emplace(n, init_node_row(n, arch_.dim, seed_));
  }
}

Vector PuModel::node_row(const NodeId& node) const {
  auto it = params_.node_rows.find(node);
  return it != params_.node_rows.end() ? it->second : init_node_row(node, arch_.dim, seed_);
}

Matrix PuModel::initial_rows(const std::vector<NodeId>& nodes) const {
  Matrix h(static_cast<Eigen::Index>(nodes.size()), arch_.dim);
  for (std::size_t i = 0; i < nodes.size(); ++i) h.row(static_cast<Eigen::Index>(i)) = node_row(nodes[i]).transpose();
  return h;
}

ForwardCache PuModel::forward(const PuInput& input) const {
  if (input.scored.empty()) throw Error(Errc::EmptyNodeSet, "no scored nodes");
  if (input.text.size() != arch_.dim) throw Error(Errc::DimensionMismatch, "text embedding width differs from model width");
  if (!input.known.empty() && input.known.size() != input.nodes.size()) {
    throw Error(Errc::DimensionMismatch, "known flags do not match the node list");
  }
  ForwardCache c;
  c.hidden.push_back(initial_rows(input.nodes));
  for (std::size_t i = 0; i < input.known.size(); ++i) {
    if (input.known[i]) c.hidden.back().row(static_cast<Eigen::Index>(i)) += params_.known_row.transpose();
  }
  for (std::size_t l = 0; l < params_.conv_w.size(); ++l) {
    c.propagated.push_back(input.adjacency * c.hidden.back());
    Matrix pre = c.propagated.back() * params_.conv_w[l];
    pre.rowwise() += params_.conv_b[l].transpose();
    c.hidden.push_back(relu(pre));
    c.preact.push_back(std::move(pre));
  }
  const Matrix& top = c.hidden.back();
  const auto m = static_cast<Eigen::Index>(input.scored.size());
  c.scored_rows.resize(m, arch_.dim);
  for (Eigen::Index j = 0; j < m; ++j) c.scored_rows.row(j) = top.row(input.scored[static_cast<std::size_t>(j)]);
  c.attention = node_attention(input.text, c.scored_rows, params_);

  Matrix x(m, 2 * arch_.dim);
  x.leftCols(arch_.dim) = c.attention.z.transpose().replicate(m, 1);
  x.rightCols(arch_.dim) = c.scored_rows;
  for (std::size_t k = 0; k < params_.mlp_w.size(); ++k) {
    c.head_act.push_back(x);
    Matrix pre = x * params_.mlp_w[k].transpose();
    pre.rowwise() += params_.mlp_b[k].transpose();
    x = k + 1 < params_.mlp_w.size() ? relu(pre) : pre;
    c.head_pre.push_back(std::move(pre));
  }
  c.logits = x.col(0);
  c.probabilities = c.logits.unaryExpr([](double z) { return probability_from_logit(z); });
  return c;
}

PuParams PuModel::backward(const PuInput& input, const ForwardCache& c, const Vector& dlogits) const {
  const Eigen::Index d = arch_.dim;
  const auto m = static_cast<Eigen::Index>(input.scored.size());
  PuParams g = params_.zeros_like();

  // Probability head.
  Matrix grad = dlogits;  // m x 1
  for (std::size_t k = params_.mlp_w.size(); k-- > 0;) {
    g.mlp_w[k] = grad.transpose() * c.head_act[k];
    g.mlp_b[k] = grad.colwise().sum().transpose();
    Matrix dact = grad * params_.mlp_w[k];
    if (k > 0) {
      grad = dact.cwiseProduct(relu_mask(c.head_pre[k - 1]));
    } else {
      grad = std::move(dact);
    }
  }
  Vector dz = grad.leftCols(d).colwise().sum().transpose();
  Matrix dscored = grad.rightCols(d);

  // Attention.
  const auto& att = c.attention;
  const Vector dalpha = c.scored_rows * dz;
  dscored += att.alpha * dz.transpose();
  const double mean = att.alpha.dot(dalpha);
  const Vector de = att.alpha.cwiseProduct((dalpha.array() - mean).matrix());
  const Vector du = de.cwiseProduct((att.pre.array() > 0.0).cast<double>().matrix());
  const double du_sum = du.sum();
  g.att_w.head(d) = du_sum * input.text;
  g.att_w.tail(d) = c.scored_rows.transpose() * du;
  g.att_b = du_sum;
  dscored += du * params_.att_w.tail(d).transpose();

  // Graph convolution.
  Matrix dh = Matrix::Zero(c.hidden.back().rows(), d);
  for (Eigen::Index j = 0; j < m; ++j) dh.row(input.scored[static_cast<std::size_t>(j)]) += dscored.row(j);
  for (std::size_t l = params_.conv_w.size(); l-- > 0;) {
    const Matrix dpre = dh.cwiseProduct(relu_mask(c.preact[l]));
    g.conv_w[l] = c.propagated[l].transpose() * dpre;
    g.conv_b[l] = dpre.colwise().sum().transpose();
    dh = input.adjacency.transpose() * (dpre * params_.conv_w[l].transpose());
  }
  for (std::size_t i = 0; i < input.nodes.size(); ++i) {
    g.node_rows[input.nodes[i]] = dh.row(static_cast<Eigen::Index>(i)).transpose();
    if (!input.known.empty() && input.known[i]) g.known_row += dh.row(static_cast<Eigen::Index>(i)).transpose();
  }
  return g;
}

nlohmann::json PuModel::to_json() const {
  nlohmann::json j;
  j["format"] = "casediag.pu_model";
  j["version"] = 1;
  j["dim"] = arch_.dim;
  j["conv_layers"] = arch_.conv_layers;
  j["head_widths"] = arch_.head_widths();
  j["seed"] = seed_;
  auto conv = nlohmann::json::array();
  for (std::size_t l = 0; l < params_.conv_w.size(); ++l) {
    conv.push_back({{"weight", matrix_json(params_.conv_w[l])}, {"bias", vector_json(params_.conv_b[l])}});
  }
  j["conv"] = std::move(conv);
  j["attention"] = {{"weight", vector_json(params_.att_w)}, {"bias", params_.att_b}};
  auto head = nlohmann::json::array();
  for (std::size_t k = 0; k < params_.mlp_w.size(); ++k) {
    head.push_back({{"weight", matrix_json(params_.mlp_w[k])}, {"bias", vector_json(params_.mlp_b[k])}});
  }
  j["head"] = std::move(head);
  j["known_row"] = vector_json(params_.known_row);
  auto nodes = nlohmann::json::array();
  for (const auto& [node, row] : params_.node_rows) {
    nodes.push_back({{"label", node.label}, {"kind", std::string(to_string(node.kind))}, {"row", vector_json(row)}});
  }
  j["nodes"] = std::move(nodes);
  return j;
}

PuModel PuModel::from_json(const nlohmann::json& j) {
  if (!j.contains("version")) throw Error(Errc::InvalidArgument, "checkpoint lacks a version field");
  if (j.value("format", "") != "casediag.pu_model" || j["version"].get<int>() != 1) {
    throw Error(Errc::InvalidArgument, "unsupported PU checkpoint format/version");
  }
  PuModel m;
  m.arch_.dim = j.at("dim").get<int>();
  m.arch_.conv_layers = j.at("conv_layers").get<int>();
  const auto widths = j.at("head_widths").get<std::vector<int>>();
  if (widths.size() < 2 || widths.front() != 2 * m.arch_.dim || widths.back() != 1) {
    throw Error(Errc::DimensionMismatch, "checkpoint head widths are inconsistent");
  }
  m.arch_.mlp_hidden.assign(widths.begin() + 1, widths.end() - 1);
  m.seed_ = j.at("seed").get<std::uint64_t>();
  const Eigen::Index d = m.arch_.dim;
  const auto& conv = j.at("conv");
  if (static_cast<int>(conv.size()) != m.arch_.conv_layers) throw Error(Errc::DimensionMismatch, "conv layer count");
  for (const auto& layer : conv) {
    m.params_.conv_w.push_back(matrix_from(layer.at("weight"), d, d));
    m.params_.conv_b.push_back(vector_from(layer.at("bias"), d));
  }
  m.params_.att_w = vector_from(j.at("attention").at("weight"), 2 * d);
  m.params_.att_b = j.at("attention").at("bias").get<double>();
  const auto& head = j.at("head");
  if (head.size() + 1 != widths.size()) throw Error(Errc::DimensionMismatch, "head layer count");
  for (std::size_t k = 0; k < head.size(); ++k) {
    m.params_.mlp_w.push_back(matrix_from(head[k].at("weight"), widths[k + 1], widths[k]));
    m.params_.mlp_b.push_back(vector_from(head[k].at("bias"), widths[k + 1]));
  }
  m.params_.known_row = vector_from(j.at("known_row"), d);
  for (const auto& n : j.at("nodes")) {
    const auto kind = n.at("kind").get<std::string>() == "Rule" ? NodeKind::Rule : NodeKind::Fact;
    m.params_.node_rows.emplace(canonicalize(n.at("label").get<std::string>(), kind), vector_from(n.at("row"), d));
  }
  return m;
}

PuRisk nnpu_risk(std::span<const double> positive_logits, std::span<const double> unlabeled_logits,
                 double prior) {
  PuRisk r;
  const double np = static_cast<double>(positive_logits.size());
  const double nu = static_cast<double>(unlabeled_logits.size());
  if (np > 0) {
    for (double z : positive_logits) {
      r.positive_risk += sigmoid(-z);
      r.positive_as_negative += sigmoid(z);
    }
    r.positive_risk /= np;
    r.positive_as_negative /= np;
  }
  if (nu > 0) {
    for (double z : unlabeled_logits) r.unlabeled_as_negative += sigmoid(z);
    r.unlabeled_as_negative /= nu;
  }
  r.inner = r.unlabeled_as_negative - prior * r.positive_as_negative;
  r.used_correction = r.inner < 0.0;
  r.risk = prior * r.positive_risk + std::max(0.0, r.inner);
  return r;
}

PuRisk nnpu_risk(const PuBatch& batch, const PuModel& model, double prior) {
  const Vector logits = model.forward(batch.input).logits;
  std::vector<double> pos;
  std::vector<double> unl;
  for (int j : batch.positive) pos.push_back(logits[j]);
  for (int j : batch.unlabeled) unl.push_back(logits[j]);
  return nnpu_risk(pos, unl, prior);
}

}  // namespace casediag
