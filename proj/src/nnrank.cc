/*
 * Copyright 2026 The ultr Authors.
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include "ultr/nnrank.h"

#include <atomic>
#include <cmath>
#include <random>
#include <string>

#include "ultr/errors.h"

namespace ultr {
namespace {

std::atomic<std::uint64_t> g_next_ranker_id{1};

using ConstRowMap = Eigen::Map<const RowMatrix>;
using ConstVecMap = Eigen::Map<const Eigen::VectorXd>;

}  // namespace

double elu(double x) { return x > 0 ? x : std::expm1(x); }

double sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

Ranker::Ranker(MlpSpec spec) : spec_(std::move(spec)), id_(g_next_ranker_id++) {
  if (spec_.input_dim == 0) throw ValidationError("MLP input_dim must be positive");
  if (spec_.hidden.empty()) throw ValidationError("MLP needs at least one hidden layer");
  std::size_t offset = 0;
  std::size_t in = spec_.input_dim;
  for (std::size_t width : spec_.hidden) {
    if (width == 0) throw ValidationError("MLP layer widths must be positive");
    Layer layer{in, width, offset, offset + in * width};
    offset = layer.bias_offset + width;
    layers_.push_back(layer);
    in = width;
  }
  score_head_ = {in, 1, offset, offset + in};
  offset += in + 1;
  beta_head_ = {in, 1, offset, offset + in};
  offset += in + 1;
  params_.assign(offset, 0.0);

  // Glorot-uniform weights, zero biases.
  std::mt19937_64 rng(spec_.init_seed);
  auto init = [&](const Layer& layer) {
    const double a = std::sqrt(6.0 / static_cast<double>(layer.in + layer.out));
    std::uniform_real_distribution<double> dist(-a, a);
    for (std::size_t k = 0; k < layer.in * layer.out; ++k) {
      params_[layer.weight_offset + k] = dist(rng);
    }
  };
  for (const auto& layer : layers_) init(layer);
  init(score_head_);
  init(beta_head_);
}

Ranker::Ranker(const Ranker& other)
    : spec_(other.spec_),
      layers_(other.layers_),
      score_head_(other.score_head_),
      beta_head_(other.beta_head_),
      params_(other.params_),
      id_(g_next_ranker_id++),
      version_(0) {}

Ranker& Ranker::operator=(const Ranker& other) {
  if (this != &other) {
    spec_ = other.spec_;
    layers_ = other.layers_;
    score_head_ = other.score_head_;
    beta_head_ = other.beta_head_;
    params_ = other.params_;
    ++version_;
  }
  return *this;
}

std::span<double> Ranker::mutable_parameters() {
  ++version_;
  return params_;
}

void Ranker::check_dim(std::size_t n) const {
  if (n != spec_.input_dim) {
    throw ValidationError("feature dimension " + std::to_string(n) +
                          " != ranker input_dim " + std::to_string(spec_.input_dim));
  }
}

ForwardRecord Ranker::forward(const RowMatrix& batch) const {
  check_dim(static_cast<std::size_t>(batch.cols()));
  ForwardRecord rec;
  rec.owner = id_;
  rec.version = version_;
  rec.post.reserve(layers_.size() + 1);
  rec.pre.reserve(layers_.size());
  rec.post.push_back(batch);
  for (const auto& layer : layers_) {
    ConstRowMap w(params_.data() + layer.weight_offset, layer.out, layer.in);
    ConstVecMap b(params_.data() + layer.bias_offset, layer.out);
    RowMatrix z = rec.post.back() * w.transpose();
    z.rowwise() += b.transpose();
    RowMatrix h = z.unaryExpr([](double v) { return elu(v); });
    rec.pre.push_back(std::move(z));
    rec.post.push_back(std::move(h));
  }
  const RowMatrix& top = rec.post.back();
  ConstVecMap ws(params_.data() + score_head_.weight_offset, score_head_.in);
  ConstVecMap wb(params_.data() + beta_head_.weight_offset, beta_head_.in);
  rec.score = top * ws;
  rec.score.array() += params_[score_head_.bias_offset];
  rec.beta_logit = top * wb;
  rec.beta_logit.array() += params_[beta_head_.bias_offset];
  return rec;
}

Eigen::VectorXd Ranker::score_batch(const RowMatrix& batch) const {
  return forward(batch).score;
}

double Ranker::score(std::span<const double> features) const {
  check_dim(features.size());
  RowMatrix row = Eigen::Map<const RowMatrix>(features.data(), 1, features.size());
  return forward(row).score(0);
}

double Ranker::beta(std::span<const double> features) const {
  check_dim(features.size());
  RowMatrix row = Eigen::Map<const RowMatrix>(features.data(), 1, features.size());
  return sigmoid(forward(row).beta_logit(0));
}

double Ranker::gamma(std::span<const double> feat_i,
                     std::span<const double> feat_j) const {
  if (feat_i.size() != feat_j.size()) {
    throw ValidationError("gamma: feature vectors differ in length");
  }
  check_dim(feat_i.size());
  RowMatrix rows(2, feat_i.size());
  rows.row(0) = Eigen::Map<const Eigen::RowVectorXd>(feat_i.data(), feat_i.size());
  rows.row(1) = Eigen::Map<const Eigen::RowVectorXd>(feat_j.data(), feat_j.size());
  const Eigen::VectorXd s = forward(rows).score;
  return sigmoid(s(0) - s(1));
}

Gradients Ranker::backprop(const ForwardRecord& record,
                           std::span<const double> d_score,
                           std::span<const double> d_beta_logit) const {
  if (record.owner != id_ || record.version != version_ || record.post.empty()) {
    throw StateError("backprop: forward record is absent or stale");
  }
  const auto n = static_cast<Eigen::Index>(record.batch_size());
  if (d_score.size() != static_cast<std::size_t>(n) ||
      d_beta_logit.size() != static_cast<std::size_t>(n)) {
    throw ValidationError("backprop: upstream gradient size != batch size");
  }
  Gradients grads;
  grads.values.assign(params_.size(), 0.0);
  auto& g = grads.values;

  ConstVecMap ds(d_score.data(), n);
  ConstVecMap db(d_beta_logit.data(), n);
  const RowMatrix& top = record.post.back();

  Eigen::Map<Eigen::VectorXd>(g.data() + score_head_.weight_offset, score_head_.in) =
      top.transpose() * ds;
  g[score_head_.bias_offset] = ds.sum();
  Eigen::Map<Eigen::VectorXd>(g.data() + beta_head_.weight_offset, beta_head_.in) =
      top.transpose() * db;
  g[beta_head_.bias_offset] = db.sum();

  ConstVecMap ws(params_.data() + score_head_.weight_offset, score_head_.in);
  ConstVecMap wb(params_.data() + beta_head_.weight_offset, beta_head_.in);
  RowMatrix d_h = ds * ws.transpose() + db * wb.transpose();

  for (std::size_t l = layers_.size(); l-- > 0;) {
    const auto& layer = layers_[l];
    // elu'(z) = 1 for z > 0, exp(z) = elu(z) + 1 otherwise.
    const RowMatrix& z = record.pre[l];
    const RowMatrix& h = record.post[l + 1];
    RowMatrix d_z = d_h;
    for (Eigen::Index r = 0; r < d_z.rows(); ++r) {
      for (Eigen::Index c = 0; c < d_z.cols(); ++c) {
        if (z(r, c) <= 0) d_z(r, c) *= h(r, c) + 1.0;
      }
    }
    Eigen::Map<RowMatrix>(g.data() + layer.weight_offset, layer.out, layer.in) =
        d_z.transpose() * record.post[l];
    Eigen::Map<Eigen::VectorXd>(g.data() + layer.bias_offset, layer.out) =
        d_z.colwise().sum().transpose();
    if (l > 0) {
      ConstRowMap w(params_.data() + layer.weight_offset, layer.out, layer.in);
      d_h = d_z * w;
    }
  }
  return grads;
}

void Ranker::sgd_step(const Gradients& grads, double lr, std::optional<double> clip) {
  if (!(lr >= 0)) throw ValidationError("sgd_step: learning rate must be >= 0");
  if (grads.values.size() != params_.size()) {
    throw ValidationError("sgd_step: gradient size mismatch");
  }
  double norm2 = 0.0;
  for (double v : grads.values) {
    if (!std::isfinite(v)) throw NumericError("sgd_step: non-finite gradient");
    norm2 += v * v;
  }
  double scale = lr;
  if (clip) {
    if (*clip < 0) throw ValidationError("sgd_step: clip must be >= 0");
    const double norm = std::sqrt(norm2);
    if (norm > *clip) scale *= *clip / norm;
  }
  if (scale == 0.0) return;
  for (std::size_t k = 0; k < params_.size(); ++k) {
    params_[k] -= scale * grads.values[k];
  }
  ++version_;
}

void Ranker::zero_heads() {
  for (const Layer* head : {&score_head_, &beta_head_}) {
    for (std::size_t k = 0; k < head->in; ++k) params_[head->weight_offset + k] = 0.0;
    params_[head->bias_offset] = 0.0;
  }
  ++version_;
}

RowMatrix stack_rows(std::span<const std::span<const double>> rows, std::size_t dim) {
  RowMatrix m(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(dim));
  for (std::size_t r = 0; r < rows.size(); ++r) {
    if (rows[r].size() != dim) throw ValidationError("stack_rows: ragged rows");
    for (std::size_t c = 0; c < dim; ++c) m(r, c) = rows[r][c];
  }
  return m;
}

}  // namespace ultr
