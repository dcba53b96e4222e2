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

#ifndef ULTR_NNRANK_H_
#define ULTR_NNRANK_H_

#include <Eigen/Dense>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

namespace ultr {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

struct MlpSpec {
  std::size_t input_dim = 0;
  std::vector<std::size_t> hidden = {64, 32};
  std::uint64_t init_seed = 0;

  bool operator==(const MlpSpec&) const = default;
};

double elu(double x);
double sigmoid(double x);

// Activations of one forward pass, tied to the exact parameter version that
// produced them.
struct ForwardRecord {
  std::vector<RowMatrix> pre;   // pre-activation per hidden layer (batch x width)
  std::vector<RowMatrix> post;  // post[0] is the input; post[l+1] = elu(pre[l])
  Eigen::VectorXd score;        // batch
  Eigen::VectorXd beta_logit;   // batch
  std::uint64_t owner = 0;
  std::uint64_t version = 0;

  std::size_t batch_size() const { return static_cast<std::size_t>(score.size()); }
};

// Flat gradient with the same layout as Ranker::parameters().
struct Gradients {
  std::vector<double> values;
};

// MLP trunk (ELU) with two scalar heads: the score f(x) and the logit of the
// pointwise relevance probability beta(x). The pairwise preference is tied to
// the score: gamma(a, b) = sigmoid(f(a) - f(b)).
//
// Parameter layout, layer-major: for each hidden layer W (out x in, row-major)
// then b (out); score head w (H) then b (1); beta head w (H) then b (1).
class Ranker {
 public:
  explicit Ranker(MlpSpec spec);
  Ranker(const Ranker& other);
  Ranker& operator=(const Ranker& other);
  Ranker(Ranker&&) noexcept = default;
  Ranker& operator=(Ranker&&) noexcept = default;

  const MlpSpec& spec() const { return spec_; }
  std::size_t num_parameters() const { return params_.size(); }
  std::span<const double> parameters() const { return params_; }
  // Mutable access invalidates outstanding forward records.
  std::span<double> mutable_parameters();
  std::uint64_t version() const { return version_; }

  double score(std::span<const double> features) const;
  double beta(std::span<const double> features) const;
  double gamma(std::span<const double> feat_i, std::span<const double> feat_j) const;

  // Rows of `batch` are items.
  ForwardRecord forward(const RowMatrix& batch) const;
  Eigen::VectorXd score_batch(const RowMatrix& batch) const;

  // Chain rule from per-item upstream gradients on the score and on the beta
  // logit. Throws StateError if `record` was not produced by this ranker at its
  // current parameter version.
  Gradients backprop(const ForwardRecord& record, std::span<const double> d_score,
                     std::span<const double> d_beta_logit) const;

  // theta <- theta - lr * g, after rescaling g to global norm <= clip.
  void sgd_step(const Gradients& grads, double lr,
                std::optional<double> clip = std::nullopt);

  // Zeroes both head layers (weights and biases); score 0 and beta 0.5 for any
  // input afterwards.
  void zero_heads();

  // Offsets into the flat parameter array.
  struct Layer {
    std::size_t in = 0;
    std::size_t out = 0;
    std::size_t weight_offset = 0;
    std::size_t bias_offset = 0;
  };
  const std::vector<Layer>& hidden_layers() const { return layers_; }
  const Layer& score_head() const { return score_head_; }
  const Layer& beta_head() const { return beta_head_; }

 private:
  void check_dim(std::size_t n) const;

  MlpSpec spec_;
  std::vector<Layer> layers_;
  Layer score_head_;
  Layer beta_head_;
  std::vector<double> params_;
  std::uint64_t id_ = 0;
  std::uint64_t version_ = 0;
};

// Dense batch from feature vectors.
RowMatrix stack_rows(std::span<const std::span<const double>> rows, std::size_t dim);

}  // namespace ultr

#endif  // ULTR_NNRANK_H_
