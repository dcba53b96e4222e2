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

#ifndef ULTR_BIAS_PARAMS_H_
#define ULTR_BIAS_PARAMS_H_

#include <cstddef>
#include <iosfwd>
#include <vector>

namespace ultr {

inline constexpr double kDefaultFloor = 1e-4;

// Position-only bias parameters for N display positions. All accessors take
// 1-based positions. Diagonal entries of the eps matrices are unused.
//   theta(i)          P(e_i = 1 | i)
//   theta_minus(i)    P(e_i = 1 | i, c_i = 0)
//   eps_plus(i, j)    P(c_i > c_j | e_i = e_j = 1, r_i > r_j)
//   eps_minus(i, j)   P(c_i > c_j | e_i = e_j = 1, r_i <= r_j)
class BiasParams {
 public:
  BiasParams() = default;
  explicit BiasParams(std::size_t n);

  std::size_t size() const { return n_; }

  double theta(int i) const { return theta_[i - 1]; }
  double& theta(int i) { return theta_[i - 1]; }
  double theta_minus(int i) const { return theta_minus_[i - 1]; }
  double& theta_minus(int i) { return theta_minus_[i - 1]; }
  double eps_plus(int i, int j) const { return eps_plus_[cell(i, j)]; }
  double& eps_plus(int i, int j) { return eps_plus_[cell(i, j)]; }
  double eps_minus(int i, int j) const { return eps_minus_[cell(i, j)]; }
  double& eps_minus(int i, int j) { return eps_minus_[cell(i, j)]; }

  bool operator==(const BiasParams&) const = default;

 private:
  std::size_t cell(int i, int j) const {
    return static_cast<std::size_t>(i - 1) * n_ + static_cast<std::size_t>(j - 1);
  }

  std::size_t n_ = 0;
  std::vector<double> theta_;
  std::vector<double> theta_minus_;
  std::vector<double> eps_plus_;
  std::vector<double> eps_minus_;
};

// theta_i = 1/i, theta_minus_i = 0.5/i, eps+ = 0.9, eps- = 0.1. Needs n >= 2.
BiasParams init_default(std::size_t n);

// Clamps theta and theta_minus to [floor, 1-floor], eps+ to [2 floor, 1-floor],
// then eps- to [floor, eps+ - floor]. Idempotent.
BiasParams project(const BiasParams& params, double floor = kDefaultFloor);

// p <- (1 - alpha) p + alpha p_hat for every scalar, then project.
BiasParams blend(const BiasParams& old, const BiasParams& estimate, double alpha,
                 double floor = kDefaultFloor);

// 0 < eps-_ij < eps+_ij < 1 off the diagonal and 0 < theta <= 1,
// 0 <= theta_minus <= 1.
bool satisfies_constraints(const BiasParams& params);

// Positions where theta_minus > theta (allowed, but not a valid pairwise joint).
std::vector<int> theta_minus_violations(const BiasParams& params);

double max_abs_difference(const BiasParams& a, const BiasParams& b);

// Flat table: `param \t i \t j \t value`, j = 0 for per-position vectors.
void write_table(std::ostream& out, const BiasParams& params);
BiasParams read_table(std::istream& in);

}  // namespace ultr

#endif  // ULTR_BIAS_PARAMS_H_
