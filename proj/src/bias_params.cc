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

#include "ultr/bias_params.h"

#include <algorithm>
#include <cmath>
#include <istream>
#include <map>
#include <ostream>
#include <string>
#include <tuple>

#include "ultr/errors.h"
#include "ultr/text_format.h"

namespace ultr {

BiasParams::BiasParams(std::size_t n)
    : n_(n),
      theta_(n, 1.0),
      theta_minus_(n, 1.0),
      eps_plus_(n * n, 1.0),
      eps_minus_(n * n, 0.0) {}

BiasParams init_default(std::size_t n) {
  if (n < 2) throw ValidationError("bias parameters need at least 2 positions");
  BiasParams p(n);
  for (int i = 1; i <= static_cast<int>(n); ++i) {
    p.theta(i) = 1.0 / i;
    p.theta_minus(i) = 0.5 / i;
    for (int j = 1; j <= static_cast<int>(n); ++j) {
      p.eps_plus(i, j) = 0.9;
      p.eps_minus(i, j) = 0.1;
    }
  }
  return p;
}

BiasParams project(const BiasParams& params, double floor) {
  BiasParams p = params;
  const int n = static_cast<int>(p.size());
  for (int i = 1; i <= n; ++i) {
    p.theta(i) = std::clamp(p.theta(i), floor, 1.0 - floor);
    p.theta_minus(i) = std::clamp(p.theta_minus(i), floor, 1.0 - floor);
    for (int j = 1; j <= n; ++j) {
      double& ep = p.eps_plus(i, j);
      double& em = p.eps_minus(i, j);
      ep = std::clamp(ep, 2.0 * floor, 1.0 - floor);
      em = std::clamp(em, floor, ep - floor);
    }
  }
  return p;
}

BiasParams blend(const BiasParams& old, const BiasParams& estimate, double alpha,
                 double floor) {
  if (old.size() != estimate.size()) {
    throw ValidationError("blend: parameter sizes differ");
  }
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw ValidationError("blend: alpha outside [0,1]");
  BiasParams p = old;
  const int n = static_cast<int>(p.size());
  auto mix = [alpha](double a, double b) { return a * (1.0 - alpha) + b * alpha; };
  for (int i = 1; i <= n; ++i) {
    p.theta(i) = mix(old.theta(i), estimate.theta(i));
    p.theta_minus(i) = mix(old.theta_minus(i), estimate.theta_minus(i));
    for (int j = 1; j <= n; ++j) {
      p.eps_plus(i, j) = mix(old.eps_plus(i, j), estimate.eps_plus(i, j));
      p.eps_minus(i, j) = mix(old.eps_minus(i, j), estimate.eps_minus(i, j));
    }
  }
  return project(p, floor);
}

bool satisfies_constraints(const BiasParams& p) {
  const int n = static_cast<int>(p.size());
  for (int i = 1; i <= n; ++i) {
    if (!(p.theta(i) > 0.0 && p.theta(i) <= 1.0)) return false;
    if (!(p.theta_minus(i) >= 0.0 && p.theta_minus(i) <= 1.0)) return false;
    for (int j = 1; j <= n; ++j) {
      if (i == j) continue;
      if (!(0.0 < p.eps_minus(i, j) && p.eps_minus(i, j) < p.eps_plus(i, j) &&
            p.eps_plus(i, j) < 1.0)) {
        return false;
      }
    }
  }
  return true;
}

std::vector<int> theta_minus_violations(const BiasParams& p) {
  std::vector<int> out;
  for (int i = 1; i <= static_cast<int>(p.size()); ++i) {
    if (p.theta_minus(i) > p.theta(i)) out.push_back(i);
  }
  return out;
}

double max_abs_difference(const BiasParams& a, const BiasParams& b) {
  if (a.size() != b.size()) throw ValidationError("parameter sizes differ");
  double d = 0.0;
  const int n = static_cast<int>(a.size());
  for (int i = 1; i <= n; ++i) {
    d = std::max({d, std::abs(a.theta(i) - b.theta(i)),
                  std::abs(a.theta_minus(i) - b.theta_minus(i))});
    for (int j = 1; j <= n; ++j) {
      if (i == j) continue;
      d = std::max({d, std::abs(a.eps_plus(i, j) - b.eps_plus(i, j)),
                    std::abs(a.eps_minus(i, j) - b.eps_minus(i, j))});
    }
  }
  return d;
}

void write_table(std::ostream& out, const BiasParams& p) {
  const int n = static_cast<int>(p.size());
  out << "param\ti\tj\tvalue\n";
  for (int i = 1; i <= n; ++i) out << "theta\t" << i << "\t0\t" << format_double(p.theta(i)) << '\n';
  for (int i = 1; i <= n; ++i) {
    out << "theta_minus\t" << i << "\t0\t" << format_double(p.theta_minus(i)) << '\n';
  }
  for (int i = 1; i <= n; ++i) {
    for (int j = 1; j <= n; ++j) {
      if (i != j) out << "eps_plus\t" << i << '\t' << j << '\t' << format_double(p.eps_plus(i, j)) << '\n';
    }
  }
  for (int i = 1; i <= n; ++i) {
    for (int j = 1; j <= n; ++j) {
      if (i != j) out << "eps_minus\t" << i << '\t' << j << '\t' << format_double(p.eps_minus(i, j)) << '\n';
    }
  }
}

BiasParams read_table(std::istream& in) {
  std::map<std::tuple<std::string, int, int>, double> rows;
  int n = 0;
  std::string raw;
  std::size_t line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    const auto line = trim(raw);
    if (line.empty() || line.front() == '#' || line.substr(0, 5) == "param") continue;
    const auto f = split(line, '\t');
    if (f.size() != 4) throw ParseError(line_no, "expected 4 tab-separated fields");
    const auto i = parse_int(f[1]);
    const auto j = parse_int(f[2]);
    const auto v = parse_double(f[3]);
    if (!i || !j || !v || *i < 1 || *j < 0) throw ParseError(line_no, "malformed row");
    const std::string name(f[0]);
    if (name != "theta" && name != "theta_minus" && name != "eps_plus" &&
        name != "eps_minus") {
      throw ParseError(line_no, "unknown parameter '" + name + "'");
    }
    rows[{name, static_cast<int>(*i), static_cast<int>(*j)}] = *v;
    n = std::max(n, static_cast<int>(std::max(*i, *j)));
  }
  if (n < 2) throw ValidationError("bias parameter table needs at least 2 positions");
  BiasParams p(static_cast<std::size_t>(n));
  auto need = [&](const std::string& name, int i, int j) {
    const auto it = rows.find({name, i, j});
    if (it == rows.end()) {
      throw ValidationError("bias parameter table lacks " + name + " " +
                            std::to_string(i) + " " + std::to_string(j));
    }
    return it->second;
  };
  for (int i = 1; i <= n; ++i) {
    p.theta(i) = need("theta", i, 0);
    p.theta_minus(i) = need("theta_minus", i, 0);
    for (int j = 1; j <= n; ++j) {
      if (i == j) continue;
      p.eps_plus(i, j) = need("eps_plus", i, j);
      p.eps_minus(i, j) = need("eps_minus", i, j);
    }
  }
  return p;
}

}  // namespace ultr
