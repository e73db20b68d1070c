/*
 Copyright 2026 The dmp Authors

 Licensed under the Apache License, Version 2.0 (the "License");
 you may not use this file except in compliance with the License.
 You may obtain a copy of the License at

      https://www.apache.org/licenses/LICENSE-2.0

 Unless required by applicable law or agreed to in writing, software
 distributed under the License is distributed on an "AS IS" BASIS,
 WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 See the License for the specific language governing permissions and
 limitations under the License.
*/

// Helpers shared by the unit and acceptance tests.

#pragma once

#include <cmath>
#include <random>
#include <string>
#include <vector>

#include "dmp/exprlang.hpp"
#include "dmp/numdiff.hpp"

namespace dmp::testing {

// Random well-posed expression over x1, x2, u1, t and parameters a, b.
// Subterms fed to ln, sqrt, division and non-integer powers are wrapped so
// they stay positive.
class ExprGen {
 public:
  explicit ExprGen(std::uint64_t seed) : rng_(seed) {}

  std::string make(int depth) {
    std::uniform_int_distribution<int> pick(0, depth <= 0 ? 1 : 11);
    switch (pick(rng_)) {
      case 0:
        return leaf();
      case 1:
        return constant();
      case 2:
        return "(" + make(depth - 1) + " + " + make(depth - 1) + ")";
      case 3:
        return "(" + make(depth - 1) + " - " + make(depth - 1) + ")";
      case 4:
      case 5:
        return "(" + make(depth - 1) + " * " + make(depth - 1) + ")";
      case 6:
        return "(" + make(depth - 1) + " / " + positive(depth - 1) + ")";
      case 7:
        return "ln(" + positive(depth - 1) + ")";
      case 8:
        return "sqrt(" + positive(depth - 1) + ")";
      case 9:
        return "exp(0.3 * " + make(depth - 1) + " / " + positive(depth - 1) + ")";
      case 10: {
        std::uniform_int_distribution<int> k(2, 3);
        return "(" + make(depth - 1) + ")^" + std::to_string(k(rng_));
      }
      default:
        return "pow(" + positive(depth - 1) + ", 0.5 * " + leaf() + ")";
    }
  }

  std::string positive(int depth) {
    return "(" + constant_pos() + " + (" + make(depth) + ")^2)";
  }

  dmp::expr::Bindings point() {
    std::uniform_real_distribution<double> v(-1.5, 1.5);
    std::uniform_real_distribution<double> p(0.5, 2.0);
    return {{"x1", v(rng_)}, {"x2", v(rng_)}, {"u1", v(rng_)},
            {"t", std::floor(p(rng_) * 3.0)}, {"a", p(rng_)}, {"b", p(rng_)}};
  }

  std::mt19937_64& rng() { return rng_; }

 private:
  std::string leaf() {
    static const char* names[] = {"x1", "x2", "u1", "t", "a", "b"};
    std::uniform_int_distribution<int> pick(0, 5);
    return names[pick(rng_)];
  }
  std::string constant() {
    std::uniform_real_distribution<double> c(-2.0, 2.0);
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.3f", c(rng_));
    return std::string("(") + buf + ")";
  }
  std::string constant_pos() {
    std::uniform_real_distribution<double> c(0.5, 2.0);
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.3f", c(rng_));
    return buf;
  }

  std::mt19937_64 rng_;
};

struct GradTrial {
  std::string source;
  double worst = 0.0;  // max |g - fd| / (1 + |g|)
  bool pass = true;
};

// Analytic gradient wrt x1, x2, u1 against central differences.
inline GradTrial grad_trial(const std::string& src, const dmp::expr::Bindings& at) {
  using namespace dmp;
  const auto e = expr::parse(src, {"a", "b"}, 2, 1);
  const std::vector<std::string> wrt = {"x1", "x2", "u1"};
  const auto g = expr::grad(e, at, wrt);
  Eigen::VectorXd p(3);
  for (int i = 0; i < 3; ++i) p(i) = at.at(wrt[i]);
  auto f = [&](std::span<const double> q) {
    auto b = at;
    for (int i = 0; i < 3; ++i) b[wrt[i]] = q[i];
    return expr::eval(e, b);
  };
  const auto fd = numdiff::fd_grad(f, p);
  GradTrial out{src};
  for (int i = 0; i < 3; ++i) {
    const double err = std::abs(g[i] - fd(i)) / (1.0 + std::abs(g[i]));
    out.worst = std::max(out.worst, err);
  }
  out.pass = out.worst <= 1e-6;
  return out;
}

// Draws `count` expression/point pairs whose value and gradient are finite
// and moderate, and checks each.
inline std::vector<GradTrial> grad_trials(int count, std::uint64_t seed) {
  ExprGen gen(seed);
  std::vector<GradTrial> out;
  while (static_cast<int>(out.size()) < count) {
    const std::string src = gen.make(4);
    const auto at = gen.point();
    const auto e = dmp::expr::parse(src, {"a", "b"}, 2, 1);
    const double v = dmp::expr::eval(e, at);
    if (!std::isfinite(v) || std::abs(v) > 1e4) continue;
    if (!e.uses_state() && !e.uses_control()) continue;
    out.push_back(grad_trial(src, at));
  }
  return out;
}

}  // namespace dmp::testing
