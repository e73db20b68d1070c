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

#pragma once

#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "dmp/core.hpp"
#include "dmp/feedback.hpp"
#include "dmp/games.hpp"

namespace dmp::bench {

class InvalidParameters : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

enum class Kind { open_loop, markov, euler, game };
const char* to_string(Kind k);

/// A worked example with its closed-form solution.
struct BenchmarkCase {
  std::string name;
  Kind kind = Kind::open_loop;
  std::vector<std::pair<std::string, double>> params;
  VectorXd x0;

  std::shared_ptr<const StageProblem> problem;  // all kinds except game
  // Next-state form x_{t+1} = u (Ak, and Brock-Mirman as a capital choice).
  std::shared_ptr<const EulerProblem> euler;
  std::shared_ptr<const GameProblem> game;      // game only
  std::optional<FeedbackPolicy> policy;         // markov / euler oracle

  // Oracles. control(t) is the (joint, for games) optimal control at stage
  // t, state(t) the optimal state, adjoint(t) lambda_t in the artifact's
  // maximisation convention (empty when no closed form is stated).
  std::function<VectorXd(int)> control;
  std::function<VectorXd(int)> state;
  std::function<RowVectorXd(int)> adjoint;

  std::map<std::string, double> numbers;     // derived constants
  std::map<std::string, std::string> notes;  // conventions

  /// Oracle controls u_0..u_{T-1} with the tail continued by the oracle.
  Plan oracle_plan(int T) const;
  /// Per-player oracle plans (games).
  MultiStrategy oracle_strategy(int T) const;
};

BenchmarkCase make_consumption_investment(double beta = 0.95, double gamma = 0.5,
                                          double r = 1.05, double x0 = 1.0);
BenchmarkCase make_lq(double beta = 0.95, double x0 = 1.0);
/// A_seq is an expression in t giving the productivity A_t > 0.
BenchmarkCase make_brock_mirman(double alpha = 0.3, double beta = 0.95,
                                const std::string& A_seq = "1", double x0 = 1.0);
BenchmarkCase make_ak(double a = 1.02, double beta = 0.9, double theta = -1.0, double x0 = 1.0);
BenchmarkCase make_lq_game(double beta = 0.95, int N = 2, double x0 = 1.0);

/// Stable root of beta z^2 - (1 + (1 + N) beta) z + 1 = 0 (N = 1 is the
/// single-player regulator).
double lq_stable_root(double beta, int N = 1);

/// Names accepted by make_by_name, in table order.
const std::vector<std::string>& names();

/// Default-parameter case; unknown names throw std::out_of_range.
/// `overrides` replaces named parameters (including "x0").
BenchmarkCase make_by_name(const std::string& name,
                           const std::map<std::string, double>& overrides = {});

}  // namespace dmp::bench
