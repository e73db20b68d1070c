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

#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "dmp/core.hpp"
#include "dmp/mp.hpp"
#include "dmp/solve.hpp"

namespace dmp {

/// N players share the dynamics. Controls of all players are concatenated:
/// player 1 owns u1..u{m_1}, player 2 the next m_2 coordinates, and so on.
/// Every expression may reference all of them.
struct GameDefinition {
  std::string name;
  int state_dim = 1;
  std::vector<int> control_dims;
  std::vector<std::pair<std::string, double>> params;
  std::vector<std::string> dynamics;
  std::vector<std::string> rewards;  // one per player
  std::vector<std::pair<std::string, std::string>> bounds;  // per concatenated coordinate
};

class GameProblem {
 public:
  explicit GameProblem(GameDefinition def);

  int players() const { return static_cast<int>(def_.control_dims.size()); }
  int state_dim() const { return def_.state_dim; }
  int control_dim(int j) const { return def_.control_dims.at(j); }
  int total_controls() const { return total_; }
  int offset(int j) const { return offsets_.at(j); }
  const GameDefinition& definition() const { return def_; }

  /// The single-agent problem over all controls with player j's reward.
  const ExpressionProblem& joint(int j) const { return *joint_.at(j); }

 private:
  GameDefinition def_;
  int total_ = 0;
  std::vector<int> offsets_;
  std::vector<std::shared_ptr<const ExpressionProblem>> joint_;
};

/// One plan per player, common horizon.
using MultiStrategy = std::vector<Plan>;

/// Player j's optimal control problem with the other players' plans frozen.
class PlayerProblem final : public StageProblem {
 public:
  PlayerProblem(const GameProblem& game, MultiStrategy frozen, int player);

  int state_dim() const override { return game_.state_dim(); }
  int control_dim() const override { return game_.control_dim(j_); }
  VectorXd dynamics(int t, const VectorXd& x, const VectorXd& u) const override;
  double reward(int t, const VectorXd& x, const VectorXd& u) const override;
  StageDerivatives derivatives(int t, const VectorXd& x, const VectorXd& u) const override;
  ControlBox control_box(int t, const VectorXd& x) const override;
  bool state_dependent_box() const override { return game_.joint(j_).state_dependent_box(); }
  std::pair<MatrixXd, MatrixXd> box_jacobian(int t, const VectorXd& x) const override;

  VectorXd assemble(int t, const VectorXd& u) const;

 private:
  const GameProblem& game_;
  MultiStrategy frozen_;
  int j_;
};

Plan joint_plan(const GameProblem& game, const MultiStrategy& ms);
Trajectory game_rollout(const GameProblem& game, const MultiStrategy& ms, const VectorXd& x0);

AdjointSeq player_adjoint(const GameProblem& game, const MultiStrategy& ms, int player,
                          const VectorXd& x0, TerminalMode terminal = TerminalMode::zero_seed);

/// Per-player residual reports (check_plan on each player's problem).
std::vector<ResidualReport> nash_residuals(const GameProblem& game, const MultiStrategy& ms,
                                           const VectorXd& x0, const CheckOptions& opts = {});

struct NashOptions {
  SweepOptions sweep;
  int max_outer = 50;
  double tol = 1e-8;
  // Cycling is declared when the control change has not decreased over
  // this many consecutive outer iterations.
  int cycle_window = 5;
  // Anderson mixing over this many past sweeps; 0 gives plain Gauss-Seidel.
  int anderson_memory = 0;
  CheckOptions check;
};

struct NashResult {
  MultiStrategy ms;
  std::vector<ResidualReport> reports;
  std::vector<double> trace;  // sup control change per outer iteration
  int iterations = 0;
  bool converged = false;
  bool cycling = false;
  std::string message;
};

/// Gauss-Seidel best response: players in ascending order, each solved with
/// solve_finite_horizon against the others' current plans. The sweeps are
/// mixed Anderson-style unless anderson_memory is 0; trace holds the sup
/// change made by each sweep.
NashResult solve_nash_br(const GameProblem& game, const VectorXd& x0, int T,
                         const NashOptions& opts = {},
                         const std::optional<MultiStrategy>& init = std::nullopt);

/// Stacked MPY residuals of all players, t-major in the joint control
/// layout, for the plain finite-horizon index (lambda_T = 0).
VectorXd nash_stationarity(const GameProblem& game, const MultiStrategy& ms, const VectorXd& x0);

struct NashNewtonOptions {
  int max_iters = 50;
  double tol = 1e-11;  // stop when sup |residual| falls below this
  double stationarity_tol = 1e-6;
  double margin = kInteriorityEps;
  double fd_step = 1e-6;
  CheckOptions check;
};

/// Damped Newton on the stacked residuals with a finite-difference
/// Jacobian. Needs control boxes that do not move with the state. trace
/// holds the sup control change of each step.
NashResult solve_nash_newton(const GameProblem& game, const VectorXd& x0, int T,
                             const NashNewtonOptions& opts = {},
                             const std::optional<MultiStrategy>& init = std::nullopt);

}  // namespace dmp
