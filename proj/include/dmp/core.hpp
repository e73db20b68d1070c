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

#include <Eigen/Dense>

#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "dmp/exprlang.hpp"

namespace dmp {

using Eigen::MatrixXd;
using Eigen::RowVectorXd;
using Eigen::VectorXd;

inline constexpr double kInteriorityEps = 1e-9;
inline constexpr int kDefaultHorizon = 200;

/// Open box lo < u < hi; bounds may be ±infinity.
struct ControlBox {
  VectorXd lo;
  VectorXd hi;
};

/// First-order data of one stage at (x_t, u_t). Gradients are row vectors.
struct StageDerivatives {
  MatrixXd fx;     // n x n
  MatrixXd fu;     // n x m
  RowVectorXd gx;  // 1 x n
  RowVectorXd gu;  // 1 x m
};

/// The control model: dynamics f_t, stage rewards g_t, control sets and an
/// optional terminal reward g_T. Implementations are immutable and safe to
/// share between threads.
class StageProblem {
 public:
  virtual ~StageProblem() = default;

  virtual int state_dim() const = 0;
  virtual int control_dim() const = 0;

  virtual VectorXd dynamics(int t, const VectorXd& x, const VectorXd& u) const = 0;
  virtual double reward(int t, const VectorXd& x, const VectorXd& u) const = 0;
  virtual StageDerivatives derivatives(int t, const VectorXd& x, const VectorXd& u) const = 0;

  virtual bool has_terminal_reward() const { return false; }
  virtual double terminal_reward(const VectorXd& x) const;
  virtual RowVectorXd terminal_gradient(const VectorXd& x) const;

  virtual ControlBox control_box(int t, const VectorXd& x) const = 0;
  virtual bool state_dependent_box() const { return false; }
  // (d lo/dx, d hi/dx), each m x n. Zero unless the box moves with x.
  virtual std::pair<MatrixXd, MatrixXd> box_jacobian(int t, const VectorXd& x) const;
};

/// Textual definition of a problem; every function is an exprlang string.
struct ProblemDefinition {
  std::string name;
  int state_dim = 1;
  int control_dim = 1;
  std::vector<std::pair<std::string, double>> params;
  std::vector<std::string> dynamics;  // one per state coordinate
  std::string reward;
  std::optional<std::string> terminal;  // g_T(x)
  // Per control coordinate (lo, hi). "-inf" / "inf" are accepted; other
  // bounds are expressions in x, t and parameters.
  std::vector<std::pair<std::string, std::string>> bounds;
};

/// StageProblem backed by parsed expressions; derivatives come from dual
/// numbers.
class ExpressionProblem final : public StageProblem {
 public:
  explicit ExpressionProblem(ProblemDefinition def);

  int state_dim() const override { return n_; }
  int control_dim() const override { return m_; }

  VectorXd dynamics(int t, const VectorXd& x, const VectorXd& u) const override;
  double reward(int t, const VectorXd& x, const VectorXd& u) const override;
  StageDerivatives derivatives(int t, const VectorXd& x, const VectorXd& u) const override;

  bool has_terminal_reward() const override { return !terminal_.empty(); }
  double terminal_reward(const VectorXd& x) const override;
  RowVectorXd terminal_gradient(const VectorXd& x) const override;

  ControlBox control_box(int t, const VectorXd& x) const override;
  bool state_dependent_box() const override { return state_box_; }
  std::pair<MatrixXd, MatrixXd> box_jacobian(int t, const VectorXd& x) const override;

  const ProblemDefinition& definition() const { return def_; }
  const std::vector<double>& param_values() const { return values_; }

 private:
  struct Bound {
    std::optional<expr::Expr> e;  // empty = infinite
    double fixed = 0.0;
  };

  double bound_value(const Bound& b, int t, const VectorXd& x) const;
  RowVectorXd bound_gradient(const Bound& b, int t, const VectorXd& x) const;

  ProblemDefinition def_;
  int n_;
  int m_;
  std::vector<double> values_;
  std::vector<expr::Expr> dynamics_;
  expr::Expr reward_;
  expr::Expr terminal_;
  std::vector<Bound> lo_;
  std::vector<Bound> hi_;
  bool state_box_ = false;
};

/// Parses a bound string: "inf", "-inf", "+inf" or an expression.
std::optional<expr::Expr> parse_bound(const std::string& text, const expr::Signature& sig,
                                      double& fixed);

enum class TailRule { repeat_last, zero, steady_state };

const char* to_string(TailRule rule);
TailRule tail_rule_from_string(const std::string& s);

/// Finite truncation u_0..u_{T-1} of an open-loop strategy, continued past
/// the horizon by `tail`.
struct Plan {
  std::vector<VectorXd> controls;
  TailRule tail = TailRule::repeat_last;
  VectorXd steady_state;

  int horizon() const { return static_cast<int>(controls.size()); }
  VectorXd control_at(int t) const;
  /// The same strategy truncated at a longer horizon.
  Plan extended(int horizon) const;

  static Plan constant(int horizon, const VectorXd& u, TailRule tail = TailRule::repeat_last);
};

struct Trajectory {
  std::vector<VectorXd> states;  // x_0..x_T
  int horizon() const { return static_cast<int>(states.size()) - 1; }
};

class RolloutError : public std::runtime_error {
 public:
  RolloutError(const std::string& what, int stage)
      : std::runtime_error(what), stage_(stage) {}
  int stage() const { return stage_; }

 private:
  int stage_;
};

/// x_{t+1} = f_t(x_t, u_t), t = 0..T-1.
Trajectory rollout(const StageProblem& problem, const Plan& plan, const VectorXd& x0);

struct RewardSummary {
  double value = 0.0;
  // Geometric extrapolation of the discarded tail; a heuristic estimate.
  double tail_bound = 0.0;
  bool tail_flag = false;  // tail_bound > tail_tol
};

/// Sum of g_t over t < T plus g_T(x_T) when a terminal reward exists.
RewardSummary total_reward(const StageProblem& problem, const Plan& plan, const VectorXd& x0,
                           double tail_tol = 1e-6);

/// Same sum with an explicit trajectory; throws RolloutError on domain
/// errors, naming the stage.
double truncated_value(const StageProblem& problem, const Plan& plan, const Trajectory& traj);

struct FeasibilityReport {
  std::vector<double> margins;  // per stage: min_i min(u_i - lo_i, hi_i - u_i)
  double min_margin = 0.0;
  int worst_stage = -1;
  double eps = kInteriorityEps;
  bool pass = true;
};

FeasibilityReport feasibility_check(const StageProblem& problem, const Plan& plan,
                                    const VectorXd& x0, double eps = kInteriorityEps);

/// Overload for problems whose control sets do not depend on the state.
FeasibilityReport feasibility_check(const StageProblem& problem, const Plan& plan,
                                    double eps = kInteriorityEps);

/// Stage derivatives along a trajectory for t = 0..count-1, using the
/// plan's tail for stages beyond its horizon.
std::vector<StageDerivatives> linearize(const StageProblem& problem, const Plan& plan,
                                        const Trajectory& traj, int count);

}  // namespace dmp
