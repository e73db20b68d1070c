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

#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "dmp/core.hpp"
#include "dmp/mp.hpp"

namespace dmp {

/// Markov strategy u_t = phi_t(x_t). Each control coordinate is an exprlang
/// expression in x, t and parameters; the Jacobian comes from duals.
class FeedbackPolicy {
 public:
  FeedbackPolicy(std::vector<std::string> exprs, std::vector<std::pair<std::string, double>> params,
                 int state_dim);

  /// phi(x) = C x + c.
  static FeedbackPolicy affine(const MatrixXd& C, const VectorXd& c);
  /// phi(x) = d A x^alpha (scalar state and control).
  static FeedbackPolicy power(double d, double A, double alpha);
  /// phi(x) = alpha x (scalar).
  static FeedbackPolicy linear_fraction(double alpha);
  /// phi(x) = u regardless of the state.
  static FeedbackPolicy constant(const VectorXd& u, int state_dim);

  int state_dim() const { return n_; }
  int control_dim() const { return static_cast<int>(exprs_.size()); }
  const std::string& family() const { return family_; }
  const std::vector<std::string>& sources() const { return sources_; }
  const std::vector<std::pair<std::string, double>>& params() const { return params_; }

  VectorXd operator()(int t, const VectorXd& x) const;
  MatrixXd jacobian(int t, const VectorXd& x) const;  // m x n

 private:
  std::string family_ = "expression";
  int n_;
  std::vector<std::string> sources_;
  std::vector<std::pair<std::string, double>> params_;
  std::vector<double> values_;
  std::vector<expr::Expr> exprs_;
};

/// Closed-loop path: states x_0..x_T and the induced plan u_t = phi_t(x_t).
struct MarkovPath {
  Trajectory traj;
  Plan plan;  // horizon T; control_at(T) is phi_T(x_T)
};

MarkovPath markov_path(const StageProblem& problem, const FeedbackPolicy& policy,
                       const VectorXd& x0, int T);

Trajectory markov_rollout(const StageProblem& problem, const FeedbackPolicy& policy,
                          const VectorXd& x0, int T);

/// Closed-loop stage data: the open-loop derivatives plus Phi = dphi/dx.
struct ClosedLoopStage {
  StageDerivatives d;
  MatrixXd phi;  // m x n
  MatrixXd M() const { return d.fx + d.fu * phi; }
  RowVectorXd q() const { return d.gx + d.gu * phi; }
};

std::vector<ClosedLoopStage> closed_loop_linearize(const StageProblem& problem,
                                                   const FeedbackPolicy& policy,
                                                   const MarkovPath& path, int count);

/// lambda_t = [g_x + g_u Phi]_t + lambda_{t+1} [f_x + f_u Phi]_t, seeded with
/// lambda_{T+1} = 0 and run from t = T.
AdjointSeq markov_adjoint(const StageProblem& problem, const FeedbackPolicy& policy,
                          const VectorXd& x0, int T);

AdjointSeq markov_adjoint(const std::vector<ClosedLoopStage>& stages);

/// K-term partial sum of the closed-loop series for lambda_t.
RowVectorXd markov_adjoint_series(const StageProblem& problem, const FeedbackPolicy& policy,
                                  const MarkovPath& path, int t, int K);

/// Residuals along the closed-loop path. stationarity is the MPY form
/// g_u + lambda_{t+1} f_u; recursion is the open-loop MPX form evaluated
/// with the closed-loop adjoint, which equals r_t Phi_t; the profile uses
/// the closed-loop products. Checked with a tail extension like check_plan.
ResidualReport markov_residuals(const StageProblem& problem, const FeedbackPolicy& policy,
                                const VectorXd& x0, int T, const CheckOptions& opts = {},
                                AdjointSeq* adjoints = nullptr);

/// Differential of the index truncated at T when the control at stage tau
/// (and only there) moves by y while later stages keep following phi.
double markov_gateaux_differential(const StageProblem& problem, const FeedbackPolicy& policy,
                                   const VectorXd& x0, int tau, const VectorXd& y, int T);

/// Index truncated at T with u_tau = phi_tau(x_tau) + y.
double markov_value(const StageProblem& problem, const FeedbackPolicy& policy,
                    const VectorXd& x0, int T, int tau = -1, const VectorXd& y = {});

RhoGenerator closed_loop_rho(const StageProblem& problem, const FeedbackPolicy& policy,
                             const VectorXd& x0, int tau);

AmpProbeReport check_assumption_amp_ms(const StageProblem& problem, const FeedbackPolicy& policy,
                                       const VectorXd& x0, int tau, double radius, int n_samples,
                                       const std::vector<int>& K_list, std::uint64_t seed = 1);

/// Rewards g_t(x_t, x_{t+1}); in expressions the next state is written
/// u1..un. The control set bounds the next state.
class EulerProblem {
 public:
  /// `def.dynamics` is ignored and replaced by f(x, u) = u.
  explicit EulerProblem(ProblemDefinition def);

  int state_dim() const { return problem_->state_dim(); }
  const StageProblem& as_stage_problem() const { return *problem_; }
  std::shared_ptr<const ExpressionProblem> stage_problem() const { return problem_; }

  /// (dg/dx, dg/dy) at (x, y).
  std::pair<RowVectorXd, RowVectorXd> gradients(int t, const VectorXd& x, const VectorXd& y) const;

 private:
  std::shared_ptr<const ExpressionProblem> problem_;
};

struct EulerReport {
  std::vector<RowVectorXd> ee;          // ee_1..ee_{T-1}
  std::vector<RowVectorXd> tc_profile;  // dg_{t-1}/dy Phi_{t-1}...Phi_h, t = h..T
  double ee_sup = 0.0;
  int ee_worst = -1;  // stage index t of the worst entry
  GeometricFit tc_fit;
  double tc_last_quarter_sup = 0.0;
  bool ee_pass = true;
  bool tc_pass = true;
  bool pass() const { return ee_pass && tc_pass; }
};

/// Euler residuals along a state path x_0..x_T. policy_jacobians[s] is
/// dphi_s/dx at x_s for s < T.
EulerReport euler_residuals(const EulerProblem& problem, const Trajectory& traj,
                            const std::vector<MatrixXd>& policy_jacobians, int h,
                            double ee_tol = 1e-6, double tc_tol = 1e-6);

/// Euler residuals along the closed-loop path of a policy (with tail
/// extension as in markov_residuals; ee reported for t < T).
EulerReport euler_residuals(const EulerProblem& problem, const FeedbackPolicy& policy,
                            const VectorXd& x0, int T, const CheckOptions& opts = {});

struct LinearEulerSolution {
  double root = 0.0;
  double other_root = 0.0;
  double ratio = 0.0;  // x_{t+1} = ratio x_t
};

class RootSelectionError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Roots of b z^2 - mid z + a = 0 (characteristic equation of
/// b x_{t+1} - mid x_t + a x_{t-1} = 0); returns the unique root accepted by
/// `stable`.
LinearEulerSolution solve_linear_euler(double b_coef, double mid_coef, double a_coef,
                                       const std::function<bool(double)>& stable);

}  // namespace dmp
