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

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "dmp/core.hpp"

namespace dmp {

enum class AdjointProvenance { backward_recursion, series };
const char* to_string(AdjointProvenance p);

/// How the backward recursion is started.
///  from_terminal_reward: lambda_T = dg_T/dx(x_T), or zero without a terminal
///    reward. The stationarity residuals are then the exact gradient of the
///    truncated index.
///  zero_seed: lambda_{T+1} = 0 and the recursion runs from t = T, with the
///    stage-T control taken from the plan's tail rule.
enum class TerminalMode { from_terminal_reward, zero_seed };

/// lambda_1..lambda_T (row vectors). at(t) is 1-based.
struct AdjointSeq {
  std::vector<RowVectorXd> lambda;
  AdjointProvenance provenance = AdjointProvenance::backward_recursion;

  int horizon() const { return static_cast<int>(lambda.size()); }
  const RowVectorXd& at(int t) const { return lambda.at(t - 1); }
};

AdjointSeq adjoint_backward(const StageProblem& problem, const Trajectory& traj, const Plan& plan,
                            TerminalMode terminal);

/// Recursion seeded with an arbitrary lambda_{T+1}.
AdjointSeq adjoint_backward(const StageProblem& problem, const Trajectory& traj, const Plan& plan,
                            const RowVectorXd& seed);

/// Same recursion on precomputed stage derivatives d[0..T].
AdjointSeq adjoint_backward(const std::vector<StageDerivatives>& d, const RowVectorXd& seed);

/// K-term partial sum of lambda_t = sum_{k>=t} g_x,k A_{k-1}...A_t.
/// Needs t + K - 1 <= T (stage T uses the tail control).
RowVectorXd adjoint_series(const StageProblem& problem, const Trajectory& traj, const Plan& plan,
                           int t, int K);

/// r_t = g_u,t + lambda_{t+1} f_u,t for t = 0..T-1.
std::vector<RowVectorXd> stationarity_residuals(const StageProblem& problem,
                                                const Trajectory& traj, const Plan& plan,
                                                const AdjointSeq& adj);

/// e_t = lambda_t - (g_x,t + lambda_{t+1} f_x,t) for t = 1..T-1.
std::vector<RowVectorXd> recursion_residuals(const StageProblem& problem, const Trajectory& traj,
                                             const Plan& plan, const AdjointSeq& adj);

/// p_t = lambda_t A_{t-1}...A_h for t = h..horizon, horizon <= adj.horizon().
std::vector<RowVectorXd> transversality_profile(const StageProblem& problem,
                                                const Trajectory& traj, const Plan& plan,
                                                const AdjointSeq& adj, int h);

/// Least-squares fit of log(norm_i) = a + i log(rate).
struct GeometricFit {
  double rate = 0.0;
  double r2 = 0.0;
  int points = 0;
};

/// Fits the last half of the entries within ten decades of the peak. An
/// all-zero sequence gives rate 0 and r2 1; a non-finite entry gives an
/// infinite rate.
GeometricFit fit_profile_decay(const std::vector<double>& norms);

/// Plain fit of log(y) against x. Requires y > 0.
GeometricFit fit_log_linear(const std::vector<double>& x, const std::vector<double>& y);

struct CheckOptions {
  double stationarity_tol = 1e-6;
  double recursion_tol = 1e-9;
  double tc_tol = 1e-6;
  int tc_h = 1;
  // Stages appended through the tail rule before the zero seed; -1 picks
  // 3T. Residuals are still reported for t < T only.
  int tail_extension = -1;
};

struct ResidualReport {
  std::vector<RowVectorXd> stationarity;  // r_0..r_{T-1}
  std::vector<RowVectorXd> recursion;     // e_1..e_{T-1}
  std::vector<RowVectorXd> tc_profile;    // p_h..p_H
  int tc_h = 1;
  int horizon = 0;       // T
  int eval_horizon = 0;  // H = T + extension

  double stationarity_sup = 0.0;
  int stationarity_worst = -1;
  double recursion_sup = 0.0;
  double tc_last_quarter_sup = 0.0;
  GeometricFit tc_fit;

  bool stationarity_pass = true;
  bool recursion_pass = true;
  bool tc_pass = true;

  bool pass() const { return stationarity_pass && recursion_pass && tc_pass; }
};

/// Fills the sups and verdicts from the residual vectors.
void finalize_report(ResidualReport& rep, const CheckOptions& opts);

int resolve_extension(const CheckOptions& opts, int horizon);

/// Full check of an infinite-horizon plan: zero-seeded adjoints on
/// the tail-extended plan.
ResidualReport check_plan(const StageProblem& problem, const Plan& plan, const VectorXd& x0,
                          const CheckOptions& opts = {}, AdjointSeq* adjoints = nullptr);

/// Residual report for a given adjoint sequence (no extension).
ResidualReport residual_report(const StageProblem& problem, const Trajectory& traj,
                               const Plan& plan, const AdjointSeq& adj,
                               const CheckOptions& opts = {});

/// Directional derivative of the index truncated at T along a change y of
/// u_tau, by forward accumulation of the state sensitivity. Includes the
/// terminal reward when present.
double gateaux_differential(const StageProblem& problem, const Plan& plan, const VectorXd& x0,
                            int tau, const VectorXd& y, int T);

/// rho_t = g_x,t A_{t-1}...A_{tau+1} for t = tau+1..tau+count, along the
/// path where u_tau is replaced by u.
using RhoGenerator = std::function<std::vector<RowVectorXd>(const VectorXd& u, int count)>;

RhoGenerator open_loop_rho(const StageProblem& problem, const Plan& plan, const VectorXd& x0,
                           int tau);

struct AmpProbeReport {
  int tau = 0;
  double radius = 0.0;
  int n_samples = 0;
  std::vector<int> K;          // block starts
  std::vector<double> tail_sup;  // S_i = sup_u |sum_{t=K_i}^{K_{i+1}-1} rho_t(u)|
  GeometricFit fit;            // rate per stage
  bool pass = false;
  bool heuristic = true;
};

/// Samples u uniformly in the ball of the given radius around the centre
/// (kept inside the box), sums rho over consecutive K blocks and fits a
/// geometric rate. K_list must be increasing; its last entry closes the last
/// block.
AmpProbeReport amp_probe(const RhoGenerator& rho, const VectorXd& centre, const ControlBox& box,
                         int tau, double radius, int n_samples, const std::vector<int>& K_list,
                         std::uint64_t seed = 1);

AmpProbeReport check_assumption_amp(const StageProblem& problem, const Plan& plan,
                                    const VectorXd& x0, int tau, double radius, int n_samples,
                                    const std::vector<int>& K_list, std::uint64_t seed = 1);

}  // namespace dmp
