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
#include <optional>
#include <string>
#include <vector>

#include "dmp/core.hpp"
#include "dmp/mp.hpp"

namespace dmp {

struct IterationLog {
  int iteration = 0;
  double value = 0.0;
  double sup_residual = 0.0;
  double step = 0.0;
};

enum class SweepMethod {
  lbfgs,     // limited-memory quasi-Newton on the MPY residuals
  gradient,  // u <- Proj(u + eta r), eta halved until the index increases
};

struct SweepOptions {
  int max_iters = 5000;
  double step = 1e-2;  // eta for the gradient method
  double stationarity_tol = 1e-6;
  // The sweep keeps going until sup |r_t| drops below this.
  double internal_tol = 1e-11;
  double margin = kInteriorityEps;
  SweepMethod method = SweepMethod::lbfgs;
  int memory = 20;
  // Extra stages appended through the plan's tail rule inside the objective
  // (the tail controls are tied to u_{T-1}). 0 gives the plain finite
  // horizon problem.
  int tail_extension = 0;
  std::function<void(const IterationLog&)> log;
};

struct SolveResult {
  Plan plan;
  ResidualReport report;
  double value = 0.0;  // objective at the returned plan
  int iterations = 0;
  bool converged = false;  // sup |r_t| < stationarity_tol
  std::string message;
  std::vector<double> values;  // objective after each accepted iteration
};

/// Box midpoints along the induced path; an infinite side is replaced by
/// the finite bound -/+ 1, and 0 when both sides are infinite.
Plan default_initial_plan(const StageProblem& problem, const VectorXd& x0, int T);

/// Forward-backward sweep. The residual report uses the adjoint started
/// from lambda_H = dg_T/dx (zero without a terminal reward), H = T +
/// tail_extension; the entry for u_{T-1} accumulates the tail stages.
SolveResult solve_finite_horizon(const StageProblem& problem, const VectorXd& x0, int T,
                                 const std::optional<Plan>& init = std::nullopt,
                                 const SweepOptions& opts = {});

struct HorizonStep {
  int T = 0;
  double early_change = 0.0;  // sup over t <= T_prev/4 against the previous horizon
  int iterations = 0;
  bool converged = false;
};

struct InfiniteHorizonResult {
  SolveResult solve;
  ResidualReport check;  // zero-seeded check with the tail extension
  std::vector<HorizonStep> steps;
  bool stabilized = false;
};

struct InfiniteHorizonOptions {
  SweepOptions sweep;
  std::vector<int> horizons = {50, 100, 200, 400};
  double stabilization_tol = 1e-6;
  bool stop_when_stable = true;  // false: always run to the last horizon
  // tail_extension multiple used for each horizon (extension = k T).
  int extension_factor = 3;
  CheckOptions check;
};

InfiniteHorizonResult solve_infinite_horizon(const StageProblem& problem, const VectorXd& x0,
                                             const InfiniteHorizonOptions& opts = {});

/// Region of plans sampled by the sufficiency probe: lo_t < u_t < hi_t with
/// the same bounds at every stage.
struct PlanRegion {
  int horizon = 0;
  VectorXd lo;
  VectorXd hi;
};

struct SufficiencyOptions {
  int n_chords = 100;
  std::uint64_t seed = 1;
  int threads = 1;
  double slack_tol = -1e-9;
  // Per-stage minorant m_t of the tail when supplied by the user.
  std::optional<std::vector<double>> minorant;
};

struct SufficiencyReport {
  int n_chords = 0;
  int evaluated = 0;
  int skipped = 0;  // domain error or infeasible chord
  std::vector<double> slack;  // per evaluated chord, min over the grid
  double min_slack = 0.0;
  std::string convexity;  // "box" or "unverified"
  std::string minorant;   // "user" or "heuristic"
  std::string verdict;    // CERTIFIED / NOT-CERTIFIED
  bool certified() const { return verdict == "CERTIFIED"; }
};

/// Concavity evidence for the truncated index: random chords between plans
/// in the region, each checked on lambda in {0, .25, .5, .75, 1}.
SufficiencyReport sufficiency_probe(const StageProblem& problem, const VectorXd& x0,
                                    const PlanRegion& region, const SufficiencyOptions& opts = {});

}  // namespace dmp
