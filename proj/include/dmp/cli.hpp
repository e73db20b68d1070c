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

#include <cstdint>
#include <iosfwd>
#include <map>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "dmp/bench.hpp"
#include "dmp/core.hpp"
#include "dmp/feedback.hpp"
#include "dmp/games.hpp"

namespace dmp::cli {

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum ExitCode { kPass = 0, kError = 1, kFlagged = 2 };

struct Options {
  std::optional<int> T;
  std::optional<std::vector<double>> x0;
  std::optional<double> tol;  // stationarity tolerance
  std::optional<std::string> tail_rule;
  std::string out_dir;  // DMP_OUT_DIR wins over this; "." when both are empty
  bool json = false;
  int threads = 1;
  std::uint64_t seed = 1;
  // --name value pairs: benchmark parameters, or [params] overrides.
  std::map<std::string, double> params;
  bool finite = false;  // plain truncated problem instead of the horizon ladder
  bool amp_probe = false;
  bool sufficiency = false;
  std::string method = "newton";  // game driver: newton | br
};

/// A parsed problem file or a bench:<name> pseudo-file.
struct Problem {
  std::string name;
  std::string kind;  // ocp, euler, game
  std::shared_ptr<const StageProblem> stage;  // ocp and euler (next-state form)
  std::shared_ptr<const EulerProblem> euler;
  std::shared_ptr<const GameProblem> game;
  // Markov strategy and the problem whose controls it sets. For the
  // Brock-Mirman benchmark that is the consumption form, not `stage`.
  std::optional<FeedbackPolicy> policy;
  std::shared_ptr<const StageProblem> policy_problem;
  std::optional<bench::BenchmarkCase> bench;
  VectorXd x0;  // may be empty
  int T = kDefaultHorizon;
  TailRule tail = TailRule::repeat_last;
  std::map<std::string, double> tolerances;
};

/// Sections: [meta] [params] [dims] [dynamics] [reward] [terminal]
/// [controls] [policy] [horizon] [tolerances]; lines are `key = value`,
/// '#' starts a comment.
Problem parse_problem(const std::string& text, const std::map<std::string, double>& overrides = {});
Problem load_problem(const std::string& path, const Options& opts);
/// The [policy] section of `text`, for the controls of p.policy_problem
/// (p.stage when the file carries no policy of its own).
FeedbackPolicy read_policy(const std::string& text, const Problem& p);

std::string format_double(double v);
/// t, x1..xn, u1..um for t = 0..T; the last row carries the tail control.
std::string trajectory_csv(const Trajectory& traj, const Plan& plan);
/// t, lambda1..lambdan for t = 1..count.
std::string adjoints_csv(const AdjointSeq& adj, int count);
/// t, u1..um for t = 0..T-1 (columns named from `first`).
std::string plan_csv(const Plan& plan, int first = 1);
/// Reads the u columns of a plan or trajectory file. A trajectory file
/// (one with x columns) loses its last row, the tail control.
Plan read_plan_csv(const std::string& text, TailRule tail);

int cmd_solve(const std::string& file, const Options& opts, std::ostream& out, std::ostream& err);
/// `plan_file` may be empty (checks the file's policy or the benchmark
/// oracle), a CSV plan, or a text file holding a [policy] section.
int cmd_check(const std::string& file, const std::string& plan_file, const Options& opts,
              std::ostream& out, std::ostream& err);
int cmd_game(const std::string& file, const Options& opts, std::ostream& out, std::ostream& err);
/// Empty filter runs every benchmark.
int cmd_bench(const std::string& filter, const Options& opts, std::ostream& out, std::ostream& err);

}  // namespace dmp::cli
