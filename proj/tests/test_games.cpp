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

#include <cmath>
#include <vector>

#include "doctest.h"
#include "dmp/bench.hpp"
#include "dmp/games.hpp"

using namespace dmp;

namespace {

VectorXd one(double v) { return VectorXd::Constant(1, v); }

double sup(const std::vector<RowVectorXd>& v) {
  double s = 0.0;
  for (const auto& r : v) s = std::max(s, r.cwiseAbs().maxCoeff());
  return s;
}

}  // namespace

TEST_SUITE("games") {

TEST_CASE("LQ game closed form") {
  const auto c = bench::make_lq_game();
  CHECK(bench::lq_stable_root(0.95, 2) == doctest::Approx(0.2789395).epsilon(1e-7));
  CHECK(c.control(0)(0) == doctest::Approx(-0.3605302).epsilon(1e-7));
  const auto ms = c.oracle_strategy(200);
  const auto reps = nash_residuals(*c.game, ms, c.x0);
  REQUIRE(reps.size() == 2);
  for (const auto& r : reps) {
    CHECK(r.stationarity_sup <= 1e-7);
    CHECK(r.pass());
  }
  const auto l1 = player_adjoint(*c.game, ms, 0, c.x0);
  const auto l2 = player_adjoint(*c.game, ms, 1, c.x0);
  for (int t = 1; t <= l1.horizon(); ++t) CHECK(l1.at(t)(0) == l2.at(t)(0));
}

TEST_CASE("unilateral perturbation") {
  const auto c = bench::make_lq_game();
  auto ms = c.oracle_strategy(200);
  const auto before = nash_residuals(*c.game, ms, c.x0);
  ms[0].controls[0](0) += 0.1;
  const auto after = nash_residuals(*c.game, ms, c.x0);
  CHECK(after[0].stationarity_sup > 1e-3);
  CHECK_FALSE(after[0].pass());
  // Player 2 sees the shared state move.
  CHECK(std::abs(after[1].stationarity[1](0) - before[1].stationarity[1](0)) > 1e-6);
}

TEST_CASE("single-player reduction") {
  const auto g = bench::make_lq_game(0.95, 1);
  const auto s = bench::make_lq();
  CHECK(bench::lq_stable_root(0.95, 1) == doctest::Approx(s.numbers.at("r2")).epsilon(1e-14));
  const int T = 120;
  const Plan plan = s.oracle_plan(T);
  const MultiStrategy ms{plan};
  const auto traj = rollout(*s.problem, plan, s.x0);
  const auto a = player_adjoint(*g.game, ms, 0, g.x0);
  const auto b = adjoint_backward(*s.problem, traj, plan, TerminalMode::zero_seed);
  for (int t = 1; t <= T; ++t) CHECK(a.at(t)(0) == b.at(t)(0));

  Plan rough = Plan::constant(T, one(-0.3));
  const auto ra = nash_residuals(*g.game, {rough}, g.x0);
  const auto rb = check_plan(*s.problem, rough, s.x0);
  for (int t = 0; t < T; ++t) CHECK(ra[0].stationarity[t](0) == rb.stationarity[t](0));

  const auto na = solve_nash_br(*g.game, g.x0, T);
  const auto nb = solve_finite_horizon(*s.problem, s.x0, T);
  for (int t = 0; t < T; ++t) CHECK(na.ms[0].controls[t](0) == nb.plan.controls[t](0));
}

TEST_CASE("zero rewards") {
  GameDefinition d;
  d.control_dims = {1, 1};
  d.dynamics = {"x1 + u1 - u2"};
  d.rewards = {"0", "0"};
  d.bounds = {{"-1", "1"}, {"-1", "1"}};
  const GameProblem g(d);
  const MultiStrategy ms{Plan::constant(30, one(0.2)), Plan::constant(30, one(-0.4))};
  for (int j = 0; j < 2; ++j)
    for (const auto& l : player_adjoint(g, ms, j, one(1.0)).lambda) CHECK(l(0) == 0.0);
}

TEST_CASE("Newton on the LQ game") {
  const auto c = bench::make_lq_game();
  const auto r = solve_nash_newton(*c.game, c.x0, 200);
  CHECK(r.converged);
  CHECK(r.ms[0].controls[0](0) == doctest::Approx(-0.36053).epsilon(1e-4));
  double diff = 0.0, err = 0.0;
  for (int t = 0; t < 200; ++t) {
    diff = std::max(diff, std::abs(r.ms[0].controls[t](0) - r.ms[1].controls[t](0)));
    if (t <= 100) err = std::max(err, std::abs(r.ms[0].controls[t](0) - c.control(t)(0)));
  }
  CHECK(diff <= 1e-9);
  CHECK(err <= 1e-4);
  for (const auto& rep : r.reports) CHECK(rep.pass());
  CHECK(nash_stationarity(*c.game, r.ms, c.x0).cwiseAbs().maxCoeff() <= 1e-11);
}

TEST_CASE("best response on the LQ game is slow and says so") {
  // Each player's reply to a slow shift in the other's plan nearly cancels
  // it, so the sweep map has spectral radius close to one.
  const auto c = bench::make_lq_game();
  NashOptions o;
  o.max_outer = 15;
  const auto r = solve_nash_br(*c.game, c.x0, 60, o);
  CHECK_FALSE(r.converged);
  CHECK(r.iterations == 15);
  CHECK(r.message == "outer iteration limit");
  for (std::size_t i = 1; i < r.trace.size(); ++i) CHECK(r.trace[i] < r.trace[i - 1]);
  CHECK(r.trace.back() > 1e-4);

  // Mixing the sweeps helps but does not change the picture.
  o.anderson_memory = 5;
  const auto m = solve_nash_br(*c.game, c.x0, 60, o);
  CHECK(m.trace.back() < r.trace.back());
}

TEST_CASE("uncoupled players settle after one sweep") {
  GameDefinition d;
  d.state_dim = 2;
  d.control_dims = {1, 1};
  d.params = {{"beta", 0.9}};
  d.dynamics = {"x1 + u1", "x2 + u2"};
  d.rewards = {"-0.5*beta^t*(x1^2 + u1^2)", "-0.5*beta^t*(x2^2 + u2^2)"};
  d.bounds = {{"-5", "5"}, {"-5", "5"}};
  const GameProblem g(d);
  const auto r = solve_nash_br(g, VectorXd::Ones(2), 60);
  CHECK(r.converged);
  REQUIRE(r.trace.size() == 2);  // one sweep, one confirming pass
  CHECK(r.trace[1] < 1e-8);
}

TEST_CASE("game validation") {
  GameDefinition d;
  d.control_dims = {1, 1};
  d.dynamics = {"x1 + u1 + u2"};
  d.rewards = {"-u1^2"};
  CHECK_THROWS(GameProblem{d});
  d.rewards = {"-u1^2", "-u3^2"};
  CHECK_THROWS(GameProblem{d});
  d.control_dims = {};
  d.rewards = {};
  CHECK_THROWS(GameProblem{d});
}

}  // TEST_SUITE
