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
#include <limits>

#include "doctest.h"
#include "dmp/core.hpp"

using namespace dmp;

namespace {

const double kR2 = 0.3962678656008478;  // stable root of 0.95 z^2 - 2.9 z + 1

ExpressionProblem lq() {
  ProblemDefinition d;
  d.name = "lq";
  d.params = {{"beta", 0.95}};
  d.dynamics = {"x1 + u1"};
  d.reward = "-0.5*beta^t*(x1^2 + u1^2)";
  return ExpressionProblem(d);
}

ExpressionProblem consumption() {
  ProblemDefinition d;
  d.name = "consumption";
  d.params = {{"beta", 0.95}, {"gamma", 0.5}, {"r", 1.05}};
  d.dynamics = {"r*(1-u1)*x1"};
  d.reward = "beta^t*(x1*u1)^(1-gamma)";
  d.bounds = {{"0", "1"}};
  return ExpressionProblem(d);
}

Plan lq_optimum(int T) {
  Plan p;
  for (int t = 0; t < T; ++t) p.controls.push_back(VectorXd::Constant(1, (kR2 - 1.0) * std::pow(kR2, t)));
  return p;
}

VectorXd one(double v) { return VectorXd::Constant(1, v); }

}  // namespace

TEST_SUITE("core") {

TEST_CASE("rollout examples") {
  const auto p = lq();
  auto traj = rollout(p, lq_optimum(10), one(1.0));
  CHECK(traj.states[1](0) == doctest::Approx(kR2).epsilon(1e-14));

  traj = rollout(p, Plan::constant(20, one(0.0)), one(1.7));
  for (const auto& x : traj.states) CHECK(x(0) == 1.7);

  const auto c = consumption();
  traj = rollout(c, Plan::constant(30, one(0.052375)), one(1.0));
  for (int t = 0; t <= 30; ++t)
    CHECK(traj.states[t](0) == doctest::Approx(std::pow(0.99500625, t)).epsilon(1e-13));
}

TEST_CASE("rollout matches the dynamics to a few ulp and is deterministic") {
  const auto c = consumption();
  const Plan plan = Plan::constant(50, one(0.2));
  const auto a = rollout(c, plan, one(3.0));
  const auto b = rollout(c, plan, one(3.0));
  for (int t = 0; t < 50; ++t) {
    const double next = c.dynamics(t, a.states[t], plan.controls[t])(0);
    CHECK(std::abs(a.states[t + 1](0) - next) <= 4 * std::numeric_limits<double>::epsilon() * std::abs(next));
    CHECK(a.states[t](0) == b.states[t](0));
  }
}

TEST_CASE("divergent rollout names the stage") {
  ProblemDefinition d;
  d.dynamics = {"x1*x1*1e100"};
  d.reward = "0";
  ExpressionProblem p(d);
  try {
    rollout(p, Plan::constant(10, one(0.0)), one(10.0));
    FAIL("expected divergence");
  } catch (const RolloutError& e) {
    CHECK(e.stage() == 3);  // x_3 is the first non-finite state
  }
}

TEST_CASE("total reward") {
  ProblemDefinition d;
  d.dynamics = {"x1 + u1"};
  d.reward = "0";
  auto zero = total_reward(ExpressionProblem(d), Plan::constant(40, one(0.3)), one(1.0));
  CHECK(zero.value == 0.0);
  CHECK(zero.tail_bound == 0.0);
  CHECK_FALSE(zero.tail_flag);

  const double beta = 0.95;
  const double expected = -0.5 * (1.0 + (kR2 - 1.0) * (kR2 - 1.0)) / (1.0 - beta * kR2 * kR2);
  const auto v = total_reward(lq(), lq_optimum(200), one(1.0));
  CHECK(v.value == doctest::Approx(expected).epsilon(1e-12));
  CHECK(v.value == doctest::Approx(-0.801866067199576).epsilon(1e-12));
  CHECK(v.tail_bound < 1e-12);

  Plan bad = Plan::constant(10, one(0.3));
  bad.controls[4] = one(0.0);
  ProblemDefinition logd;
  logd.dynamics = {"x1"};
  logd.reward = "ln(u1)";
  try {
    total_reward(ExpressionProblem(logd), bad, one(1.0));
    FAIL("expected a domain error");
  } catch (const RolloutError& e) {
    CHECK(e.stage() == 4);
  }
}

TEST_CASE("extending through the tail stays within the reported bound") {
  const auto c = consumption();
  const Plan plan = Plan::constant(100, one(0.052375));
  const auto a = total_reward(c, plan, one(1.0));
  const auto b = total_reward(c, plan.extended(400), one(1.0));
  CHECK(a.tail_flag);
  CHECK(std::abs(b.value - a.value) <= a.tail_bound);

  const auto l = lq();
  const auto la = total_reward(l, lq_optimum(30), one(1.0));
  const auto lb = total_reward(l, lq_optimum(30).extended(90), one(1.0));
  CHECK(std::abs(lb.value - la.value) <= la.tail_bound);
}

TEST_CASE("feasibility examples") {
  const auto c = consumption();
  auto rep = feasibility_check(c, Plan::constant(3, one(0.5)));
  CHECK(rep.min_margin == 0.5);
  CHECK(rep.pass);
  rep = feasibility_check(c, Plan::constant(3, one(1e-12)));
  CHECK(rep.min_margin == 1e-12);
  CHECK_FALSE(rep.pass);
  rep = feasibility_check(c, Plan::constant(3, one(0.052375)));
  CHECK(rep.min_margin == doctest::Approx(0.052375));
  CHECK(rep.pass);
}

TEST_CASE("state dependent box is checked along the path") {
  ProblemDefinition d;
  d.params = {{"A", 1.0}, {"alpha", 0.3}};
  d.dynamics = {"A*x1^alpha - u1"};
  d.reward = "ln(u1)";
  d.bounds = {{"0", "A*x1^alpha"}};
  ExpressionProblem p(d);
  CHECK(p.state_dependent_box());
  auto rep = feasibility_check(p, Plan::constant(5, one(0.5)), one(1.0));
  CHECK(rep.pass);
  rep = feasibility_check(p, Plan::constant(5, one(1.0)), one(1.0));
  CHECK_FALSE(rep.pass);
  CHECK(rep.margins[0] == 0.0);
  CHECK(rep.margins[1] == -1.0);
  CHECK(std::isinf(rep.margins[2]));  // x_2 < 0 leaves the domain
}

TEST_CASE("problem validation") {
  ProblemDefinition d;
  d.dynamics = {"x1", "x2"};
  d.reward = "0";
  CHECK_THROWS(ExpressionProblem{d});
  d.state_dim = 2;
  d.bounds = {{"1", "0"}};
  CHECK_THROWS(ExpressionProblem{d});
  d.bounds = {{"-inf", "inf"}};
  CHECK_NOTHROW(ExpressionProblem{d});
}

TEST_CASE("derivatives of the expression problem") {
  const auto c = consumption();
  const auto d = c.derivatives(0, one(1.0), one(0.5));
  CHECK(d.fx(0, 0) == doctest::Approx(0.525));
  CHECK(d.fu(0, 0) == doctest::Approx(-1.05));
  CHECK(d.gu(0) == doctest::Approx(0.5 * std::pow(0.5, -0.5)));
}

TEST_CASE("tail rules") {
  Plan p = Plan::constant(2, one(0.4));
  CHECK(p.control_at(5)(0) == 0.4);
  p.tail = TailRule::zero;
  CHECK(p.control_at(5)(0) == 0.0);
  p.tail = TailRule::steady_state;
  p.steady_state = one(0.1);
  CHECK(p.control_at(5)(0) == 0.1);
  CHECK(tail_rule_from_string("repeat_last") == TailRule::repeat_last);
  CHECK_THROWS(tail_rule_from_string("bogus"));
}

TEST_CASE("box Jacobian") {
  ProblemDefinition d;
  d.params = {{"A", 2.0}};
  d.dynamics = {"A*x1^0.5 - u1"};
  d.reward = "ln(u1)";
  d.bounds = {{"0", "A*x1^0.5"}};
  const ExpressionProblem p(d);
  const auto [lo, hi] = p.box_jacobian(0, one(4.0));
  CHECK(lo(0, 0) == 0.0);
  CHECK(hi(0, 0) == doctest::Approx(0.5).epsilon(1e-14));
  const auto [l2, h2] = lq().box_jacobian(0, one(4.0));
  CHECK(l2.size() == 1);
  CHECK(h2(0, 0) == 0.0);
}

}
