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
#include "dmp/feedback.hpp"

using namespace dmp;

namespace {

VectorXd one(double v) { return VectorXd::Constant(1, v); }

FeedbackPolicy bm_policy(double d) { return FeedbackPolicy::power(d, 1.0, 0.3); }

std::vector<MatrixXd> jacobians(const FeedbackPolicy& phi, const Trajectory& traj) {
  std::vector<MatrixXd> out;
  for (int t = 0; t < traj.horizon(); ++t) out.push_back(phi.jacobian(t, traj.states[t]));
  return out;
}

}  // namespace

TEST_SUITE("feedback") {

TEST_CASE("policy families") {
  const auto p = FeedbackPolicy::power(0.715, 2.0, 0.3);
  CHECK(p(0, one(3.0))(0) == doctest::Approx(0.715 * 2.0 * std::pow(3.0, 0.3)).epsilon(1e-14));
  CHECK(p.jacobian(0, one(3.0))(0, 0) == doctest::Approx(0.715 * 2.0 * 0.3 * std::pow(3.0, -0.7)).epsilon(1e-14));
  MatrixXd C(2, 2);
  C << 1, 2, 3, 4;
  const auto a = FeedbackPolicy::affine(C, VectorXd::Ones(2));
  CHECK(a.jacobian(5, VectorXd::Ones(2)).isApprox(C));
  CHECK(a(0, VectorXd::Ones(2)).isApprox(VectorXd::Constant(2, 1.0) + C * VectorXd::Ones(2)));
  const auto k = FeedbackPolicy::constant(one(0.4), 1);
  CHECK(k.jacobian(0, one(2.0))(0, 0) == 0.0);
  CHECK_THROWS(FeedbackPolicy({"u1"}, {}, 1));
}

TEST_CASE("markov rollout") {
  ProblemDefinition d;
  d.dynamics = {"x1 + u1"};
  d.reward = "0";
  const ExpressionProblem acc(d);
  const auto traj = markov_rollout(acc, FeedbackPolicy::constant(one(0.0), 1), one(2.5), 20);
  for (const auto& x : traj.states) CHECK(x(0) == 2.5);

  const auto bm = bench::make_brock_mirman();
  CHECK(bm.numbers.at("d") == doctest::Approx(0.715).epsilon(1e-14));
  CHECK(markov_rollout(*bm.problem, *bm.policy, bm.x0, 3).states[1](0) == doctest::Approx(0.285).epsilon(1e-14));

  const auto ak = bench::make_ak();
  CHECK(ak.numbers.at("b") == doctest::Approx(1.043708).epsilon(1e-6));
  CHECK(markov_rollout(*ak.problem, *ak.policy, ak.x0, 3).states[1](0) == doctest::Approx(0.958123).epsilon(1e-6));
}

TEST_CASE("constant policy collapses to the open-loop adjoint") {
  for (const char* name : {"lq", "consumption_investment", "brock_mirman"}) {
    CAPTURE(name);
    const auto c = bench::make_by_name(name);
    const VectorXd u = name == std::string("brock_mirman") ? one(0.05) : c.control(3);
    const auto phi = FeedbackPolicy::constant(u, 1);
    const int T = 80;
    const auto closed = markov_adjoint(*c.problem, phi, c.x0, T);
    const auto path = markov_path(*c.problem, phi, c.x0, T);
    const auto open = adjoint_backward(*c.problem, path.traj, path.plan, TerminalMode::zero_seed);
    REQUIRE(closed.horizon() == open.horizon());
    for (int t = 1; t <= T; ++t) CHECK(closed.at(t)(0) == open.at(t)(0));
  }
}

TEST_CASE("Brock-Mirman closed form") {
  const auto c = bench::make_brock_mirman();
  const int T = 200;
  AdjointSeq adj;
  const auto rep = markov_residuals(*c.problem, *c.policy, c.x0, T, {}, &adj);
  for (int t = 1; t <= 100; ++t) CHECK(adj.at(t)(0) == doctest::Approx(c.adjoint(t)(0)).epsilon(1e-10));
  double s = 0.0;
  for (int t = 0; t <= 100; ++t) s = std::max(s, std::abs(rep.stationarity[t](0)));
  CHECK(s <= 1e-7);
  CHECK(rep.pass());

  // Series form of the closed-loop adjoint.
  const auto path = markov_path(*c.problem, *c.policy, c.x0, T);
  CHECK(markov_adjoint_series(*c.problem, *c.policy, path, 2, 150)(0) == doctest::Approx(adj.at(2)(0)).epsilon(1e-8));
}

TEST_CASE("Brock-Mirman wrong savings rate") {
  const auto c = bench::make_brock_mirman();
  CHECK(std::abs(markov_residuals(*c.problem, bm_policy(0.5), c.x0, 200).stationarity_sup) > 1e-2);
  for (double d : {0.3, 0.5, 0.6, 0.7, 0.71, 0.72, 0.75, 0.8, 0.9}) {
    CAPTURE(d);
    const auto rep = markov_residuals(*c.problem, bm_policy(d), c.x0, 200);
    CHECK(std::abs(rep.stationarity[1](0)) >= std::abs(d - 0.715) / 10);
    CHECK_FALSE(rep.pass());
  }
}

TEST_CASE("zero reward, any policy") {
  ProblemDefinition d;
  d.dynamics = {"0.5*x1 + u1"};
  d.reward = "0";
  const ExpressionProblem p(d);
  const auto phi = FeedbackPolicy::affine(MatrixXd::Constant(1, 1, 0.3), one(0.1));
  const auto rep = markov_residuals(p, phi, one(1.0), 50);
  CHECK(rep.stationarity_sup == 0.0);
  CHECK(rep.recursion_sup == 0.0);
  for (const auto& l : markov_adjoint(p, phi, one(1.0), 50).lambda) CHECK(l(0) == 0.0);
}

TEST_CASE("Euler residuals") {
  const auto c = bench::make_ak();
  const int T = 200;
  const auto rep = euler_residuals(*c.euler, *c.policy, c.x0, T);
  double s = 0.0;
  for (int t = 1; t <= 100; ++t) s = std::max(s, std::abs(rep.ee[t - 1](0)));
  CHECK(s <= 1e-8);
  CHECK(rep.pass());

  const auto wrong = FeedbackPolicy::linear_fraction(0.9 / c.numbers.at("b"));
  const auto bad = euler_residuals(*c.euler, wrong, c.x0, T);
  CHECK(std::abs(bad.ee[0](0)) > 1e-3);
  CHECK_FALSE(bad.ee_pass);

  // g(x, y) = -(y - x)^2 on a constant path.
  ProblemDefinition d;
  d.reward = "-(u1 - x1)^2";
  const EulerProblem flat(d);
  Trajectory traj;
  traj.states.assign(12, one(0.7));
  const auto r = euler_residuals(flat, traj, std::vector<MatrixXd>(11, MatrixXd::Identity(1, 1)), 1);
  for (const auto& e : r.ee) CHECK(e(0) == 0.0);
}

TEST_CASE("Euler form is the f(x, u) = u case") {
  for (const char* name : {"ak", "brock_mirman"}) {
    CAPTURE(name);
    const auto c = bench::make_by_name(name);
    const auto& p = c.euler->as_stage_problem();
    // The Markov law of the capital choice.
    const FeedbackPolicy k = name == std::string("ak")
                                 ? *c.policy
                                 : FeedbackPolicy({"0.285*x1^0.3"}, {}, 1);
    for (double scale : {1.0, 0.97}) {
      const FeedbackPolicy phi = scale == 1.0 ? k : FeedbackPolicy({"0.97*(" + k.sources()[0] + ")"}, k.params(), 1);
      const int T = 100;
      CheckOptions o;
      o.tail_extension = 50;
      const auto m = markov_residuals(p, phi, c.x0, T, o);
      const auto e = euler_residuals(*c.euler, phi, c.x0, T, o);
      const auto path = markov_path(p, phi, c.x0, T + 1);
      // r_{t-1} = ee_t + r_t Phi_t
      for (int t = 1; t < T; ++t) {
        const double phi_t = phi.jacobian(t, path.traj.states[t])(0, 0);
        const double lhs = m.stationarity[t - 1](0);
        const double rhs = e.ee[t - 1](0) + m.stationarity[t](0) * phi_t;
        CHECK(std::abs(lhs - rhs) <= 1e-12 * (1.0 + std::abs(lhs)));
      }
      // Open-loop MP on the induced plan: r_{t-1} = ee_t exactly.
      const auto traj = rollout(p, path.plan, c.x0);
      const auto adj = adjoint_backward(p, traj, path.plan, TerminalMode::zero_seed);
      const auto r = stationarity_residuals(p, traj, path.plan, adj);
      for (int t = 1; t < T; ++t) CHECK(r[t - 1](0) == doctest::Approx(e.ee[t - 1](0)).epsilon(1e-13));
    }
  }
}

TEST_CASE("Euler tc profile uses the policy products") {
  const auto c = bench::make_ak();
  const auto traj = markov_rollout(*c.problem, *c.policy, c.x0, 60);
  const auto rep = euler_residuals(*c.euler, traj, jacobians(*c.policy, traj), 1);
  CHECK(rep.tc_fit.rate < 1.0);
  CHECK(rep.tc_profile.size() == 60);
}

TEST_CASE("markov Gateaux differential") {
  for (const char* name : {"brock_mirman", "ak"}) {
    CAPTURE(name);
    const auto c = bench::make_by_name(name);
    for (double scale : {1.0, 0.9}) {
      const FeedbackPolicy phi({std::to_string(scale) + "*(" + c.policy->sources()[0] + ")"}, c.policy->params(), 1);
      const int T = 400;
      for (int tau : {0, 3, 20}) {
        const double y = 1e-3;
        const double eps = 1e-6;
        const double fd = (markov_value(*c.problem, phi, c.x0, T, tau, one(eps * y)) -
                           markov_value(*c.problem, phi, c.x0, T, tau, one(-eps * y))) / (2 * eps);
        const double v = markov_value(*c.problem, phi, c.x0, T);
        const double g = markov_gateaux_differential(*c.problem, phi, c.x0, tau, one(y), T);
        CHECK(std::abs(g - fd) <= 1e-6 * (1 + std::abs(v)));
        if (scale == 1.0) CHECK(std::abs(g) <= 1e-7);
      }
    }
  }
}

TEST_CASE("closed-loop AMP probe") {
  const auto c = bench::make_brock_mirman();
  std::vector<int> K;
  for (int k = 10; k <= 150; k += 10) K.push_back(k);
  const auto r = check_assumption_amp_ms(*c.problem, *c.policy, c.x0, 1, 1e-3, 20, K);
  CHECK(r.pass);
  CHECK(r.fit.rate < 1.0);
}

TEST_CASE("linear Euler root selection") {
  const auto lq = solve_linear_euler(0.95, 2.9, 1.0, [](double z) { return std::abs(0.95 * z) < 1.0; });
  CHECK(lq.root == doctest::Approx(0.3962679).epsilon(1e-7));
  CHECK(lq.other_root * 0.95 == doctest::Approx(2.5235).epsilon(1e-4));
  CHECK(lq.ratio == lq.root);

  const auto ak = bench::make_ak();
  const double b = ak.numbers.at("b");
  const double a = 1.02;
  // Both roots 1/b and a satisfy |beta z| < 1 here; only 1/b leaves
  // positive consumption a x - x'.
  CHECK_THROWS_AS(solve_linear_euler(b, 1.0 + a * b, a, [](double z) { return std::abs(0.9 * z) < 1.0; }),
                  RootSelectionError);
  const auto s = solve_linear_euler(b, 1.0 + a * b, a, [a](double z) { return z > 0.0 && z < a - 1e-9; });
  CHECK(s.ratio == doctest::Approx(0.958123).epsilon(1e-6));
  CHECK(s.other_root == doctest::Approx(a).epsilon(1e-12));

  CHECK_THROWS_AS(solve_linear_euler(1.0, 0.0, 1.0, [](double) { return true; }), RootSelectionError);
  CHECK_THROWS_AS(solve_linear_euler(1.0, -2.0, 1.0, [](double z) { return std::abs(z) < 1.0; }), RootSelectionError);
}

}  // TEST_SUITE
