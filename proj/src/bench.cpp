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

#include "dmp/bench.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <stdexcept>

namespace dmp::bench {

namespace {

VectorXd scalar(double v) { return VectorXd::Constant(1, v); }
RowVectorXd row(double v) { return RowVectorXd::Constant(1, v); }

bool open_unit(double v) { return v > 0.0 && v < 1.0; }

void require(bool ok, const std::string& what) {
  if (!ok) throw InvalidParameters(what);
}

}  // namespace

const char* to_string(Kind k) {
  switch (k) {
    case Kind::open_loop:
      return "open_loop";
    case Kind::markov:
      return "markov";
    case Kind::euler:
      return "euler";
    case Kind::game:
      return "game";
  }
  return "?";
}

Plan BenchmarkCase::oracle_plan(int T) const {
  Plan p;
  for (int t = 0; t < T; ++t) p.controls.push_back(control(t));
  p.tail = TailRule::repeat_last;
  p.steady_state = p.controls.empty() ? VectorXd() : p.controls.back();
  return p;
}

MultiStrategy BenchmarkCase::oracle_strategy(int T) const {
  if (!game) throw std::logic_error("oracle_strategy needs a game case");
  MultiStrategy ms(game->players());
  for (int t = 0; t < T; ++t) {
    const VectorXd u = control(t);
    for (int k = 0; k < game->players(); ++k)
      ms[k].controls.push_back(u.segment(game->offset(k), game->control_dim(k)));
  }
  return ms;
}

double lq_stable_root(double beta, int N) {
  const auto sol = solve_linear_euler(beta, 1.0 + (1.0 + N) * beta, 1.0,
                                      [beta](double z) { return std::abs(beta * z) < 1.0; });
  return sol.root;
}

BenchmarkCase make_consumption_investment(double beta, double gamma, double r, double x0) {
  require(open_unit(beta), "beta must lie in (0,1)");
  require(open_unit(gamma), "gamma must lie in (0,1)");
  require(r > 0.0, "r must be positive");
  require(x0 > 0.0, "x0 must be positive");
  const double growth = std::pow(r * beta, 1.0 / gamma);
  require(growth < r, "need (r beta)^(1/gamma) < r");

  BenchmarkCase c;
  c.name = "consumption_investment";
  c.kind = Kind::open_loop;
  c.params = {{"beta", beta}, {"gamma", gamma}, {"r", r}};
  c.x0 = scalar(x0);
  ProblemDefinition d;
  d.name = c.name;
  d.params = c.params;
  d.dynamics = {"r*(1-u1)*x1"};
  d.reward = "beta^t*(x1*u1)^(1-gamma)";
  d.bounds = {{"0", "1"}};
  c.problem = std::make_shared<const ExpressionProblem>(d);

  const double u_hat = 1.0 - growth / r;
  c.control = [u_hat](int) { return scalar(u_hat); };
  c.state = [x0, growth](int t) { return scalar(x0 * std::pow(growth, t)); };
  c.adjoint = [=](int t) {
    const double x = x0 * std::pow(growth, t);
    return row(std::pow(beta, t) * (1.0 - gamma) * std::pow(x * u_hat, -gamma));
  };
  c.numbers = {{"u_hat", u_hat},
               {"state_growth", growth},
               {"profile_rate", growth / r},
               {"amp_rate", beta * std::pow(r, 1.0 - gamma)}};
  c.notes = {{"objective", "maximise"}};
  return c;
}

BenchmarkCase make_lq(double beta, double x0) {
  require(open_unit(beta), "beta must lie in (0,1)");
  require(std::isfinite(x0), "x0 must be finite");
  BenchmarkCase c;
  c.name = "lq";
  c.kind = Kind::open_loop;
  c.params = {{"beta", beta}};
  c.x0 = scalar(x0);
  ProblemDefinition d;
  d.name = c.name;
  d.params = c.params;
  d.dynamics = {"x1 + u1"};
  d.reward = "-0.5*beta^t*(x1^2 + u1^2)";
  c.problem = std::make_shared<const ExpressionProblem>(d);

  const auto sol = solve_linear_euler(beta, 1.0 + 2.0 * beta, 1.0,
                                      [beta](double z) { return std::abs(beta * z) < 1.0; });
  const double r2 = sol.root, r1 = sol.other_root;
  c.control = [=](int t) { return scalar((r2 - 1.0) * std::pow(r2, t) * x0); };
  c.state = [=](int t) { return scalar(x0 * std::pow(r2, t)); };
  // MPY in maximisation form: -beta^t u_t + lambda_{t+1} = 0.
  c.adjoint = [=](int t) { return row(std::pow(beta, t - 1) * (r2 - 1.0) * std::pow(r2, t - 1) * x0); };
  c.numbers = {{"r2", r2},
               {"r1", r1},
               {"beta_r1", beta * r1},
               {"beta_r2", beta * r2},
               {"discriminant", (1.0 + 2.0 * beta) * (1.0 + 2.0 * beta) - 4.0 * beta},
               {"u0", (r2 - 1.0) * x0},
               {"value", -0.5 * x0 * x0 * (1.0 + (r2 - 1.0) * (r2 - 1.0)) / (1.0 - beta * r2 * r2)},
               {"lambda_sign", -1.0}};
  c.notes = {{"objective", "minimise the cost; encoded as maximising its negative"},
             {"lambda", "stored adjoints are for the negated cost; the cost form is lambda_sign times"}};
  return c;
}

BenchmarkCase make_brock_mirman(double alpha, double beta, const std::string& A_seq, double x0) {
  require(open_unit(alpha), "alpha must lie in (0,1)");
  require(open_unit(beta), "beta must lie in (0,1)");
  require(x0 > 0.0, "x0 must be positive");
  const expr::Expr A = expr::parse(A_seq, {}, 0, 0);
  require(!A.uses_state() && !A.uses_control(), "A_t may depend on t only");
  auto A_at = [A](int t) { return expr::eval(A, {{"t", static_cast<double>(t)}}); };
  for (int t = 0; t <= 2000; ++t)
    require(A_at(t) > 0.0 && std::isfinite(A_at(t)), "A_t must be positive");

  const double dd = 1.0 - alpha * beta;
  BenchmarkCase c;
  c.name = "brock_mirman";
  c.kind = Kind::markov;
  c.params = {{"alpha", alpha}, {"beta", beta}};
  c.x0 = scalar(x0);
  const std::string At = "(" + A_seq + ")";
  ProblemDefinition d;
  d.name = c.name;
  d.params = c.params;
  d.dynamics = {At + "*x1^alpha - u1"};
  d.reward = "beta^t*ln(u1)";
  d.bounds = {{"0", At + "*x1^alpha"}};
  c.problem = std::make_shared<const ExpressionProblem>(d);
  c.policy = FeedbackPolicy({"d*" + At + "*x1^alpha"}, {{"d", dd}, {"alpha", alpha}}, 1);

  // Capital choice form: u = x_{t+1}, consumption A_t x^alpha - u.
  ProblemDefinition e;
  e.name = c.name;
  e.params = c.params;
  e.reward = "beta^t*ln(" + At + "*x1^alpha - u1)";
  e.bounds = {{"0", At + "*x1^alpha"}};
  c.euler = std::make_shared<const EulerProblem>(e);

  auto state = [=](int t) {
    // x_{t+1} = alpha beta A_t x_t^alpha
    double x = x0;
    for (int s = 0; s < t; ++s) x = alpha * beta * A_at(s) * std::pow(x, alpha);
    return x;
  };
  c.state = [state](int t) { return scalar(state(t)); };
  c.control = [=](int t) { return scalar(dd * A_at(t) * std::pow(state(t), alpha)); };
  c.adjoint = [=](int t) { return row(alpha * std::pow(beta, t) / (dd * state(t))); };
  c.numbers = {{"d", dd}, {"x1", alpha * beta * A_at(0) * std::pow(x0, alpha)}};
  c.notes = {{"objective", "maximise"}, {"policy", "power family d A_t x^alpha"}};
  return c;
}

BenchmarkCase make_ak(double a, double beta, double theta, double x0) {
  require(a > 1.0, "a must exceed 1");
  require(theta < 0.0, "theta must be negative");
  require(open_unit(beta), "beta must lie in (0,1)");
  require(x0 > 0.0, "x0 must be positive");
  const double b = std::pow(a * beta, 1.0 / (theta - 1.0));
  require(b > 1.0, "need (a beta)^(1/(theta-1)) > 1, i.e. a beta < 1");

  BenchmarkCase c;
  c.name = "ak";
  c.kind = Kind::euler;
  c.params = {{"a", a}, {"beta", beta}, {"theta", theta}};
  c.x0 = scalar(x0);
  ProblemDefinition e;
  e.name = c.name;
  e.params = c.params;
  e.reward = "beta^t/theta*(a*x1 - u1)^theta";
  e.bounds = {{"0", "a*x1"}};
  c.euler = std::make_shared<const EulerProblem>(e);
  c.problem = c.euler->stage_problem();

  const double ratio = 1.0 / b;
  c.policy = FeedbackPolicy::linear_fraction(ratio);
  c.state = [=](int t) { return scalar(x0 * std::pow(ratio, t)); };
  c.control = [=](int t) { return scalar(x0 * std::pow(ratio, t + 1)); };
  c.adjoint = [=](int t) {
    const double x = x0 * std::pow(ratio, t);
    return row(std::pow(beta, t) * a * std::pow(a * x - ratio * x, theta - 1.0));
  };
  c.numbers = {{"b", b}, {"ratio", ratio}, {"mid", 1.0 + a * b}, {"other_root", a}};
  c.notes = {{"objective", "maximise"}, {"euler", "b x_{t+1} - (1 + a b) x_t + a x_{t-1} = 0"}};
  return c;
}

BenchmarkCase make_lq_game(double beta, int N, double x0) {
  require(open_unit(beta), "beta must lie in (0,1)");
  require(N >= 1, "need at least one player");
  require(std::isfinite(x0), "x0 must be finite");
  BenchmarkCase c;
  c.name = "lq_game";
  c.kind = Kind::game;
  c.params = {{"beta", beta}, {"N", static_cast<double>(N)}};
  c.x0 = scalar(x0);
  GameDefinition g;
  g.name = c.name;
  g.state_dim = 1;
  g.control_dims.assign(N, 1);
  g.params = {{"beta", beta}};
  std::string f = "x1";
  for (int j = 1; j <= N; ++j) {
    f += " + u" + std::to_string(j);
    g.rewards.push_back("-0.5*beta^t*(x1^2 + u" + std::to_string(j) + "^2)");
  }
  g.dynamics = {f};
  c.game = std::make_shared<const GameProblem>(g);

  const double r = lq_stable_root(beta, N);
  c.control = [=](int t) { return VectorXd::Constant(N, x0 * (r - 1.0) * std::pow(r, t) / N); };
  c.state = [=](int t) { return scalar(x0 * std::pow(r, t)); };
  c.adjoint = [=](int t) {
    return row(std::pow(beta, t - 1) * x0 * (r - 1.0) * std::pow(r, t - 1) / N);
  };
  const double mid = 1.0 + (1.0 + N) * beta;
  c.numbers = {{"r", r},
               {"u0", x0 * (r - 1.0) / N},
               {"discriminant", mid * mid - 4.0 * beta},
               {"lambda_sign", -1.0}};
  c.notes = {{"objective", "each player minimises its cost; encoded as maximising the negative"}};
  return c;
}

const std::vector<std::string>& names() {
  static const std::vector<std::string> n = {"consumption_investment", "lq", "brock_mirman", "ak",
                                             "lq_game"};
  return n;
}

BenchmarkCase make_by_name(const std::string& name, const std::map<std::string, double>& o) {
  auto get = [&](const char* key, double def) {
    const auto it = o.find(key);
    return it == o.end() ? def : it->second;
  };
  for (const auto& [k, v] : o) {
    (void)v;
    static const std::map<std::string, std::vector<std::string>> known = {
        {"consumption_investment", {"beta", "gamma", "r", "x0"}},
        {"lq", {"beta", "x0"}},
        {"brock_mirman", {"alpha", "beta", "A", "x0"}},
        {"ak", {"a", "beta", "theta", "x0"}},
        {"lq_game", {"beta", "N", "x0"}}};
    const auto it = known.find(name);
    if (it != known.end() && std::find(it->second.begin(), it->second.end(), k) == it->second.end())
      throw std::invalid_argument("benchmark " + name + " has no parameter '" + k + "'");
  }
  if (name == "consumption_investment")
    return make_consumption_investment(get("beta", 0.95), get("gamma", 0.5), get("r", 1.05),
                                       get("x0", 1.0));
  if (name == "lq") return make_lq(get("beta", 0.95), get("x0", 1.0));
  if (name == "brock_mirman") {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", get("A", 1.0));
    return make_brock_mirman(get("alpha", 0.3), get("beta", 0.95), buf, get("x0", 1.0));
  }
  if (name == "ak") return make_ak(get("a", 1.02), get("beta", 0.9), get("theta", -1.0), get("x0", 1.0));
  if (name == "lq_game") {
    const double N = get("N", 2.0);
    if (N != std::floor(N)) throw InvalidParameters("N must be an integer");
    return make_lq_game(get("beta", 0.95), static_cast<int>(N), get("x0", 1.0));
  }
  throw std::out_of_range("unknown benchmark '" + name + "'");
}

}  // namespace dmp::bench
