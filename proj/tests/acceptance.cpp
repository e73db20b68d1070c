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

// Acceptance criteria 1-10, one PASS/FAIL line each. Closed forms are
// recomputed here from the model equations rather than taken from bench.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "support.hpp"
#include "dmp/bench.hpp"
#include "dmp/cli.hpp"
#include "dmp/feedback.hpp"
#include "dmp/games.hpp"
#include "dmp/mp.hpp"
#include "dmp/solve.hpp"

using namespace dmp;

namespace {

constexpr int kT = 200;

struct Outcome {
  bool pass = true;
  std::string detail;
};

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

VectorXd one(double v) { return VectorXd::Constant(1, v); }

// Smaller root of beta z^2 - (1 + (1 + N) beta) z + 1 = 0.
double small_root(double beta, int N) {
  const double mid = 1.0 + (1.0 + N) * beta;
  return (mid - std::sqrt(mid * mid - 4.0 * beta)) / (2.0 * beta);
}

// Oracle control at stage t, in the solver's coordinates (next state for
// the Euler forms), default parameters.
double closed_form(const std::string& name, int t) {
  if (name == "consumption_investment") return 1.0 - std::pow(1.05 * 0.95, 1.0 / 0.5) / 1.05;
  if (name == "lq") {
    const double r = small_root(0.95, 1);
    return (r - 1.0) * std::pow(r, t);
  }
  if (name == "brock_mirman") {
    double x = 1.0;
    for (int s = 0; s <= t; ++s) x = 0.3 * 0.95 * std::pow(x, 0.3);
    return x;
  }
  if (name == "ak") {
    const double b = std::pow(1.02 * 0.9, 1.0 / (-1.0 - 1.0));
    return std::pow(1.0 / b, t + 1);
  }
  const double r = small_root(0.95, 2);
  return (r - 1.0) * std::pow(r, t) / 2.0;
}

const StageProblem& stage(const bench::BenchmarkCase& c) {
  return c.euler ? c.euler->as_stage_problem() : *c.problem;
}

Outcome criterion1() {
  Outcome o;
  for (const auto& name : bench::names()) {
    const auto c = bench::make_by_name(name);
    double err = 0.0;
    if (c.kind == bench::Kind::game) {
      const auto r = solve_nash_newton(*c.game, c.x0, kT);
      for (int t = 0; t <= 100; ++t)
        for (const auto& p : r.ms) err = std::max(err, std::abs(p.controls[t](0) - closed_form(name, t)));
    } else {
      InfiniteHorizonOptions io;
      io.horizons = {25, 50, 100, 200};
      io.stop_when_stable = false;
      const auto r = solve_infinite_horizon(stage(c), c.x0, io);
      for (int t = 0; t <= 100; ++t) err = std::max(err, std::abs(r.solve.plan.controls[t](0) - closed_form(name, t)));
    }
    o.pass = o.pass && err <= 1e-4;
    o.detail += name + " " + fmt("%.2e", err) + "; ";
  }
  return o;
}

std::vector<ResidualReport> oracle_reports(const bench::BenchmarkCase& c, int T) {
  switch (c.kind) {
    case bench::Kind::open_loop:
      return {check_plan(*c.problem, c.oracle_plan(T), c.x0)};
    case bench::Kind::markov:
    case bench::Kind::euler:
      return {markov_residuals(*c.problem, *c.policy, c.x0, T)};
    case bench::Kind::game:
      return nash_residuals(*c.game, c.oracle_strategy(T), c.x0);
  }
  return {};
}

Outcome criterion2() {
  Outcome o;
  for (const auto& name : bench::names()) {
    const auto c = bench::make_by_name(name);
    // The oracle itself must match the closed form recomputed here.
    double gap = 0.0;
    for (int t = 0; t <= 100; ++t) {
      const double u = c.euler ? c.state(t + 1)(0) : c.control(t)(0);
      gap = std::max(gap, std::abs(u - closed_form(name, t)));
    }
    double s = 0, e = 0, rate = 0, tail = 0;
    for (const auto& r : oracle_reports(c, kT)) {
      s = std::max(s, r.stationarity_sup);
      e = std::max(e, r.recursion_sup);
      rate = std::max(rate, r.tc_fit.rate);
      tail = std::max(tail, r.tc_last_quarter_sup);
    }
    const bool ok = gap <= 1e-12 && s <= 1e-7 && e <= 1e-9 && rate < 1.0 && tail <= 1e-6;
    o.pass = o.pass && ok;
    o.detail += name + " stat " + fmt("%.1e", s) + " rec " + fmt("%.1e", e) + " rate " + fmt("%.3f", rate) +
                " tail " + fmt("%.1e", tail) + "; ";
  }
  return o;
}

Outcome criterion3() {
  Outcome o;
  double series = 0.0;
  for (const char* name : {"lq", "consumption_investment", "brock_mirman", "ak"}) {
    const auto c = bench::make_by_name(name);
    const StageProblem& p = stage(c);
    const Plan plan = c.oracle_plan(kT);
    const auto traj = rollout(p, plan, c.x0);
    const auto adj = adjoint_backward(p, traj, plan, TerminalMode::zero_seed);
    for (int t = 1; t <= kT / 2; ++t) {
      const double s = adjoint_series(p, traj, plan, t, kT - t + 1)(0);
      series = std::max(series, std::abs(s - adj.at(t)(0)));
    }
  }
  // Seed insensitivity on the contracting benchmarks (df/dx = 0 in the
  // Euler form).
  double seed = 0.0;
  for (const char* name : {"brock_mirman", "ak"}) {
    const auto c = bench::make_by_name(name);
    const StageProblem& p = stage(c);
    const Plan plan = c.oracle_plan(kT);
    const auto traj = rollout(p, plan, c.x0);
    const auto a = adjoint_backward(p, traj, plan, RowVectorXd::Zero(1));
    const auto b = adjoint_backward(p, traj, plan, RowVectorXd::Ones(1));
    for (int t = 1; t <= kT / 2; ++t) seed = std::max(seed, std::abs(a.at(t)(0) - b.at(t)(0)));
  }
  o.pass = series <= 1e-8 && seed <= 1e-6;
  o.detail = "series vs recursion " + fmt("%.2e", series) + ", seed 0 vs 1 " + fmt("%.2e", seed);
  return o;
}

Outcome criterion4() {
  Outcome o;
  std::mt19937_64 rng(4);
  std::uniform_int_distribution<int> pick_tau(0, 99);
  std::uniform_real_distribution<double> pick_y(-1.0, 1.0);
  const double h = 1e-6;
  double worst = 0.0, at_opt = 0.0;
  for (const auto& name : bench::names()) {
    const auto c = bench::make_by_name(name);
    // differential(plan-ish, tau, y, T) and value(plan-ish, tau, shift, T)
    std::function<double(bool, int, double, int)> diff, value;
    // Width of the control set at (tau, x_tau) on the off-optimal path,
    // capped at 1; sets the size of y.
    std::function<double(int)> width;
    auto capped = [](const StageProblem& p, int tau, const VectorXd& x) {
      const ControlBox b = p.control_box(tau, x);
      return std::min(1.0, b.hi(0) - b.lo(0));
    };
    if (c.kind == bench::Kind::open_loop || c.kind == bench::Kind::game) {
      std::shared_ptr<StageProblem> player;
      if (c.game) player = std::make_shared<PlayerProblem>(*c.game, c.oracle_strategy(4 * kT), 0);
      const StageProblem* p = player ? player.get() : c.problem.get();
      const Plan opt = c.game ? c.oracle_strategy(4 * kT)[0] : c.oracle_plan(4 * kT);
      Plan off = opt;
      for (auto& u : off.controls) u *= 0.9;
      auto plan_for = [=](bool optimal, int T) {
        Plan q = optimal ? opt : off;
        q.controls.resize(T);
        return q;
      };
      const Trajectory off_path = rollout(*p, plan_for(false, kT), c.x0);
      width = [=, keep = player](int tau) { return capped(*p, tau, off_path.states[tau]); };
      diff = [=, keep = player](bool optimal, int tau, double y, int T) {
        return gateaux_differential(*p, plan_for(optimal, T), c.x0, tau, one(y), T);
      };
      value = [=, keep = player](bool optimal, int tau, double shift, int T) {
        Plan q = plan_for(optimal, T);
        q.controls[tau](0) += shift;
        return truncated_value(*p, q, rollout(*p, q, c.x0));
      };
    } else {
      const FeedbackPolicy opt = *c.policy;
      const FeedbackPolicy off({"0.9*(" + opt.sources()[0] + ")"}, opt.params(), 1);
      const MarkovPath off_path = markov_path(*c.problem, off, c.x0, kT);
      width = [=](int tau) { return capped(*c.problem, tau, off_path.traj.states[tau]); };
      diff = [=](bool optimal, int tau, double y, int T) {
        return markov_gateaux_differential(*c.problem, optimal ? opt : off, c.x0, tau, one(y), T);
      };
      value = [=](bool optimal, int tau, double shift, int T) {
        return markov_value(*c.problem, optimal ? opt : off, c.x0, T, tau, one(shift));
      };
    }
    for (int k = 0; k < 20; ++k) {
      const int tau = pick_tau(rng);
      const double y = pick_y(rng) * width(tau);
      const double fd = (value(false, tau, h * y, kT) - value(false, tau, -h * y, kT)) / (2 * h);
      const double v = value(false, 0, 0.0, kT);
      worst = std::max(worst, std::abs(diff(false, tau, y, kT) - fd) / (1.0 + std::abs(v)));
      // At the optimum, truncated where the residual checks evaluate (4T).
      at_opt = std::max(at_opt, std::abs(diff(true, tau, y / width(tau), 4 * kT)));
    }
  }
  o.pass = worst <= 1e-6 && at_opt <= 1e-7;
  o.detail = "formula vs FD (scaled) " + fmt("%.2e", worst) + ", at optimum " + fmt("%.2e", at_opt);
  return o;
}

Outcome criterion5() {
  const auto trials = dmp::testing::grad_trials(100, 5);
  int failures = 0;
  double worst = 0.0;
  for (const auto& t : trials) {
    failures += !t.pass;
    worst = std::max(worst, t.worst);
  }
  return {failures == 0, std::to_string(trials.size()) + " pairs, " + std::to_string(failures) +
                             " failures, worst " + fmt("%.2e", worst)};
}

Outcome criterion6() {
  Outcome o;
  // LQ along the unstable root r1.
  const double r1 = 1.0 / (0.95 * small_root(0.95, 1));
  const auto lq = bench::make_lq();
  Plan unstable;
  for (int t = 0; t < 60; ++t) unstable.controls.push_back(one((r1 - 1.0) * std::pow(r1, t)));
  CheckOptions co;
  co.tail_extension = 60;
  const auto tc = check_plan(*lq.problem, unstable, lq.x0, co);
  const bool a = !tc.tc_pass;

  const auto game = bench::make_lq_game();
  auto ms = game.oracle_strategy(kT);
  ms[0].controls[0](0) += 0.1;
  const auto nash = nash_residuals(*game.game, ms, game.x0);
  const bool b = !nash[0].pass();

  const auto bm = bench::make_brock_mirman();
  bool c = true;
  for (double d : {0.6, 0.7, 0.73, 0.8}) c = c && !markov_residuals(*bm.problem, FeedbackPolicy::power(d, 1.0, 0.3), bm.x0, kT).pass();
  o.pass = a && b && c;
  o.detail = std::string("LQ unstable root TC ") + (a ? "fails" : "passes") + " (last-quarter sup " +
             fmt("%.1e", tc.tc_last_quarter_sup) + "); perturbed player " + (b ? "fails" : "passes") +
             " (stat " + fmt("%.1e", nash[0].stationarity_sup) + "); BM d != 0.715 " + (c ? "fails" : "passes");
  return o;
}

Outcome criterion7() {
  Outcome o;
  // N = 1 game against the regulator.
  const auto g = bench::make_lq_game(0.95, 1);
  const auto s = bench::make_lq();
  const int T = 120;
  double game_dev = 0.0;
  for (const Plan& plan : {s.oracle_plan(T), Plan::constant(T, one(-0.3))}) {
    const auto a = nash_residuals(*g.game, {plan}, g.x0)[0];
    const auto b = check_plan(*s.problem, plan, s.x0);
    for (int t = 0; t < T; ++t) game_dev = std::max(game_dev, std::abs(a.stationarity[t](0) - b.stationarity[t](0)));
    for (std::size_t t = 0; t < a.tc_profile.size(); ++t)
      game_dev = std::max(game_dev, std::abs(a.tc_profile[t](0) - b.tc_profile[t](0)));
  }
  const auto na = solve_nash_br(*g.game, g.x0, T);
  const auto nb = solve_finite_horizon(*s.problem, s.x0, T);
  for (int t = 0; t < T; ++t) game_dev = std::max(game_dev, std::abs(na.ms[0].controls[t](0) - nb.plan.controls[t](0)));

  // Constant (zero-Jacobian) policy against the open-loop adjoint.
  double markov_dev = 0.0;
  for (const char* name : {"lq", "consumption_investment", "brock_mirman"}) {
    const auto c = bench::make_by_name(name);
    const auto phi = FeedbackPolicy::constant(name == std::string("brock_mirman") ? one(0.05) : c.control(3), 1);
    const auto closed = markov_adjoint(*c.problem, phi, c.x0, T);
    const auto path = markov_path(*c.problem, phi, c.x0, T);
    const auto open = adjoint_backward(*c.problem, path.traj, path.plan, TerminalMode::zero_seed);
    for (int t = 1; t <= T; ++t) markov_dev = std::max(markov_dev, std::abs(closed.at(t)(0) - open.at(t)(0)));
  }

  // Euler residuals against the Markov and open-loop residuals.
  double euler_dev = 0.0;
  for (const char* name : {"ak", "brock_mirman"}) {
    const auto c = bench::make_by_name(name);
    const auto& p = c.euler->as_stage_problem();
    const FeedbackPolicy law = name == std::string("ak")
                                   ? *c.policy
                                   : FeedbackPolicy({"alpha*beta*x1^alpha"}, {{"alpha", 0.3}, {"beta", 0.95}}, 1);
    for (double scale : {1.0, 0.97}) {
      const FeedbackPolicy phi({fmt("%.17g", scale) + "*(" + law.sources()[0] + ")"}, law.params(), 1);
      const int H = 100;
      CheckOptions co;
      co.tail_extension = 50;
      const auto m = markov_residuals(p, phi, c.x0, H, co);
      const auto e = euler_residuals(*c.euler, phi, c.x0, H, co);
      const auto path = markov_path(p, phi, c.x0, H + 1);
      const auto traj = rollout(p, path.plan, c.x0);
      const auto adj = adjoint_backward(p, traj, path.plan, TerminalMode::zero_seed);
      const auto r = stationarity_residuals(p, traj, path.plan, adj);
      for (int t = 1; t < H; ++t) {
        const double phi_t = phi.jacobian(t, path.traj.states[t])(0, 0);
        const double lhs = m.stationarity[t - 1](0);
        const double scale_t = 1.0 + std::abs(lhs);
        euler_dev = std::max(euler_dev, std::abs(lhs - e.ee[t - 1](0) - m.stationarity[t](0) * phi_t) / scale_t);
        euler_dev = std::max(euler_dev, std::abs(r[t - 1](0) - e.ee[t - 1](0)) / (1.0 + std::abs(r[t - 1](0))));
      }
    }
  }
  o.pass = game_dev == 0.0 && markov_dev == 0.0 && euler_dev <= 1e-12;
  o.detail = "N=1 game " + fmt("%.1e", game_dev) + ", constant policy " + fmt("%.1e", markov_dev) +
             ", Euler shift (relative) " + fmt("%.1e", euler_dev);
  return o;
}

Outcome criterion8() {
  const auto lq = bench::make_lq();
  const auto ci = bench::make_consumption_investment();
  const auto a = sufficiency_probe(*lq.problem, lq.x0, {40, one(-2.0), one(2.0)});
  const auto b = sufficiency_probe(*ci.problem, ci.x0, {40, one(0.01), one(0.99)});
  ProblemDefinition d;
  d.dynamics = {"x1 + u1"};
  d.reward = "0.5*u1^2";
  d.bounds = {{"-1", "1"}};
  const ExpressionProblem convex(d);
  const auto c = sufficiency_probe(convex, one(0.0), {10, one(-0.9), one(0.9)});
  const bool pass = a.evaluated == 100 && b.evaluated == 100 && a.min_slack >= -1e-9 && b.min_slack >= -1e-9 &&
                    a.certified() && b.certified() && c.verdict == "NOT-CERTIFIED";
  return {pass, "LQ slack " + fmt("%.2e", a.min_slack) + " " + a.verdict + ", CI slack " + fmt("%.2e", b.min_slack) +
                    " " + b.verdict + ", convex " + c.verdict};
}

Outcome criterion9() {
  std::vector<int> K;
  for (int k = 10; k <= 200; k += 10) K.push_back(k);
  const auto lq = bench::make_lq();
  const auto ci = bench::make_consumption_investment();
  const auto a = check_assumption_amp(*lq.problem, lq.oracle_plan(kT), lq.x0, 0, 0.01, 20, K);
  const auto b = check_assumption_amp(*ci.problem, ci.oracle_plan(kT), ci.x0, 0, 0.01, 20, K);
  ProblemDefinition d;
  d.dynamics = {"x1 + u1"};
  d.reward = "x1";
  d.bounds = {{"-1", "1"}};
  const ExpressionProblem acc(d);
  const auto c = check_assumption_amp(acc, Plan::constant(kT, one(0.0)), one(1.0), 0, 0.01, 20, K);
  const double want_b = 0.95 * std::pow(1.05, 1.0 - 0.5);
  const bool pass = a.pass && b.pass && std::abs(a.fit.rate - 0.95) <= 0.05 && std::abs(b.fit.rate - want_b) <= 0.05 && !c.pass;
  return {pass, "LQ rate " + fmt("%.4f", a.fit.rate) + " (0.95), CI rate " + fmt("%.4f", b.fit.rate) + " (" +
                    fmt("%.4f", want_b) + "), accumulator " + (c.pass ? "PASS" : "FAIL")};
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

Outcome criterion10() {
  namespace fs = std::filesystem;
  const fs::path root = fs::temp_directory_path() / "dmp_acceptance_bench";
  fs::remove_all(root);
  int codes[2];
  for (int i = 0; i < 2; ++i) {
    cli::Options o;
    o.out_dir = (root / std::to_string(i)).string();
    std::ostringstream out, err;
    codes[i] = cli::cmd_bench("", o, out, err);
  }
  const bool same = slurp(root / "0" / "bench.csv") == slurp(root / "1" / "bench.csv") &&
                    slurp(root / "0" / "bench.json") == slurp(root / "1" / "bench.json");
  const std::string csv = slurp(root / "0" / "bench.csv");
  const auto rows = std::count(csv.begin(), csv.end(), '\n') - 1;
  fs::remove_all(root);
  return {same && codes[0] == 0 && codes[1] == 0 && rows == 5,
          std::string(same ? "identical" : "different") + " bytes, " + std::to_string(rows) + " rows, exit " +
              std::to_string(codes[0]) + "/" + std::to_string(codes[1])};
}

}  // namespace

int main() {
  const std::vector<std::pair<const char*, Outcome (*)()>> criteria = {
      {"closed-form recovery", criterion1},     {"necessity suite", criterion2},
      {"adjoint equivalence", criterion3},      {"Gateaux differential", criterion4},
      {"gradient oracle", criterion5},          {"negative controls", criterion6},
      {"reduction laws", criterion7},           {"sufficiency evidence", criterion8},
      {"AMP probe", criterion9},                {"CLI determinism", criterion10}};
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failed += !o.pass;
    std::printf("criterion %2zu %-22s %s  %s\n", i + 1, criteria[i].first, o.pass ? "PASS" : "FAIL", o.detail.c_str());
    std::fflush(stdout);
  }
  return failed ? 1 : 0;
}
