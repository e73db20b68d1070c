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

// Command dispatch. Everything written to disk is a pure function of the
// inputs: no timings, paths or dates.

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

#include "json.hpp"

#include "dmp/cli.hpp"
#include "dmp/mp.hpp"
#include "dmp/solve.hpp"

namespace dmp::cli {

namespace {

using json = nlohmann::ordered_json;

const char* verdict(bool pass) { return pass ? "PASS" : "FAIL"; }

std::filesystem::path out_dir(const Options& opts) {
  std::string dir = opts.out_dir;
  if (const char* env = std::getenv("DMP_OUT_DIR"); env && *env) dir = env;
  if (dir.empty()) dir = ".";
  std::filesystem::create_directories(dir);
  return dir;
}

void write_file(const std::filesystem::path& path, const std::string& body) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw std::runtime_error("cannot write " + path.string());
  f << body;
}

json vec_json(const VectorXd& v) {
  json a = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v(i));
  return a;
}

json residual_json(const ResidualReport& r) {
  return {{"horizon", r.horizon},
          {"eval_horizon", r.eval_horizon},
          {"stationarity_sup", r.stationarity_sup},
          {"stationarity_worst", r.stationarity_worst},
          {"stationarity_verdict", verdict(r.stationarity_pass)},
          {"recursion_sup", r.recursion_sup},
          {"recursion_verdict", verdict(r.recursion_pass)},
          {"tc",
           {{"h", r.tc_h},
            {"rate", r.tc_fit.rate},
            {"r2", r.tc_fit.r2},
            {"points", r.tc_fit.points},
            {"last_quarter_sup", r.tc_last_quarter_sup},
            {"verdict", verdict(r.tc_pass)}}},
          {"verdict", verdict(r.pass())}};
}

json feasibility_json(const FeasibilityReport& f) {
  return {{"min_margin", f.min_margin}, {"worst_stage", f.worst_stage}, {"eps", f.eps}, {"verdict", verdict(f.pass)}};
}

json amp_json(const AmpProbeReport& a) {
  return {{"tau", a.tau},        {"radius", a.radius}, {"samples", a.n_samples}, {"blocks", a.K},
          {"block_sups", a.tail_sup}, {"rate", a.fit.rate}, {"r2", a.fit.r2},  {"heuristic", a.heuristic},
          {"verdict", verdict(a.pass)}};
}

json sufficiency_json(const SufficiencyReport& s) {
  return {{"chords", s.n_chords},       {"evaluated", s.evaluated}, {"skipped", s.skipped},
          {"min_slack", s.min_slack},   {"convexity", s.convexity}, {"minorant", s.minorant},
          {"verdict", s.verdict}};
}

json header(const std::string& command, const Problem& p) {
  return {{"schema", "dmp.report/1"},
          {"command", command},
          {"problem", p.name},
          {"kind", p.kind},
          {"T", p.T},
          {"x0", vec_json(p.x0)},
          {"tail_rule", to_string(p.tail)}};
}

double tol(const Problem& p, const char* key, double def) {
  const auto it = p.tolerances.find(key);
  return it == p.tolerances.end() ? def : it->second;
}

CheckOptions check_options(const Problem& p) {
  CheckOptions co;
  co.stationarity_tol = tol(p, "stationarity_tol", co.stationarity_tol);
  co.recursion_tol = tol(p, "recursion_tol", co.recursion_tol);
  co.tc_tol = tol(p, "tc_tol", co.tc_tol);
  return co;
}

SweepOptions sweep_options(const Problem& p) {
  SweepOptions so;
  so.stationarity_tol = tol(p, "stationarity_tol", so.stationarity_tol);
  so.internal_tol = std::min(so.stationarity_tol, tol(p, "internal_tol", so.internal_tol));
  so.max_iters = static_cast<int>(tol(p, "max_iters", so.max_iters));
  return so;
}

// T/8, T/4, T/2, T: each horizon warm-starts the next.
std::vector<int> ladder(int T) {
  std::vector<int> h;
  for (int d : {8, 4, 2, 1})
    if (T / d >= 1 && (h.empty() || T / d > h.back())) h.push_back(T / d);
  return h;
}

std::vector<int> amp_blocks(int T) {
  const int step = std::max(1, T / 20);
  std::vector<int> K;
  for (int k = step; k <= T; k += step) K.push_back(k);
  return K;
}

// Box around the plan's controls, kept strictly inside the stage-0 box.
PlanRegion probe_region(const StageProblem& problem, const Plan& plan, const VectorXd& x0) {
  const int m = problem.control_dim();
  PlanRegion r{std::min(plan.horizon(), 40), VectorXd(m), VectorXd(m)};
  const ControlBox box = problem.control_box(0, x0);
  for (int i = 0; i < m; ++i) {
    double lo = plan.controls[0](i), hi = lo;
    for (const auto& u : plan.controls) {
      lo = std::min(lo, u(i));
      hi = std::max(hi, u(i));
    }
    lo -= 1.0;
    hi += 1.0;
    const double w = std::isfinite(box.hi(i) - box.lo(i)) ? box.hi(i) - box.lo(i) : 1.0;
    if (std::isfinite(box.lo(i))) lo = std::max(lo, box.lo(i) + 0.01 * w);
    if (std::isfinite(box.hi(i))) hi = std::min(hi, box.hi(i) - 0.01 * w);
    r.lo(i) = lo;
    r.hi(i) = hi;
  }
  return r;
}

int finish(const json& report, bool pass, const Options& opts, const std::filesystem::path& dir,
           std::ostream& out, const std::string& summary) {
  json rep = report;
  rep["verdict"] = pass ? "PASS" : "FLAGGED";
  rep["exit_code"] = pass ? kPass : kFlagged;
  const std::string body = rep.dump(2) + "\n";
  write_file(dir / "report.json", body);
  if (opts.json) {
    out << body;
  } else {
    out << summary << (pass ? "PASS" : "FLAGGED") << "\n";
  }
  return pass ? kPass : kFlagged;
}

template <class F>
int guarded(std::ostream& err, F&& body) {
  try {
    return body();
  } catch (const RolloutError& e) {
    err << "error: " << e.what() << " (stage " << e.stage() << ")\n";
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
  }
  return kError;
}

std::string read_text(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw UsageError("cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string describe(const ResidualReport& r) {
  std::ostringstream s;
  s << std::setprecision(3) << "stationarity sup " << r.stationarity_sup << " (t=" << r.stationarity_worst
    << "), recursion sup " << r.recursion_sup << ", TC rate " << r.tc_fit.rate << " "
    << verdict(r.tc_pass) << "\n";
  return s.str();
}

}  // namespace

int cmd_solve(const std::string& file, const Options& opts, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    const Problem p = load_problem(file, opts);
    if (p.kind == "game") throw UsageError("'" + p.name + "' is a game; use the game command");
    const StageProblem& sp = *p.stage;
    const SweepOptions so = sweep_options(p);
    CheckOptions co = check_options(p);

    Plan plan;
    ResidualReport rep;
    AdjointSeq adj;
    json solver;
    bool converged = false;
    if (opts.finite) {
      SolveResult r = solve_finite_horizon(sp, p.x0, p.T, std::nullopt, so);
      plan = r.plan;
      plan.tail = p.tail;
      plan.steady_state = plan.controls.back();
      adj = adjoint_backward(sp, rollout(sp, plan, p.x0), plan, TerminalMode::from_terminal_reward);
      rep = r.report;
      converged = r.converged;
      solver = {{"mode", "finite"}, {"iterations", r.iterations}, {"converged", r.converged}, {"message", r.message}};
    } else {
      InfiniteHorizonOptions io;
      io.sweep = so;
      io.horizons = ladder(p.T);
      io.stop_when_stable = false;
      io.check = co;
      InfiniteHorizonResult r = solve_infinite_horizon(sp, p.x0, io);
      plan = r.solve.plan;
      plan.tail = p.tail;
      plan.steady_state = plan.controls.back();
      co.tail_extension = io.extension_factor * p.T;
      rep = check_plan(sp, plan, p.x0, co, &adj);
      converged = r.solve.converged;
      json steps = json::array();
      for (const auto& s : r.steps)
        steps.push_back({{"T", s.T}, {"early_change", s.early_change}, {"iterations", s.iterations}, {"converged", s.converged}});
      solver = {{"mode", "infinite"},       {"iterations", r.solve.iterations}, {"converged", converged},
                {"message", r.solve.message}, {"horizons", steps},             {"stabilized", r.stabilized}};
    }

    const Trajectory traj = rollout(sp, plan, p.x0);
    const RewardSummary value = total_reward(sp, plan, p.x0);
    const FeasibilityReport feas = feasibility_check(sp, plan, p.x0);
    const auto dir = out_dir(opts);
    write_file(dir / "trajectory.csv", trajectory_csv(traj, plan));
    write_file(dir / "adjoints.csv", adjoints_csv(adj, p.T));

    json report = header("solve", p);
    report["solver"] = solver;
    report["value"] = value.value;
    report["tail_bound"] = value.tail_bound;
    report["tail_flag"] = value.tail_flag;
    report["residuals"] = residual_json(rep);
    report["feasibility"] = feasibility_json(feas);
    const bool pass = converged && rep.pass() && feas.pass;
    return finish(report, pass, opts, dir, out, p.name + ": " + describe(rep));
  });
}

int cmd_check(const std::string& file, const std::string& plan_file, const Options& opts,
              std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    Problem p = load_problem(file, opts);
    const CheckOptions co = check_options(p);
    const auto dir = [&] { return out_dir(opts); };

    if (p.kind == "game") {
      const GameProblem& g = *p.game;
      MultiStrategy ms;
      if (plan_file.empty()) {
        if (!p.bench) throw UsageError("no strategy to check: pass a plan file");
        ms = p.bench->oracle_strategy(p.T);
      } else {
        const Plan joint = read_plan_csv(read_text(plan_file), p.tail);
        if (joint.control_at(0).size() != g.total_controls())
          throw UsageError("plan has " + std::to_string(joint.control_at(0).size()) + " control columns, the game has " +
                           std::to_string(g.total_controls()));
        for (int j = 0; j < g.players(); ++j) {
          Plan pj;
          pj.tail = p.tail;
          for (const auto& u : joint.controls) pj.controls.push_back(u.segment(g.offset(j), g.control_dim(j)));
          pj.steady_state = pj.controls.back();
          ms.push_back(pj);
        }
      }
      p.T = ms.front().horizon();
      const auto reps = nash_residuals(g, ms, p.x0, co);
      json report = header("check", p);
      json players = json::array();
      bool pass = true;
      std::string summary;
      for (int j = 0; j < g.players(); ++j) {
        const RewardSummary v = total_reward(g.joint(j), joint_plan(g, ms), p.x0);
        players.push_back({{"player", j + 1}, {"value", v.value}, {"tail_bound", v.tail_bound},
                           {"residuals", residual_json(reps[j])}});
        pass = pass && reps[j].pass();
        summary += "player " + std::to_string(j + 1) + ": " + describe(reps[j]);
      }
      report["players"] = players;
      return finish(report, pass, opts, dir(), out, summary);
    }

    std::optional<Plan> plan;
    std::optional<FeedbackPolicy> policy;
    if (plan_file.empty()) {
      if (p.policy) {
        policy = p.policy;
      } else if (p.bench && p.bench->control) {
        plan = p.bench->oracle_plan(p.T);
      } else {
        throw UsageError("nothing to check: pass a plan or policy file");
      }
    } else if (plan_file.size() >= 4 && plan_file.compare(plan_file.size() - 4, 4, ".csv") == 0) {
      plan = read_plan_csv(read_text(plan_file), p.tail);
      if (plan->control_at(0).size() != p.stage->control_dim())
        throw UsageError("plan has " + std::to_string(plan->control_at(0).size()) + " control columns, the problem has " +
                         std::to_string(p.stage->control_dim()));
    } else {
      policy = read_policy(read_text(plan_file), p);
      if (!p.policy_problem) p.policy_problem = p.stage;
    }

    json report = header("check", p);
    bool pass = true;
    ResidualReport rep;
    if (plan) {
      const StageProblem& sp = *p.stage;
      p.T = plan->horizon();
      report["T"] = p.T;
      rep = check_plan(sp, *plan, p.x0, co);
      const RewardSummary v = total_reward(sp, *plan, p.x0);
      const FeasibilityReport feas = feasibility_check(sp, *plan, p.x0);
      report["subject"] = "plan";
      report["value"] = v.value;
      report["tail_bound"] = v.tail_bound;
      report["tail_flag"] = v.tail_flag;
      report["residuals"] = residual_json(rep);
      report["feasibility"] = feasibility_json(feas);
      pass = rep.pass() && feas.pass;
      if (opts.amp_probe) {
        const double room = std::isfinite(feas.margins.front()) ? 0.5 * feas.margins.front() : 0.01;
        const auto a = check_assumption_amp(sp, *plan, p.x0, 0, std::min(0.01, room), 20, amp_blocks(p.T), opts.seed);
        report["amp_probe"] = amp_json(a);
        pass = pass && a.pass;
      }
      if (opts.sufficiency) {
        SufficiencyOptions so;
        so.seed = opts.seed;
        so.threads = opts.threads;
        const auto s = sufficiency_probe(sp, p.x0, probe_region(sp, *plan, p.x0), so);
        report["sufficiency"] = sufficiency_json(s);
        pass = pass && s.certified();
      }
    } else {
      const StageProblem& pp = *p.policy_problem;
      if (policy->state_dim() != pp.state_dim() || policy->control_dim() != pp.control_dim())
        throw UsageError("policy dimensions do not match the problem");
      rep = markov_residuals(pp, *policy, p.x0, p.T, co);
      const MarkovPath path = markov_path(pp, *policy, p.x0, p.T);
      const RewardSummary v = total_reward(pp, path.plan, p.x0);
      const FeasibilityReport feas = feasibility_check(pp, path.plan, p.x0);
      report["subject"] = "policy";
      report["policy_family"] = policy->family();
      report["value"] = v.value;
      report["tail_bound"] = v.tail_bound;
      report["tail_flag"] = v.tail_flag;
      report["residuals"] = residual_json(rep);
      report["feasibility"] = feasibility_json(feas);
      pass = rep.pass() && feas.pass;
      if (p.euler && p.policy_problem == p.stage) {
        const EulerReport e = euler_residuals(*p.euler, *policy, p.x0, p.T, co);
        report["euler"] = {{"ee_sup", e.ee_sup},
                           {"ee_worst", e.ee_worst},
                           {"tc_rate", e.tc_fit.rate},
                           {"tc_last_quarter_sup", e.tc_last_quarter_sup},
                           {"verdict", verdict(e.pass())}};
        pass = pass && e.pass();
      }
      if (opts.amp_probe) {
        const auto a = check_assumption_amp_ms(pp, *policy, p.x0, 1, 1e-3, 20, amp_blocks(p.T), opts.seed);
        report["amp_probe"] = amp_json(a);
        pass = pass && a.pass;
      }
      if (opts.sufficiency) {
        SufficiencyOptions so;
        so.seed = opts.seed;
        so.threads = opts.threads;
        const auto s = sufficiency_probe(pp, p.x0, probe_region(pp, path.plan, p.x0), so);
        report["sufficiency"] = sufficiency_json(s);
        pass = pass && s.certified();
      }
    }
    return finish(report, pass, opts, dir(), out, p.name + ": " + describe(rep));
  });
}

int cmd_game(const std::string& file, const Options& opts, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    const Problem p = load_problem(file, opts);
    if (p.kind != "game") throw UsageError("'" + p.name + "' is not a game; use solve");
    const GameProblem& g = *p.game;
    const CheckOptions co = check_options(p);
    NashResult res;
    if (opts.method == "newton") {
      NashNewtonOptions no;
      no.stationarity_tol = co.stationarity_tol;
      no.check = co;
      res = solve_nash_newton(g, p.x0, p.T, no);
    } else if (opts.method == "br") {
      NashOptions no;
      no.sweep = sweep_options(p);
      no.check = co;
      res = solve_nash_br(g, p.x0, p.T, no);
    } else {
      throw UsageError("unknown method '" + opts.method + "' (newton or br)");
    }

    const Plan joint = joint_plan(g, res.ms);
    const auto dir = out_dir(opts);
    write_file(dir / "trajectory.csv", trajectory_csv(game_rollout(g, res.ms, p.x0), joint));
    json report = header("game", p);
    report["solver"] = {{"method", opts.method},
                        {"iterations", res.iterations},
                        {"converged", res.converged},
                        {"cycling", res.cycling},
                        {"message", res.message},
                        {"trace", res.trace}};
    json players = json::array();
    bool pass = res.converged;
    std::string summary;
    for (int j = 0; j < g.players(); ++j) {
      const std::string tag = std::to_string(j + 1);
      write_file(dir / ("player_" + tag + ".csv"), plan_csv(res.ms[j], g.offset(j) + 1));
      write_file(dir / ("adjoints_player_" + tag + ".csv"), adjoints_csv(player_adjoint(g, res.ms, j, p.x0), p.T));
      const RewardSummary v = total_reward(g.joint(j), joint, p.x0);
      players.push_back({{"player", j + 1}, {"value", v.value}, {"tail_bound", v.tail_bound},
                         {"residuals", residual_json(res.reports[j])}});
      pass = pass && res.reports[j].pass();
      summary += "player " + tag + ": " + describe(res.reports[j]);
    }
    report["players"] = players;
    return finish(report, pass, opts, dir, out, summary);
  });
}

namespace {

struct BenchRow {
  std::string name;
  std::string kind;
  double stationarity_sup = 0.0;
  double recursion_sup = 0.0;
  double tc_rate = 0.0;
  double tc_last_quarter_sup = 0.0;
  double solver_gap = 0.0;
  bool pass = false;
};

// Oracle residuals at T, and the sup gap between oracle and solver controls
// over t <= T/2.
BenchRow bench_row(const bench::BenchmarkCase& c, int T) {
  BenchRow row{c.name, bench::to_string(c.kind)};
  std::vector<ResidualReport> reps;
  switch (c.kind) {
    case bench::Kind::open_loop:
      reps.push_back(check_plan(*c.problem, c.oracle_plan(T), c.x0));
      break;
    case bench::Kind::markov:
    case bench::Kind::euler:
      reps.push_back(markov_residuals(*c.problem, *c.policy, c.x0, T));
      break;
    case bench::Kind::game:
      reps = nash_residuals(*c.game, c.oracle_strategy(T), c.x0);
      break;
  }
  bool residuals_pass = true;
  for (const auto& r : reps) {
    row.stationarity_sup = std::max(row.stationarity_sup, r.stationarity_sup);
    row.recursion_sup = std::max(row.recursion_sup, r.recursion_sup);
    row.tc_rate = std::max(row.tc_rate, r.tc_fit.rate);
    row.tc_last_quarter_sup = std::max(row.tc_last_quarter_sup, r.tc_last_quarter_sup);
    residuals_pass = residuals_pass && r.stationarity_sup <= 1e-7 && r.recursion_sup <= 1e-9 &&
                     r.tc_fit.rate < 1.0 && r.tc_last_quarter_sup <= 1e-6;
  }

  double gap = 0.0;
  if (c.kind == bench::Kind::game) {
    const NashResult res = solve_nash_newton(*c.game, c.x0, T);
    for (int t = 0; t <= T / 2; ++t)
      for (int j = 0; j < c.game->players(); ++j)
        gap = std::max(gap, std::abs(res.ms[j].controls[t](0) - c.control(t)(j)));
  } else {
    // Next-state coordinates for the Euler forms.
    const StageProblem& sp = c.euler ? c.euler->as_stage_problem() : *c.problem;
    InfiniteHorizonOptions io;
    io.horizons = ladder(T);
    io.stop_when_stable = false;
    const InfiniteHorizonResult r = solve_infinite_horizon(sp, c.x0, io);
    for (int t = 0; t <= T / 2; ++t) {
      const VectorXd want = c.euler ? c.state(t + 1) : c.control(t);
      gap = std::max(gap, (r.solve.plan.controls[t] - want).cwiseAbs().maxCoeff());
    }
  }
  row.solver_gap = gap;
  row.pass = residuals_pass && std::isfinite(gap) && gap <= 1e-4;
  return row;
}

}  // namespace

int cmd_bench(const std::string& filter, const Options& opts, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    std::vector<std::string> names;
    if (filter.empty()) {
      if (!opts.params.empty()) throw UsageError("parameter flags need a single benchmark name");
      names = bench::names();
    } else {
      const auto& known = bench::names();
      if (std::find(known.begin(), known.end(), filter) == known.end())
        throw UsageError("unknown benchmark '" + filter + "'");
      names = {filter};
    }
    const int T = opts.T.value_or(kDefaultHorizon);
    if (T < 8) throw UsageError("bench needs T >= 8");

    std::vector<BenchRow> rows;
    for (const auto& name : names) rows.push_back(bench_row(bench::make_by_name(name, opts.params), T));

    std::string csv = "name,kind,stationarity_sup,recursion_sup,tc_rate,tc_last_quarter_sup,solver_gap,verdict\n";
    json table = json::array();
    bool all = true;
    for (const auto& r : rows) {
      csv += r.name + "," + r.kind + "," + format_double(r.stationarity_sup) + "," + format_double(r.recursion_sup) +
             "," + format_double(r.tc_rate) + "," + format_double(r.tc_last_quarter_sup) + "," +
             format_double(r.solver_gap) + "," + verdict(r.pass) + "\n";
      table.push_back({{"name", r.name},
                       {"kind", r.kind},
                       {"stationarity_sup", r.stationarity_sup},
                       {"recursion_sup", r.recursion_sup},
                       {"tc_rate", r.tc_rate},
                       {"tc_last_quarter_sup", r.tc_last_quarter_sup},
                       {"solver_gap", r.solver_gap},
                       {"verdict", verdict(r.pass)}});
      all = all && r.pass;
    }
    const json doc = {{"schema", "dmp.bench/1"}, {"T", T}, {"rows", table}, {"verdict", verdict(all)}};
    const auto dir = out_dir(opts);
    write_file(dir / "bench.csv", csv);
    write_file(dir / "bench.json", doc.dump(2) + "\n");

    if (opts.json) {
      out << doc.dump(2) << "\n";
    } else {
      out << std::left << std::setw(24) << "benchmark" << std::setw(10) << "kind" << std::setw(12) << "stat_sup"
          << std::setw(12) << "rec_sup" << std::setw(10) << "tc_rate" << std::setw(12) << "tc_tail" << std::setw(12)
          << "gap" << "verdict\n";
      for (const auto& r : rows) {
        out << std::left << std::setw(24) << r.name << std::setw(10) << r.kind << std::setprecision(3)
            << std::setw(12) << r.stationarity_sup << std::setw(12) << r.recursion_sup << std::setw(10) << r.tc_rate
            << std::setw(12) << r.tc_last_quarter_sup << std::setw(12) << r.solver_gap << verdict(r.pass) << "\n";
      }
    }
    return all ? kPass : kFlagged;
  });
}

}  // namespace dmp::cli
