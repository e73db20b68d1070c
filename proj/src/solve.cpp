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

#include "dmp/solve.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <random>
#include <stdexcept>
#include <thread>

namespace dmp {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double box_start(double lo, double hi) {
  if (std::isfinite(lo) && std::isfinite(hi)) return 0.5 * (lo + hi);
  if (std::isfinite(lo)) return lo + 1.0;
  if (std::isfinite(hi)) return hi - 1.0;
  return 0.0;
}

// The decision vector z stacks u_0..u_{T-1}; stages T..H-1 reuse u_{T-1}.
class Objective {
 public:
  Objective(const StageProblem& p, const VectorXd& x0, int T, int H, double margin)
      : p_(p), x0_(x0), T_(T), H_(H), m_(p.control_dim()), margin_(margin) {
    if (!p.state_dependent_box()) {
      lo_.resize(T * m_);
      hi_.resize(T * m_);
      const VectorXd none = VectorXd::Zero(p.state_dim());
      for (int t = 0; t < T; ++t) {
        const ControlBox b = p.control_box(t, none);
        lo_.segment(t * m_, m_) = b.lo.array() + margin;
        hi_.segment(t * m_, m_) = b.hi.array() - margin;
      }
    }
  }

  int size() const { return T_ * m_; }

  VectorXd control(const VectorXd& z, int t) const {
    return z.segment(std::min(t, T_ - 1) * m_, m_);
  }

  Plan plan(const VectorXd& z, TailRule tail) const {
    Plan out;
    for (int t = 0; t < T_; ++t) out.controls.push_back(control(z, t));
    out.tail = tail;
    out.steady_state = control(z, T_ - 1);
    return out;
  }

  VectorXd pack(const Plan& plan) const {
    VectorXd z(size());
    for (int t = 0; t < T_; ++t) z.segment(t * m_, m_) = plan.control_at(t);
    return z;
  }

  void project(VectorXd& z) const {
    if (p_.state_dependent_box()) return;
    z = z.cwiseMax(lo_).cwiseMin(hi_);
  }

  // The gradient with coordinates pressed against the box zeroed.
  VectorXd free_part(const VectorXd& z, const VectorXd& g) const {
    VectorXd f = g;
    if (p_.state_dependent_box()) return f;
    for (Eigen::Index i = 0; i < f.size(); ++i)
      if ((z(i) <= lo_(i) && g(i) < 0.0) || (z(i) >= hi_(i) && g(i) > 0.0)) f(i) = 0.0;
    return f;
  }

  // -inf when the path leaves the domain or a state-dependent box.
  double value(const VectorXd& z) const {
    VectorXd x = x0_;
    double sum = 0.0;
    try {
      for (int t = 0; t < H_; ++t) {
        const VectorXd u = control(z, t);
        if (p_.state_dependent_box()) {
          // These sets scale with the state, so an absolute margin would
          // reject small states; only strict interiority is enforced.
          const ControlBox b = p_.control_box(t, x);
          for (int i = 0; i < m_; ++i)
            if (!(u(i) > b.lo(i) && u(i) < b.hi(i))) return -kInf;
        } else if (t >= T_) {
          const ControlBox b = p_.control_box(t, x);
          for (int i = 0; i < m_; ++i)
            if (!(u(i) - b.lo(i) >= margin_ && b.hi(i) - u(i) >= margin_)) return -kInf;
        }
        sum += p_.reward(t, x, u);
        x = p_.dynamics(t, x, u);
        if (!x.allFinite()) return -kInf;
      }
      if (p_.has_terminal_reward()) sum += p_.terminal_reward(x);
    } catch (const DomainError&) {
      return -kInf;
    }
    return std::isfinite(sum) ? sum : -kInf;
  }

  struct Eval {
    Trajectory traj;
    std::vector<StageDerivatives> d;
    AdjointSeq adj;
    std::vector<RowVectorXd> r;  // r_t for t < H
    VectorXd grad;
  };

  Eval gradient(const VectorXd& z) const {
    Eval e;
    const Plan ext = plan(z, TailRule::repeat_last).extended(H_);
    e.traj = rollout(p_, ext, x0_);
    e.d = linearize(p_, ext, e.traj, H_);
    e.adj = adjoint_backward(p_, e.traj, ext, TerminalMode::from_terminal_reward);
    e.r.resize(H_);
    e.grad = VectorXd::Zero(size());
    for (int t = 0; t < H_; ++t) {
      e.r[t] = e.d[t].gu + e.adj.at(t + 1) * e.d[t].fu;
      e.grad.segment(std::min(t, T_ - 1) * m_, m_) += e.r[t].transpose();
    }
    return e;
  }

  // |d^2 g_t / du_i^2| with the state held fixed, summed into the tail slot.
  VectorXd curvature(const VectorXd& z, const Trajectory& traj) const {
    VectorXd c = VectorXd::Zero(size());
    for (int t = 0; t < H_; ++t) {
      const VectorXd u = control(z, t);
      ControlBox b;
      try {
        b = p_.control_box(t, traj.states[t]);
      } catch (const DomainError&) {
        continue;
      }
      for (int i = 0; i < m_; ++i) {
        double h = 1e-5 * (1.0 + std::abs(u(i)));
        // Keep the stencil well inside the control set.
        const double room = std::min(u(i) - b.lo(i), b.hi(i) - u(i));
        if (room > 0.0) h = std::min(h, 0.25 * room);
        VectorXd up = u, dn = u;
        double val = 0.0;
        for (int attempt = 0; attempt < 3; ++attempt) {
          up(i) = u(i) + h;
          dn(i) = u(i) - h;
          try {
            const double gp = p_.derivatives(t, traj.states[t], up).gu(i);
            const double gm = p_.derivatives(t, traj.states[t], dn).gu(i);
            val = std::abs(gp - gm) / (2.0 * h);
            break;
          } catch (const DomainError&) {
            h *= 0.01;
          }
        }
        if (std::isfinite(val)) c(std::min(t, T_ - 1) * m_ + i) += val;
      }
    }
    const double top = c.maxCoeff();
    const double floor = top > 0.0 ? 1e-10 * top : 1.0;
    return c.cwiseMax(floor);
  }

 private:
  const StageProblem& p_;
  VectorXd x0_;
  int T_, H_, m_;
  double margin_;
  VectorXd lo_, hi_;
};

double sup_abs(const VectorXd& v) { return v.size() ? v.cwiseAbs().maxCoeff() : 0.0; }

// Controls as box fractions, u = lo(x) + s (hi(x) - lo(x)). For sets that
// move with the state a fixed u leaves the box as soon as an earlier
// control changes the state; a fixed s does not.
class FractionProblem final : public StageProblem {
 public:
  explicit FractionProblem(const StageProblem& p) : p_(p) {}

  int state_dim() const override { return p_.state_dim(); }
  int control_dim() const override { return p_.control_dim(); }

  VectorXd to_control(int t, const VectorXd& x, const VectorXd& s) const {
    const ControlBox b = p_.control_box(t, x);
    return b.lo + s.cwiseProduct(b.hi - b.lo);
  }
  VectorXd to_fraction(int t, const VectorXd& x, const VectorXd& u) const {
    const ControlBox b = p_.control_box(t, x);
    return (u - b.lo).cwiseQuotient(b.hi - b.lo);
  }

  VectorXd dynamics(int t, const VectorXd& x, const VectorXd& s) const override {
    return p_.dynamics(t, x, to_control(t, x, s));
  }
  double reward(int t, const VectorXd& x, const VectorXd& s) const override {
    return p_.reward(t, x, to_control(t, x, s));
  }
  StageDerivatives derivatives(int t, const VectorXd& x, const VectorXd& s) const override {
    const ControlBox b = p_.control_box(t, x);
    const VectorXd w = b.hi - b.lo;
    const StageDerivatives d = p_.derivatives(t, x, b.lo + s.cwiseProduct(w));
    const auto [jl, jh] = p_.box_jacobian(t, x);
    const MatrixXd du_dx = jl + s.asDiagonal() * (jh - jl);
    StageDerivatives out;
    out.fx = d.fx + d.fu * du_dx;
    out.gx = d.gx + d.gu * du_dx;
    out.fu = d.fu * w.asDiagonal();
    out.gu = d.gu * w.asDiagonal();
    return out;
  }

  bool has_terminal_reward() const override { return p_.has_terminal_reward(); }
  double terminal_reward(const VectorXd& x) const override { return p_.terminal_reward(x); }
  RowVectorXd terminal_gradient(const VectorXd& x) const override { return p_.terminal_gradient(x); }

  ControlBox control_box(int, const VectorXd&) const override {
    const int m = p_.control_dim();
    return {VectorXd::Zero(m), VectorXd::Ones(m)};
  }

 private:
  const StageProblem& p_;
};

bool bounded_box(const StageProblem& p, const VectorXd& x0) {
  try {
    const ControlBox b = p.control_box(0, x0);
    return b.lo.allFinite() && b.hi.allFinite();
  } catch (const DomainError&) {
    return false;
  }
}

}  // namespace

Plan default_initial_plan(const StageProblem& problem, const VectorXd& x0, int T) {
  Plan plan;
  VectorXd x = x0;
  for (int t = 0; t < T; ++t) {
    const ControlBox b = problem.control_box(t, x);
    VectorXd u(b.lo.size());
    for (Eigen::Index i = 0; i < u.size(); ++i) u(i) = box_start(b.lo(i), b.hi(i));
    plan.controls.push_back(u);
    if (t + 1 < T) {
      try {
        x = problem.dynamics(t, x, u);
      } catch (const DomainError& e) {
        throw RolloutError(std::string("initial plan leaves the domain: ") + e.what(), t);
      }
    }
  }
  plan.steady_state = plan.controls.empty() ? VectorXd() : plan.controls.back();
  return plan;
}

SolveResult solve_finite_horizon(const StageProblem& problem, const VectorXd& x0, int T,
                                 const std::optional<Plan>& init, const SweepOptions& opts) {
  if (T < 1) throw std::invalid_argument("solve_finite_horizon: T must be >= 1");
  if (opts.max_iters < 1) throw std::invalid_argument("solve_finite_horizon: max_iters must be >= 1");
  if (!(opts.step > 0.0)) throw std::invalid_argument("solve_finite_horizon: step must be positive");
  if (opts.tail_extension < 0) throw std::invalid_argument("solve_finite_horizon: negative tail");

  if (problem.state_dependent_box() && bounded_box(problem, x0)) {
    const FractionProblem fp(problem);
    std::optional<Plan> finit;
    if (init) {
      const Plan u = init->extended(T);
      const Trajectory tr = rollout(problem, u, x0);
      Plan f;
      for (int t = 0; t < T; ++t) f.controls.push_back(fp.to_fraction(t, tr.states[t], u.controls[t]));
      f.tail = u.tail;
      f.steady_state = f.controls.back();
      finit = std::move(f);
    }
    SolveResult r = solve_finite_horizon(fp, x0, T, finit, opts);
    const Trajectory tr = rollout(fp, r.plan, x0);
    Plan u;
    for (int t = 0; t < T; ++t) u.controls.push_back(fp.to_control(t, tr.states[t], r.plan.controls[t]));
    u.tail = r.plan.tail;
    u.steady_state = u.controls.back();
    r.plan = std::move(u);
    return r;
  }

  const int H = T + opts.tail_extension;
  const Plan start = init ? init->extended(T) : default_initial_plan(problem, x0, T);
  const TailRule tail = opts.tail_extension > 0 ? TailRule::repeat_last : start.tail;
  Objective obj(problem, x0, T, H, opts.margin);

  VectorXd z = obj.pack(start);
  double J = obj.value(z);
  if (!std::isfinite(J)) {
    const auto feas = feasibility_check(problem, start, x0, opts.margin);
    throw std::invalid_argument("initial plan is infeasible (worst stage " +
                                std::to_string(feas.worst_stage) + ")");
  }

  SolveResult res;
  Objective::Eval ev = obj.gradient(z);
  // Stage-local curvature of the rewards, refreshed at every accepted
  // point; the discount factor makes it span many orders of magnitude.
  VectorXd Dinv = obj.curvature(z, ev.traj).cwiseInverse();
  std::deque<std::pair<VectorXd, VectorXd>> mem;  // (s, y) with y = -(g_new - g_old)

  auto direction = [&](const VectorXd& g) -> VectorXd {
    if (opts.method == SweepMethod::gradient) return g;
    VectorXd q = g;
    std::vector<double> alpha(mem.size());
    for (int i = static_cast<int>(mem.size()) - 1; i >= 0; --i) {
      const auto& [s, y] = mem[i];
      alpha[i] = s.dot(q) / y.dot(s);
      q -= alpha[i] * y;
    }
    double gamma = 1.0;
    if (!mem.empty()) {
      const auto& [s, y] = mem.back();
      gamma = s.dot(y) / y.dot(Dinv.cwiseProduct(y));
    }
    VectorXd r = gamma * Dinv.cwiseProduct(q);
    for (std::size_t i = 0; i < mem.size(); ++i) {
      const auto& [s, y] = mem[i];
      const double beta = y.dot(r) / y.dot(s);
      r += (alpha[i] - beta) * s;
    }
    return r;
  };

  const double noise = 1e-13;
  int it = 0;
  std::string why = "iteration limit";
  while (true) {
    const VectorXd gfree = obj.free_part(z, ev.grad);
    const double gsup = sup_abs(ev.grad);
    if (it == 0 && opts.log) opts.log({it, J, gsup, 0.0});
    if (gsup <= opts.internal_tol) {
      why = "residual below tolerance";
      break;
    }
    if (sup_abs(gfree) <= opts.internal_tol) {
      why = "stationary against the box";
      break;
    }
    if (it >= opts.max_iters) break;

    bool accepted = false;
    for (int attempt = 0; attempt < 2 && !accepted; ++attempt) {
      VectorXd d = direction(gfree);
      for (Eigen::Index i = 0; i < d.size(); ++i)
        if (gfree(i) == 0.0 && ev.grad(i) != 0.0) d(i) = 0.0;
      if (!(gfree.dot(d) > 0.0) || !d.allFinite()) {
        mem.clear();
        d = opts.method == SweepMethod::gradient ? gfree : VectorXd(Dinv.cwiseProduct(gfree));
      }
      double a = opts.method == SweepMethod::gradient ? opts.step : 1.0;
      for (int k = 0; k < 60; ++k, a *= 0.5) {
        VectorXd zn = z + a * d;
        obj.project(zn);
        const VectorXd s = zn - z;
        const double slope = ev.grad.dot(s);
        if (!(slope > 0.0)) continue;
        const double Jn = obj.value(zn);
        if (!std::isfinite(Jn)) continue;
        bool ok = Jn - J >= 1e-4 * slope;
        std::optional<Objective::Eval> evn;
        if (!ok && std::abs(Jn - J) <= noise * (1.0 + std::abs(J))) {
          // Below rounding of the index: judge the step by the trapezoid
          // estimate of the increase instead.
          evn = obj.gradient(zn);
          ok = 0.5 * (ev.grad + evn->grad).dot(s) >= 1e-4 * slope;
        }
        if (!ok) continue;
        if (!evn) evn = obj.gradient(zn);
        const VectorXd y = -(evn->grad - ev.grad);
        if (opts.method == SweepMethod::lbfgs && s.dot(y) > 1e-12 * s.norm() * y.norm()) {
          mem.emplace_back(s, y);
          if (static_cast<int>(mem.size()) > opts.memory) mem.pop_front();
        }
        z = std::move(zn);
        J = Jn;
        ev = std::move(*evn);
        if (opts.method == SweepMethod::lbfgs) Dinv = obj.curvature(z, ev.traj).cwiseInverse();
        accepted = true;
        res.values.push_back(J);
        if (opts.log) opts.log({it + 1, J, sup_abs(ev.grad), a});
        break;
      }
      if (!accepted) mem.clear();
      if (opts.method == SweepMethod::gradient) break;
    }
    ++it;
    if (!accepted) {
      why = "line search stalled";
      break;
    }
  }

  res.plan = obj.plan(z, tail);
  res.value = J;
  res.iterations = it;

  ResidualReport rep;
  rep.horizon = T;
  rep.eval_horizon = H;
  rep.tc_h = 1;
  for (int t = 0; t < T; ++t) rep.stationarity.push_back(ev.grad.segment(t * problem.control_dim(), problem.control_dim()).transpose());
  for (int t = 1; t < T; ++t)
    rep.recursion.push_back(ev.adj.at(t) - (ev.d[t].gx + ev.adj.at(t + 1) * ev.d[t].fx));
  CheckOptions co;
  co.stationarity_tol = opts.stationarity_tol;
  finalize_report(rep, co);
  // The finite-horizon transversality condition is lambda_T = dg_T/dx,
  // which the backward start imposes exactly.
  rep.tc_pass = true;
  res.report = std::move(rep);
  res.converged = res.report.stationarity_sup < opts.stationarity_tol;
  res.message = why;
  return res;
}

InfiniteHorizonResult solve_infinite_horizon(const StageProblem& problem, const VectorXd& x0,
                                             const InfiniteHorizonOptions& opts) {
  if (opts.horizons.empty()) throw std::invalid_argument("solve_infinite_horizon: no horizons");
  InfiniteHorizonResult out;
  std::optional<Plan> prev;
  for (int T : opts.horizons) {
    SweepOptions so = opts.sweep;
    so.tail_extension = opts.extension_factor * T;
    std::optional<Plan> init;
    if (prev) init = prev->extended(T);
    SolveResult r = solve_finite_horizon(problem, x0, T, init, so);
    HorizonStep step{T, kInf, r.iterations, r.converged};
    if (prev) {
      const int upto = prev->horizon() / 4;
      double change = 0.0;
      for (int t = 0; t <= upto && t < T; ++t)
        change = std::max(change, sup_abs(r.plan.controls[t] - prev->controls[t]));
      step.early_change = change;
    }
    out.steps.push_back(step);
    out.solve = std::move(r);
    prev = out.solve.plan;
    if (step.early_change < opts.stabilization_tol) {
      out.stabilized = true;
      if (opts.stop_when_stable) break;
    }
  }
  CheckOptions co = opts.check;
  if (co.tail_extension < 0) co.tail_extension = opts.extension_factor * out.solve.plan.horizon();
  out.check = check_plan(problem, out.solve.plan, x0, co);
  return out;
}

SufficiencyReport sufficiency_probe(const StageProblem& problem, const VectorXd& x0,
                                    const PlanRegion& region, const SufficiencyOptions& opts) {
  const int T = region.horizon;
  const int m = problem.control_dim();
  if (T < 1) throw std::invalid_argument("sufficiency_probe: horizon must be >= 1");
  if (region.lo.size() != m || region.hi.size() != m)
    throw std::invalid_argument("sufficiency_probe: region dimension mismatch");
  if (!problem.state_dependent_box()) {
    const VectorXd none = VectorXd::Zero(problem.state_dim());
    for (int t = 0; t < T; ++t) {
      const ControlBox b = problem.control_box(t, none);
      if ((region.lo.array() < b.lo.array()).any() || (region.hi.array() > b.hi.array()).any())
        throw std::invalid_argument("sufficiency_probe: region leaves the control box");
    }
  }
  if (!region.lo.allFinite() || !region.hi.allFinite() || (region.lo.array() >= region.hi.array()).any())
    throw std::invalid_argument("sufficiency_probe: region must be a bounded, non-empty box");

  // Sample every chord up front so the result does not depend on threads.
  std::mt19937_64 rng(opts.seed);
  std::vector<std::pair<Plan, Plan>> chords(opts.n_chords);
  for (auto& [p, q] : chords) {
    for (Plan* plan : {&p, &q}) {
      for (int t = 0; t < T; ++t) {
        VectorXd u(m);
        for (int i = 0; i < m; ++i)
          u(i) = std::uniform_real_distribution<double>(region.lo(i), region.hi(i))(rng);
        plan->controls.push_back(u);
      }
    }
  }

  std::vector<double> slack(opts.n_chords, kInf);
  std::vector<char> skipped(opts.n_chords, 0);
  auto value = [&](const Plan& plan) {
    if (problem.state_dependent_box() && !feasibility_check(problem, plan, x0).pass)
      throw DomainError("plan leaves the control set");
    return truncated_value(problem, plan, rollout(problem, plan, x0));
  };
  auto work = [&](int begin, int step) {
    for (int c = begin; c < opts.n_chords; c += step) {
      const auto& [p, q] = chords[c];
      try {
        const double vp = value(p), vq = value(q);
        double worst = kInf;
        for (double lam : {0.25, 0.5, 0.75}) {
          Plan mix;
          for (int t = 0; t < T; ++t)
            mix.controls.push_back(lam * p.controls[t] + (1.0 - lam) * q.controls[t]);
          const double gap = value(mix) - (lam * vp + (1.0 - lam) * vq);
          worst = std::min(worst, gap);
        }
        // End points of the grid have zero slack by construction.
        slack[c] = std::min(worst, 0.0);
      } catch (const std::exception&) {
        skipped[c] = 1;
      }
    }
  };
  const int threads = std::max(1, opts.threads);
  if (threads == 1) {
    work(0, 1);
  } else {
    std::vector<std::thread> pool;
    for (int k = 0; k < threads; ++k) pool.emplace_back(work, k, threads);
    for (auto& th : pool) th.join();
  }

  SufficiencyReport rep;
  rep.n_chords = opts.n_chords;
  rep.min_slack = kInf;
  for (int c = 0; c < opts.n_chords; ++c) {
    if (skipped[c]) {
      ++rep.skipped;
      continue;
    }
    ++rep.evaluated;
    rep.slack.push_back(slack[c]);
    rep.min_slack = std::min(rep.min_slack, slack[c]);
  }
  if (rep.evaluated == 0) rep.min_slack = 0.0;
  rep.convexity = problem.state_dependent_box() ? "unverified" : "box";
  rep.minorant = opts.minorant ? "user" : "heuristic";
  const bool ok = rep.evaluated > 0 && rep.min_slack >= opts.slack_tol && rep.convexity == "box";
  rep.verdict = ok ? "CERTIFIED" : "NOT-CERTIFIED";
  return rep;
}

}  // namespace dmp
