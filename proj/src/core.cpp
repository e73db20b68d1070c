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

#include "dmp/core.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <limits>

namespace dmp {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

}  // namespace

double StageProblem::terminal_reward(const VectorXd&) const { return 0.0; }

RowVectorXd StageProblem::terminal_gradient(const VectorXd& x) const {
  return RowVectorXd::Zero(x.size());
}

std::pair<MatrixXd, MatrixXd> StageProblem::box_jacobian(int, const VectorXd& x) const {
  const int m = control_dim(), n = static_cast<int>(x.size());
  return {MatrixXd::Zero(m, n), MatrixXd::Zero(m, n)};
}

std::optional<expr::Expr> parse_bound(const std::string& text, const expr::Signature& sig,
                                      double& fixed) {
  std::string s;
  for (char c : text)
    if (!std::isspace(static_cast<unsigned char>(c))) s += c;
  if (s == "inf" || s == "+inf") {
    fixed = kInf;
    return std::nullopt;
  }
  if (s == "-inf") {
    fixed = -kInf;
    return std::nullopt;
  }
  expr::Signature bound_sig{sig.state_dim, 0, sig.params};
  expr::Expr e = expr::parse(text, bound_sig);
  if (!e.uses_state() && !e.uses_time()) {
    fixed = e.evaluate(expr::Point<double>{{}, {}, 0.0, {}});
  }
  return e;
}

ExpressionProblem::ExpressionProblem(ProblemDefinition def)
    : def_(std::move(def)), n_(def_.state_dim), m_(def_.control_dim) {
  if (n_ < 1 || m_ < 1) throw std::invalid_argument("state and control dimensions must be >= 1");
  if (static_cast<int>(def_.dynamics.size()) != n_)
    throw std::invalid_argument("expected " + std::to_string(n_) + " dynamics expressions, got " +
                                std::to_string(def_.dynamics.size()));
  std::vector<std::string> names;
  for (const auto& [name, value] : def_.params) {
    names.push_back(name);
    values_.push_back(value);
  }
  const expr::Signature sig{n_, m_, names};
  for (const auto& f : def_.dynamics) dynamics_.push_back(expr::parse(f, sig));
  reward_ = expr::parse(def_.reward, sig);
  if (def_.terminal) {
    terminal_ = expr::parse(*def_.terminal, expr::Signature{n_, 0, names});
  }
  if (def_.bounds.empty()) def_.bounds.assign(m_, {"-inf", "inf"});
  if (static_cast<int>(def_.bounds.size()) != m_)
    throw std::invalid_argument("expected " + std::to_string(m_) + " control bounds");
  for (const auto& [lo, hi] : def_.bounds) {
    Bound l, h;
    l.e = parse_bound(lo, sig, l.fixed);
    h.e = parse_bound(hi, sig, h.fixed);
    // Constant bounds are folded; only state/time dependent ones stay live.
    if (l.e && !l.e->uses_state() && !l.e->uses_time()) l.e.reset();
    if (h.e && !h.e->uses_state() && !h.e->uses_time()) h.e.reset();
    state_box_ |= (l.e && l.e->uses_state()) || (h.e && h.e->uses_state());
    lo_.push_back(std::move(l));
    hi_.push_back(std::move(h));
  }
  for (int i = 0; i < m_; ++i) {
    if (!lo_[i].e && !hi_[i].e && !(lo_[i].fixed < hi_[i].fixed))
      throw std::invalid_argument("control box for u" + std::to_string(i + 1) +
                                  " is empty (lo >= hi)");
  }
}

VectorXd ExpressionProblem::dynamics(int t, const VectorXd& x, const VectorXd& u) const {
  const expr::Point<double> p{std::span<const double>(x.data(), x.size()),
                              std::span<const double>(u.data(), u.size()),
                              static_cast<double>(t), values_};
  VectorXd out(n_);
  for (int i = 0; i < n_; ++i) out(i) = dynamics_[i].evaluate(p);
  return out;
}

double ExpressionProblem::reward(int t, const VectorXd& x, const VectorXd& u) const {
  return reward_.evaluate(expr::Point<double>{std::span<const double>(x.data(), x.size()),
                                              std::span<const double>(u.data(), u.size()),
                                              static_cast<double>(t), values_});
}

StageDerivatives ExpressionProblem::derivatives(int t, const VectorXd& x,
                                                const VectorXd& u) const {
  StageDerivatives d{MatrixXd(n_, n_), MatrixXd(n_, m_), RowVectorXd(n_), RowVectorXd(m_)};
  std::vector<Dual> xs(n_), us(m_);
  for (int i = 0; i < n_; ++i) xs[i] = Dual(x(i));
  for (int j = 0; j < m_; ++j) us[j] = Dual(u(j));
  const expr::Point<Dual> p{xs, us, Dual(static_cast<double>(t)), values_};
  for (int k = 0; k < n_ + m_; ++k) {
    Dual& seed = k < n_ ? xs[k] : us[k - n_];
    seed.deriv = 1.0;
    for (int i = 0; i < n_; ++i) {
      const double d_i = dynamics_[i].evaluate(p).deriv;
      if (k < n_) {
        d.fx(i, k) = d_i;
      } else {
        d.fu(i, k - n_) = d_i;
      }
    }
    const double dg = reward_.evaluate(p).deriv;
    if (k < n_) {
      d.gx(k) = dg;
    } else {
      d.gu(k - n_) = dg;
    }
    seed.deriv = 0.0;
  }
  return d;
}

double ExpressionProblem::terminal_reward(const VectorXd& x) const {
  if (terminal_.empty()) return 0.0;
  return terminal_.evaluate(
      expr::Point<double>{std::span<const double>(x.data(), x.size()), {}, 0.0, values_});
}

RowVectorXd ExpressionProblem::terminal_gradient(const VectorXd& x) const {
  RowVectorXd g = RowVectorXd::Zero(n_);
  if (terminal_.empty()) return g;
  std::vector<Dual> xs(n_);
  for (int i = 0; i < n_; ++i) xs[i] = Dual(x(i));
  for (int k = 0; k < n_; ++k) {
    xs[k].deriv = 1.0;
    g(k) = terminal_.evaluate(expr::Point<Dual>{xs, {}, Dual(0.0), values_}).deriv;
    xs[k].deriv = 0.0;
  }
  return g;
}

double ExpressionProblem::bound_value(const Bound& b, int t, const VectorXd& x) const {
  if (!b.e) return b.fixed;
  return b.e->evaluate(expr::Point<double>{std::span<const double>(x.data(), x.size()), {},
                                           static_cast<double>(t), values_});
}

ControlBox ExpressionProblem::control_box(int t, const VectorXd& x) const {
  ControlBox box{VectorXd(m_), VectorXd(m_)};
  for (int i = 0; i < m_; ++i) {
    box.lo(i) = bound_value(lo_[i], t, x);
    box.hi(i) = bound_value(hi_[i], t, x);
  }
  return box;
}

RowVectorXd ExpressionProblem::bound_gradient(const Bound& b, int t, const VectorXd& x) const {
  RowVectorXd g = RowVectorXd::Zero(n_);
  if (!b.e) return g;
  std::vector<Dual> xs(n_);
  for (int i = 0; i < n_; ++i) xs[i] = Dual(x(i));
  for (int k = 0; k < n_; ++k) {
    xs[k].deriv = 1.0;
    g(k) = b.e->evaluate(expr::Point<Dual>{xs, {}, Dual(static_cast<double>(t)), values_}).deriv;
    xs[k].deriv = 0.0;
  }
  return g;
}

std::pair<MatrixXd, MatrixXd> ExpressionProblem::box_jacobian(int t, const VectorXd& x) const {
  std::pair<MatrixXd, MatrixXd> out{MatrixXd::Zero(m_, n_), MatrixXd::Zero(m_, n_)};
  if (!state_box_) return out;
  for (int i = 0; i < m_; ++i) {
    out.first.row(i) = bound_gradient(lo_[i], t, x);
    out.second.row(i) = bound_gradient(hi_[i], t, x);
  }
  return out;
}

const char* to_string(TailRule rule) {
  switch (rule) {
    case TailRule::repeat_last:
      return "repeat_last";
    case TailRule::zero:
      return "zero";
    case TailRule::steady_state:
      return "steady_state";
  }
  return "?";
}

TailRule tail_rule_from_string(const std::string& s) {
  if (s == "repeat_last") return TailRule::repeat_last;
  if (s == "zero") return TailRule::zero;
  if (s == "steady_state") return TailRule::steady_state;
  throw std::invalid_argument("unknown tail rule '" + s + "'");
}

VectorXd Plan::control_at(int t) const {
  if (t < horizon()) return controls[t];
  const Eigen::Index m = controls.empty() ? steady_state.size() : controls.front().size();
  switch (tail) {
    case TailRule::repeat_last:
      if (controls.empty()) return VectorXd::Zero(m);
      return controls.back();
    case TailRule::zero:
      return VectorXd::Zero(m);
    case TailRule::steady_state:
      return steady_state;
  }
  return VectorXd::Zero(m);
}

Plan Plan::extended(int h) const {
  Plan out = *this;
  out.controls.reserve(std::max(h, horizon()));
  for (int t = horizon(); t < h; ++t) out.controls.push_back(control_at(t));
  return out;
}

Plan Plan::constant(int h, const VectorXd& u, TailRule tail) {
  Plan p;
  p.controls.assign(h, u);
  p.tail = tail;
  p.steady_state = u;
  return p;
}

Trajectory rollout(const StageProblem& problem, const Plan& plan, const VectorXd& x0) {
  if (!x0.allFinite()) throw RolloutError("initial state is not finite", 0);
  Trajectory traj;
  traj.states.reserve(plan.horizon() + 1);
  traj.states.push_back(x0);
  for (int t = 0; t < plan.horizon(); ++t) {
    VectorXd next;
    try {
      next = problem.dynamics(t, traj.states.back(), plan.controls[t]);
    } catch (const DomainError& e) {
      throw RolloutError("dynamics domain error at stage " + std::to_string(t) + ": " + e.what(),
                         t);
    }
    if (!next.allFinite())
      throw RolloutError("non-finite state at stage " + std::to_string(t + 1), t + 1);
    traj.states.push_back(std::move(next));
  }
  return traj;
}

double truncated_value(const StageProblem& problem, const Plan& plan, const Trajectory& traj) {
  double value = 0.0;
  for (int t = 0; t < plan.horizon(); ++t) {
    try {
      value += problem.reward(t, traj.states[t], plan.controls[t]);
    } catch (const DomainError& e) {
      throw RolloutError("reward domain error at stage " + std::to_string(t) + ": " + e.what(), t);
    }
  }
  if (problem.has_terminal_reward()) {
    try {
      value += problem.terminal_reward(traj.states.back());
    } catch (const DomainError& e) {
      throw RolloutError(std::string("terminal reward domain error: ") + e.what(), plan.horizon());
    }
  }
  return value;
}

RewardSummary total_reward(const StageProblem& problem, const Plan& plan, const VectorXd& x0,
                           double tail_tol) {
  const Trajectory traj = rollout(problem, plan, x0);
  RewardSummary out;
  out.value = truncated_value(problem, plan, traj);
  if (problem.has_terminal_reward() || plan.horizon() < 3) return out;

  // Geometric extrapolation from the last few stage rewards.
  const int T = plan.horizon();
  const int k = std::min(8, T - 1);
  double ratio = 0.0;
  int used = 0;
  for (int t = T - k; t < T; ++t) {
    const double prev = std::abs(problem.reward(t - 1, traj.states[t - 1], plan.controls[t - 1]));
    const double cur = std::abs(problem.reward(t, traj.states[t], plan.controls[t]));
    if (prev == 0.0) continue;
    ratio = std::max(ratio, cur / prev);
    ++used;
  }
  const double last = std::abs(problem.reward(T - 1, traj.states[T - 1], plan.controls[T - 1]));
  if (last == 0.0) {
    out.tail_bound = 0.0;
  } else if (used == 0 || ratio >= 1.0) {
    out.tail_bound = kInf;
  } else {
    out.tail_bound = last * ratio / (1.0 - ratio);
  }
  out.tail_flag = out.tail_bound > tail_tol;
  return out;
}

FeasibilityReport feasibility_check(const StageProblem& problem, const Plan& plan,
                                    const VectorXd& x0, double eps) {
  FeasibilityReport rep;
  rep.eps = eps;
  rep.min_margin = kInf;
  const bool along_path = problem.state_dependent_box();
  VectorXd x = along_path ? x0 : VectorXd::Zero(problem.state_dim());
  bool lost = false;  // the path left the dynamics' domain
  for (int t = 0; t < plan.horizon(); ++t) {
    const VectorXd& u = plan.controls[t];
    double margin = -kInf;
    if (!lost) {
      try {
        const ControlBox box = problem.control_box(t, x);
        margin = kInf;
        for (Eigen::Index i = 0; i < u.size(); ++i) {
          margin = std::min({margin, u(i) - box.lo(i), box.hi(i) - u(i)});
        }
      } catch (const DomainError&) {
        lost = true;
      }
      if (std::isnan(margin)) margin = -kInf;
      if (along_path) {
        try {
          x = problem.dynamics(t, x, u);
          lost = !x.allFinite();
        } catch (const DomainError&) {
          lost = true;
        }
      }
    }
    rep.margins.push_back(margin);
    if (margin < rep.min_margin) {
      rep.min_margin = margin;
      rep.worst_stage = t;
    }
  }
  rep.pass = rep.min_margin >= eps;
  return rep;
}

FeasibilityReport feasibility_check(const StageProblem& problem, const Plan& plan, double eps) {
  if (problem.state_dependent_box())
    throw std::invalid_argument("state-dependent control sets need the initial state");
  return feasibility_check(problem, plan, VectorXd::Zero(problem.state_dim()), eps);
}

std::vector<StageDerivatives> linearize(const StageProblem& problem, const Plan& plan,
                                        const Trajectory& traj, int count) {
  std::vector<StageDerivatives> out;
  out.reserve(count);
  for (int t = 0; t < count; ++t) {
    try {
      out.push_back(problem.derivatives(t, traj.states.at(t), plan.control_at(t)));
    } catch (const DomainError& e) {
      throw RolloutError("derivative domain error at stage " + std::to_string(t) + ": " + e.what(),
                         t);
    }
  }
  return out;
}

}  // namespace dmp
