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

#include "dmp/games.hpp"

#include <algorithm>
#include <deque>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "dmp/numdiff.hpp"

namespace dmp {

GameProblem::GameProblem(GameDefinition def) : def_(std::move(def)) {
  if (def_.control_dims.empty()) throw std::invalid_argument("a game needs at least one player");
  if (def_.rewards.size() != def_.control_dims.size())
    throw std::invalid_argument("need exactly one reward per player");
  for (int m : def_.control_dims) {
    if (m < 1) throw std::invalid_argument("player control dimension must be >= 1");
    offsets_.push_back(total_);
    total_ += m;
  }
  for (const auto& reward : def_.rewards) {
    ProblemDefinition pd;
    pd.name = def_.name;
    pd.state_dim = def_.state_dim;
    pd.control_dim = total_;
    pd.params = def_.params;
    pd.dynamics = def_.dynamics;
    pd.reward = reward;
    pd.bounds = def_.bounds;
    joint_.push_back(std::make_shared<const ExpressionProblem>(std::move(pd)));
  }
}

PlayerProblem::PlayerProblem(const GameProblem& game, MultiStrategy frozen, int player)
    : game_(game), frozen_(std::move(frozen)), j_(player) {
  if (player < 0 || player >= game.players()) throw std::out_of_range("no such player");
  if (static_cast<int>(frozen_.size()) != game.players())
    throw std::invalid_argument("multistrategy size does not match the number of players");
}

VectorXd PlayerProblem::assemble(int t, const VectorXd& u) const {
  VectorXd all(game_.total_controls());
  for (int k = 0; k < game_.players(); ++k) {
    all.segment(game_.offset(k), game_.control_dim(k)) = k == j_ ? u : frozen_[k].control_at(t);
  }
  return all;
}

VectorXd PlayerProblem::dynamics(int t, const VectorXd& x, const VectorXd& u) const {
  return game_.joint(j_).dynamics(t, x, assemble(t, u));
}

double PlayerProblem::reward(int t, const VectorXd& x, const VectorXd& u) const {
  return game_.joint(j_).reward(t, x, assemble(t, u));
}

StageDerivatives PlayerProblem::derivatives(int t, const VectorXd& x, const VectorXd& u) const {
  StageDerivatives all = game_.joint(j_).derivatives(t, x, assemble(t, u));
  const int o = game_.offset(j_), m = game_.control_dim(j_);
  StageDerivatives d;
  d.fx = std::move(all.fx);
  d.gx = std::move(all.gx);
  d.fu = all.fu.middleCols(o, m);
  d.gu = all.gu.segment(o, m);
  return d;
}

ControlBox PlayerProblem::control_box(int t, const VectorXd& x) const {
  const ControlBox b = game_.joint(j_).control_box(t, x);
  const int o = game_.offset(j_), m = game_.control_dim(j_);
  return {b.lo.segment(o, m), b.hi.segment(o, m)};
}

std::pair<MatrixXd, MatrixXd> PlayerProblem::box_jacobian(int t, const VectorXd& x) const {
  auto [lo, hi] = game_.joint(j_).box_jacobian(t, x);
  const int o = game_.offset(j_), m = game_.control_dim(j_);
  return {lo.middleRows(o, m), hi.middleRows(o, m)};
}

Plan joint_plan(const GameProblem& game, const MultiStrategy& ms) {
  if (static_cast<int>(ms.size()) != game.players())
    throw std::invalid_argument("multistrategy size does not match the number of players");
  const int T = ms.front().horizon();
  for (const auto& p : ms)
    if (p.horizon() != T) throw std::invalid_argument("player plans must share the horizon");
  Plan out;
  out.tail = TailRule::steady_state;
  for (int t = 0; t <= T; ++t) {
    VectorXd u(game.total_controls());
    for (int k = 0; k < game.players(); ++k) u.segment(game.offset(k), game.control_dim(k)) = ms[k].control_at(t);
    if (t < T) {
      out.controls.push_back(u);
    } else {
      out.steady_state = u;
    }
  }
  return out;
}

Trajectory game_rollout(const GameProblem& game, const MultiStrategy& ms, const VectorXd& x0) {
  return rollout(game.joint(0), joint_plan(game, ms), x0);
}

AdjointSeq player_adjoint(const GameProblem& game, const MultiStrategy& ms, int player,
                          const VectorXd& x0, TerminalMode terminal) {
  const PlayerProblem view(game, ms, player);
  const Plan& own = ms.at(player);
  return adjoint_backward(view, rollout(view, own, x0), own, terminal);
}

std::vector<ResidualReport> nash_residuals(const GameProblem& game, const MultiStrategy& ms,
                                           const VectorXd& x0, const CheckOptions& opts) {
  std::vector<ResidualReport> out;
  for (int j = 0; j < game.players(); ++j) {
    const PlayerProblem view(game, ms, j);
    out.push_back(check_plan(view, ms[j], x0, opts));
  }
  return out;
}

NashResult solve_nash_br(const GameProblem& game, const VectorXd& x0, int T,
                         const NashOptions& opts, const std::optional<MultiStrategy>& init) {
  if (T < 1) throw std::invalid_argument("solve_nash_br: T must be >= 1");
  NashResult res;
  if (init) {
    res.ms = *init;
  } else {
    // Box midpoints for every player, taken from the joint box along the
    // midpoint path.
    const Plan mid = default_initial_plan(game.joint(0), x0, T);
    res.ms.resize(game.players());
    for (int k = 0; k < game.players(); ++k) {
      for (int t = 0; t < T; ++t)
        res.ms[k].controls.push_back(mid.controls[t].segment(game.offset(k), game.control_dim(k)));
    }
  }
  for (auto& p : res.ms) {
    p = p.extended(T);
    if (opts.sweep.tail_extension > 0) p.tail = TailRule::repeat_last;
  }

  const int M = game.players();
  auto pack = [&](const MultiStrategy& ms) {
    VectorXd z(static_cast<Eigen::Index>(T) * game.total_controls());
    for (int t = 0; t < T; ++t)
      for (int k = 0; k < M; ++k)
        z.segment(t * game.total_controls() + game.offset(k), game.control_dim(k)) = ms[k].controls[t];
    return z;
  };
  auto unpack = [&](const VectorXd& z, MultiStrategy& ms) {
    for (int t = 0; t < T; ++t)
      for (int k = 0; k < M; ++k)
        ms[k].controls[t] = z.segment(t * game.total_controls() + game.offset(k), game.control_dim(k));
    for (auto& p : ms) p.steady_state = p.controls.back();
  };

  // Residual and image differences of past sweeps for the mixing step.
  std::deque<std::pair<VectorXd, VectorXd>> hist;
  VectorXd f_prev, g_prev;

  res.message = "outer iteration limit";
  for (int outer = 0; outer < opts.max_outer; ++outer) {
    const VectorXd z = pack(res.ms);
    MultiStrategy next = res.ms;
    for (int j = 0; j < M; ++j) {
      const PlayerProblem view(game, next, j);
      SolveResult r = solve_finite_horizon(view, x0, T, next[j], opts.sweep);
      next[j] = std::move(r.plan);
    }
    const VectorXd g = pack(next);
    const VectorXd f = g - z;
    const double change = f.size() ? f.cwiseAbs().maxCoeff() : 0.0;
    res.trace.push_back(change);
    res.iterations = outer + 1;
    if (change < opts.tol) {
      res.ms = std::move(next);
      res.converged = true;
      res.message = "control change below tolerance";
      break;
    }

    bool mixed = false;
    if (opts.anderson_memory > 0) {
      if (f_prev.size()) {
        hist.emplace_back(f - f_prev, g - g_prev);
        if (static_cast<int>(hist.size()) > opts.anderson_memory) hist.pop_front();
      }
      f_prev = f;
      g_prev = g;
      if (!hist.empty()) {
        MatrixXd dF(f.size(), hist.size()), dG(f.size(), hist.size());
        for (std::size_t i = 0; i < hist.size(); ++i) {
          dF.col(i) = hist[i].first;
          dG.col(i) = hist[i].second;
        }
        const VectorXd gamma = dF.colPivHouseholderQr().solve(f);
        const VectorXd zn = g - dG * gamma;
        MultiStrategy cand = next;
        unpack(zn, cand);
        bool ok = zn.allFinite();
        for (int j = 0; ok && j < M; ++j)
          ok = feasibility_check(PlayerProblem(game, cand, j), cand[j], x0, opts.sweep.margin).pass;
        if (ok) {
          res.ms = std::move(cand);
          mixed = true;
        } else {
          hist.clear();
        }
      }
    }
    if (!mixed) res.ms = std::move(next);

    const int w = opts.cycle_window;
    if (w > 0 && static_cast<int>(res.trace.size()) > w) {
      const double before = res.trace[res.trace.size() - 1 - w];
      bool stuck = true;
      for (std::size_t i = res.trace.size() - w; i < res.trace.size(); ++i)
        if (res.trace[i] < before) stuck = false;
      if (stuck) {
        res.cycling = true;
        res.message = "best responses are cycling";
        break;
      }
    }
  }
  res.reports = nash_residuals(game, res.ms, x0, opts.check);
  return res;
}

VectorXd nash_stationarity(const GameProblem& game, const MultiStrategy& ms, const VectorXd& x0) {
  const int T = ms.front().horizon();
  const int W = game.total_controls();
  VectorXd out(static_cast<Eigen::Index>(T) * W);
  for (int j = 0; j < game.players(); ++j) {
    const PlayerProblem view(game, ms, j);
    const Trajectory traj = rollout(view, ms[j], x0);
    const AdjointSeq adj = adjoint_backward(view, traj, ms[j], TerminalMode::from_terminal_reward);
    const auto r = stationarity_residuals(view, traj, ms[j], adj);
    for (int t = 0; t < T; ++t) out.segment(t * W + game.offset(j), game.control_dim(j)) = r[t].transpose();
  }
  return out;
}

NashResult solve_nash_newton(const GameProblem& game, const VectorXd& x0, int T,
                             const NashNewtonOptions& opts,
                             const std::optional<MultiStrategy>& init) {
  if (T < 1) throw std::invalid_argument("solve_nash_newton: T must be >= 1");
  if (game.joint(0).state_dependent_box())
    throw std::invalid_argument("solve_nash_newton: control sets move with the state");
  const int M = game.players();
  const int W = game.total_controls();
  const Eigen::Index n = static_cast<Eigen::Index>(T) * W;

  VectorXd lo(n), hi(n);
  const VectorXd none = VectorXd::Zero(game.state_dim());
  for (int t = 0; t < T; ++t) {
    const ControlBox b = game.joint(0).control_box(t, none);
    lo.segment(t * W, W) = b.lo.array() + opts.margin;
    hi.segment(t * W, W) = b.hi.array() - opts.margin;
  }

  MultiStrategy ms(M);
  if (init) {
    ms = *init;
    for (auto& p : ms) p = p.extended(T);
  } else {
    const Plan mid = default_initial_plan(game.joint(0), x0, T);
    for (int k = 0; k < M; ++k)
      for (int t = 0; t < T; ++t)
        ms[k].controls.push_back(mid.controls[t].segment(game.offset(k), game.control_dim(k)));
  }
  auto unpack = [&](const VectorXd& z) {
    MultiStrategy out = ms;
    for (int k = 0; k < M; ++k) {
      out[k].controls.resize(T);
      for (int t = 0; t < T; ++t)
        out[k].controls[t] = z.segment(t * W + game.offset(k), game.control_dim(k));
      out[k].tail = TailRule::repeat_last;
      out[k].steady_state = out[k].controls.back();
    }
    return out;
  };
  VectorXd z(n);
  for (int t = 0; t < T; ++t)
    for (int k = 0; k < M; ++k) z.segment(t * W + game.offset(k), game.control_dim(k)) = ms[k].controls[t];
  z = z.cwiseMax(lo).cwiseMin(hi);

  auto residual = [&](const VectorXd& v) { return nash_stationarity(game, unpack(v), x0); };
  auto sup = [](const VectorXd& v) { return v.size() ? v.cwiseAbs().maxCoeff() : 0.0; };

  NashResult res;
  res.message = "iteration limit";
  VectorXd f = residual(z);
  VectorXd weight;  // merit scaling, fixed at the first Jacobian
  numdiff::FdConfig fd;
  fd.step_rel = opts.fd_step;
  fd.lower = lo;
  fd.upper = hi;
  for (int it = 0; it < opts.max_iters; ++it) {
    if (sup(f) <= opts.tol) {
      res.message = "residual below tolerance";
      break;
    }
    const MatrixXd J = numdiff::fd_jacobian(residual, z, fd);
    if (!weight.size()) {
      weight = J.diagonal().cwiseAbs();
      const double top = weight.maxCoeff();
      weight = weight.cwiseMax(top > 0.0 ? 1e-12 * top : 1.0).cwiseInverse();
    }
    const VectorXd d = J.colPivHouseholderQr().solve(-f);
    if (!d.allFinite()) {
      res.message = "singular Jacobian";
      break;
    }
    const double m0 = weight.cwiseProduct(f).norm();
    bool accepted = false;
    double a = 1.0;
    for (int k = 0; k < 40; ++k, a *= 0.5) {
      const VectorXd zn = (z + a * d).cwiseMax(lo).cwiseMin(hi);
      VectorXd fn;
      try {
        fn = residual(zn);
      } catch (const std::exception&) {
        continue;
      }
      if (!fn.allFinite()) continue;
      if (weight.cwiseProduct(fn).norm() <= (1.0 - 1e-4 * a) * m0) {
        res.trace.push_back(sup(zn - z));
        z = zn;
        f = std::move(fn);
        accepted = true;
        break;
      }
    }
    res.iterations = it + 1;
    if (!accepted) {
      res.message = "line search stalled";
      break;
    }
  }
  if (res.message == "iteration limit" && sup(f) <= opts.tol) res.message = "residual below tolerance";
  res.ms = unpack(z);
  res.converged = sup(f) < opts.stationarity_tol;
  res.reports = nash_residuals(game, res.ms, x0, opts.check);
  return res;
}

}  // namespace dmp
