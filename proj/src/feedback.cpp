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

#include "dmp/feedback.hpp"

#include <cmath>
#include <cstdio>
#include <limits>
#include <stdexcept>

namespace dmp {

namespace {

std::string num(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  // Negative literals need parentheses under unary-minus precedence.
  return v < 0 ? std::string("(") + buf + ")" : std::string(buf);
}

double sup_norm(const RowVectorXd& v) { return v.size() ? v.cwiseAbs().maxCoeff() : 0.0; }

}  // namespace

FeedbackPolicy::FeedbackPolicy(std::vector<std::string> exprs,
                               std::vector<std::pair<std::string, double>> params, int state_dim)
    : n_(state_dim), sources_(std::move(exprs)), params_(std::move(params)) {
  if (n_ < 1) throw std::invalid_argument("policy state dimension must be >= 1");
  if (sources_.empty()) throw std::invalid_argument("policy needs at least one control");
  expr::Signature sig;
  sig.state_dim = n_;
  sig.control_dim = 0;
  for (const auto& [name, value] : params_) {
    sig.params.push_back(name);
    values_.push_back(value);
  }
  for (const auto& s : sources_) exprs_.push_back(expr::parse(s, sig));
}

FeedbackPolicy FeedbackPolicy::affine(const MatrixXd& C, const VectorXd& c) {
  if (C.rows() != c.size()) throw std::invalid_argument("affine policy: C and c disagree");
  std::vector<std::string> out;
  for (Eigen::Index i = 0; i < C.rows(); ++i) {
    std::string s = num(c(i));
    for (Eigen::Index j = 0; j < C.cols(); ++j)
      s += " + " + num(C(i, j)) + "*x" + std::to_string(j + 1);
    out.push_back(s);
  }
  FeedbackPolicy p(out, {}, static_cast<int>(C.cols()));
  p.family_ = "affine";
  return p;
}

FeedbackPolicy FeedbackPolicy::power(double d, double A, double alpha) {
  FeedbackPolicy p({"d*A*x1^alpha"}, {{"d", d}, {"A", A}, {"alpha", alpha}}, 1);
  p.family_ = "power";
  return p;
}

FeedbackPolicy FeedbackPolicy::linear_fraction(double alpha) {
  FeedbackPolicy p({"alpha*x1"}, {{"alpha", alpha}}, 1);
  p.family_ = "linear_fraction";
  return p;
}

FeedbackPolicy FeedbackPolicy::constant(const VectorXd& u, int state_dim) {
  std::vector<std::string> out;
  for (Eigen::Index i = 0; i < u.size(); ++i) out.push_back(num(u(i)));
  FeedbackPolicy p(out, {}, state_dim);
  p.family_ = "constant";
  return p;
}

VectorXd FeedbackPolicy::operator()(int t, const VectorXd& x) const {
  const expr::Point<double> p{{x.data(), static_cast<std::size_t>(x.size())}, {},
                              static_cast<double>(t), values_};
  VectorXd u(control_dim());
  for (int i = 0; i < control_dim(); ++i) u(i) = exprs_[i].evaluate(p);
  return u;
}

MatrixXd FeedbackPolicy::jacobian(int t, const VectorXd& x) const {
  std::vector<Dual> xs(n_);
  for (int j = 0; j < n_; ++j) xs[j] = Dual(x(j));
  const expr::Point<Dual> p{xs, {}, Dual(static_cast<double>(t)), values_};
  MatrixXd J(control_dim(), n_);
  for (int j = 0; j < n_; ++j) {
    xs[j].deriv = 1.0;
    for (int i = 0; i < control_dim(); ++i) J(i, j) = exprs_[i].evaluate(p).deriv;
    xs[j].deriv = 0.0;
  }
  return J;
}

MarkovPath markov_path(const StageProblem& problem, const FeedbackPolicy& policy,
                       const VectorXd& x0, int T) {
  if (policy.state_dim() != problem.state_dim() || policy.control_dim() != problem.control_dim())
    throw std::invalid_argument("policy dimensions do not match the problem");
  if (!x0.allFinite()) throw RolloutError("initial state is not finite", 0);
  MarkovPath out;
  out.traj.states.reserve(T + 1);
  out.traj.states.push_back(x0);
  out.plan.controls.reserve(T);
  VectorXd x = x0;
  for (int t = 0; t <= T; ++t) {
    VectorXd u;
    try {
      u = policy(t, x);
    } catch (const DomainError& e) {
      throw RolloutError("policy domain error at stage " + std::to_string(t) + ": " + e.what(), t);
    }
    if (t == T) {
      out.plan.tail = TailRule::steady_state;
      out.plan.steady_state = u;
      break;
    }
    try {
      x = problem.dynamics(t, x, u);
    } catch (const DomainError& e) {
      throw RolloutError("dynamics domain error at stage " + std::to_string(t) + ": " + e.what(), t);
    }
    if (!x.allFinite())
      throw RolloutError("non-finite state at stage " + std::to_string(t + 1), t + 1);
    out.plan.controls.push_back(std::move(u));
    out.traj.states.push_back(x);
  }
  return out;
}

Trajectory markov_rollout(const StageProblem& problem, const FeedbackPolicy& policy,
                          const VectorXd& x0, int T) {
  return markov_path(problem, policy, x0, T).traj;
}

std::vector<ClosedLoopStage> closed_loop_linearize(const StageProblem& problem,
                                                   const FeedbackPolicy& policy,
                                                   const MarkovPath& path, int count) {
  const auto d = linearize(problem, path.plan, path.traj, count);
  std::vector<ClosedLoopStage> out(count);
  for (int t = 0; t < count; ++t) {
    out[t].d = d[t];
    try {
      out[t].phi = policy.jacobian(t, path.traj.states[t]);
    } catch (const DomainError& e) {
      throw RolloutError("policy derivative domain error at stage " + std::to_string(t) + ": " +
                             e.what(),
                         t);
    }
  }
  return out;
}

AdjointSeq markov_adjoint(const std::vector<ClosedLoopStage>& stages) {
  if (stages.empty()) throw std::invalid_argument("markov_adjoint: no stages");
  const int T = static_cast<int>(stages.size()) - 1;
  AdjointSeq out;
  out.lambda.resize(T);
  RowVectorXd next = RowVectorXd::Zero(stages[0].d.gx.size());
  for (int t = T; t >= 1; --t) {
    RowVectorXd cur = stages[t].q() + next * stages[t].M();
    out.lambda[t - 1] = cur;
    next = std::move(cur);
  }
  return out;
}

AdjointSeq markov_adjoint(const StageProblem& problem, const FeedbackPolicy& policy,
                          const VectorXd& x0, int T) {
  const MarkovPath path = markov_path(problem, policy, x0, T);
  return markov_adjoint(closed_loop_linearize(problem, policy, path, T + 1));
}

RowVectorXd markov_adjoint_series(const StageProblem& problem, const FeedbackPolicy& policy,
                                  const MarkovPath& path, int t, int K) {
  if (t < 1 || K < 1) throw std::invalid_argument("markov_adjoint_series: need t >= 1, K >= 1");
  const int last = t + K - 1;
  if (last > path.traj.horizon())
    throw std::invalid_argument("markov_adjoint_series: K exceeds the available horizon");
  const int n = problem.state_dim();
  RowVectorXd sum = RowVectorXd::Zero(n);
  MatrixXd prod = MatrixXd::Identity(n, n);
  for (int k = t; k <= last; ++k) {
    ClosedLoopStage s;
    s.d = problem.derivatives(k, path.traj.states[k], path.plan.control_at(k));
    s.phi = policy.jacobian(k, path.traj.states[k]);
    // g_x,k prod + g_u,k Phi_k prod, kept as the two series terms
    sum += s.d.gx * prod + s.d.gu * s.phi * prod;
    prod = s.M() * prod;
  }
  return sum;
}

ResidualReport markov_residuals(const StageProblem& problem, const FeedbackPolicy& policy,
                                const VectorXd& x0, int T, const CheckOptions& opts,
                                AdjointSeq* adjoints) {
  const int H = T + resolve_extension(opts, T);
  const int n = problem.state_dim();
  const MarkovPath path = markov_path(problem, policy, x0, H);
  const auto st = closed_loop_linearize(problem, policy, path, H + 1);
  AdjointSeq adj = markov_adjoint(st);

  ResidualReport rep;
  rep.horizon = T;
  rep.eval_horizon = H;
  rep.tc_h = opts.tc_h;
  rep.stationarity.resize(T);
  for (int t = 0; t < T; ++t) rep.stationarity[t] = st[t].d.gu + adj.at(t + 1) * st[t].d.fu;
  for (int t = 1; t < T; ++t)
    rep.recursion.push_back(adj.at(t) - (st[t].d.gx + adj.at(t + 1) * st[t].d.fx));
  MatrixXd prod = MatrixXd::Identity(n, n);
  for (int t = opts.tc_h; t <= H; ++t) {
    rep.tc_profile.push_back(adj.at(t) * prod);
    if (t < H) prod = st[t].M() * prod;
  }
  finalize_report(rep, opts);
  if (adjoints) *adjoints = std::move(adj);
  return rep;
}

double markov_value(const StageProblem& problem, const FeedbackPolicy& policy,
                    const VectorXd& x0, int T, int tau, const VectorXd& y) {
  VectorXd x = x0;
  double sum = 0.0;
  for (int t = 0; t < T; ++t) {
    VectorXd u = policy(t, x);
    if (t == tau) u += y;
    sum += problem.reward(t, x, u);
    x = problem.dynamics(t, x, u);
  }
  if (problem.has_terminal_reward()) sum += problem.terminal_reward(x);
  return sum;
}

double markov_gateaux_differential(const StageProblem& problem, const FeedbackPolicy& policy,
                                   const VectorXd& x0, int tau, const VectorXd& y, int T) {
  if (tau < 0 || tau >= T)
    throw std::invalid_argument("markov_gateaux_differential: need 0 <= tau < T");
  const MarkovPath path = markov_path(problem, policy, x0, T);
  const auto st = closed_loop_linearize(problem, policy, path, T);
  double sum = st[tau].d.gu.dot(y);
  VectorXd v = st[tau].d.fu * y;
  for (int t = tau + 1; t < T; ++t) {
    sum += st[t].q().dot(v);
    v = st[t].M() * v;
  }
  if (problem.has_terminal_reward())
    sum += problem.terminal_gradient(path.traj.states[T]).dot(v);
  return sum;
}

RhoGenerator closed_loop_rho(const StageProblem& problem, const FeedbackPolicy& policy,
                             const VectorXd& x0, int tau) {
  const VectorXd x_tau = markov_rollout(problem, policy, x0, tau).states.back();
  return [&problem, policy, x_tau, tau](const VectorXd& u, int count) {
    std::vector<RowVectorXd> rho;
    rho.reserve(count);
    VectorXd x = problem.dynamics(tau, x_tau, u);
    MatrixXd prod = MatrixXd::Identity(x.size(), x.size());
    for (int t = tau + 1; t <= tau + count; ++t) {
      ClosedLoopStage s;
      const VectorXd ut = policy(t, x);
      s.d = problem.derivatives(t, x, ut);
      s.phi = policy.jacobian(t, x);
      rho.push_back(s.q() * prod);
      prod = s.M() * prod;
      x = problem.dynamics(t, x, ut);
    }
    return rho;
  };
}

AmpProbeReport check_assumption_amp_ms(const StageProblem& problem, const FeedbackPolicy& policy,
                                       const VectorXd& x0, int tau, double radius, int n_samples,
                                       const std::vector<int>& K_list, std::uint64_t seed) {
  const MarkovPath path = markov_path(problem, policy, x0, tau);
  const VectorXd& x_tau = path.traj.states.back();
  return amp_probe(closed_loop_rho(problem, policy, x0, tau), policy(tau, x_tau),
                   problem.control_box(tau, x_tau), tau, radius, n_samples, K_list, seed);
}

EulerProblem::EulerProblem(ProblemDefinition def) {
  def.control_dim = def.state_dim;
  def.dynamics.clear();
  for (int i = 1; i <= def.state_dim; ++i) def.dynamics.push_back("u" + std::to_string(i));
  problem_ = std::make_shared<const ExpressionProblem>(std::move(def));
}

std::pair<RowVectorXd, RowVectorXd> EulerProblem::gradients(int t, const VectorXd& x,
                                                            const VectorXd& y) const {
  StageDerivatives d = problem_->derivatives(t, x, y);
  return {std::move(d.gx), std::move(d.gu)};
}

EulerReport euler_residuals(const EulerProblem& problem, const Trajectory& traj,
                            const std::vector<MatrixXd>& policy_jacobians, int h, double ee_tol,
                            double tc_tol) {
  const int T = traj.horizon();
  if (T < 2) throw std::invalid_argument("euler_residuals: need at least three states");
  if (h < 1) throw std::invalid_argument("euler_residuals: h must be >= 1");
  if (static_cast<int>(policy_jacobians.size()) < T)
    throw std::invalid_argument("euler_residuals: need policy Jacobians for s < T");
  const int n = problem.state_dim();
  std::vector<RowVectorXd> gx(T), gy(T);
  for (int t = 0; t < T; ++t) {
    try {
      std::tie(gx[t], gy[t]) = problem.gradients(t, traj.states[t], traj.states[t + 1]);
    } catch (const DomainError& e) {
      throw RolloutError("reward gradient domain error at stage " + std::to_string(t) + ": " +
                             e.what(),
                         t);
    }
  }
  EulerReport rep;
  for (int t = 1; t < T; ++t) {
    rep.ee.push_back(gy[t - 1] + gx[t]);
    const double s = sup_norm(rep.ee.back());
    if (!(s <= rep.ee_sup)) {
      rep.ee_sup = s;
      rep.ee_worst = t;
    }
  }
  MatrixXd prod = MatrixXd::Identity(n, n);  // Phi_{t-1}...Phi_h
  std::vector<double> norms;
  for (int t = h; t <= T; ++t) {
    rep.tc_profile.push_back(gy[t - 1] * prod);
    norms.push_back(sup_norm(rep.tc_profile.back()));
    if (t < T) prod = policy_jacobians[t] * prod;
  }
  const std::size_t q0 = norms.size() < 4 ? 0 : norms.size() - norms.size() / 4;
  for (std::size_t i = q0; i < norms.size(); ++i)
    rep.tc_last_quarter_sup = std::max(
        rep.tc_last_quarter_sup, std::isnan(norms[i]) ? std::numeric_limits<double>::infinity() : norms[i]);
  rep.tc_fit = fit_profile_decay(norms);
  rep.ee_pass = rep.ee_sup <= ee_tol;
  rep.tc_pass = rep.tc_fit.rate < 1.0 && rep.tc_last_quarter_sup < tc_tol;
  return rep;
}

EulerReport euler_residuals(const EulerProblem& problem, const FeedbackPolicy& policy,
                            const VectorXd& x0, int T, const CheckOptions& opts) {
  const int H = T + resolve_extension(opts, T);
  const MarkovPath path = markov_path(problem.as_stage_problem(), policy, x0, H);
  std::vector<MatrixXd> jac;
  jac.reserve(H);
  for (int s = 0; s < H; ++s) jac.push_back(policy.jacobian(s, path.traj.states[s]));
  EulerReport rep =
      euler_residuals(problem, path.traj, jac, opts.tc_h, opts.stationarity_tol, opts.tc_tol);
  // Only stages inside the plan horizon count toward the verdict.
  rep.ee.resize(std::min<std::size_t>(rep.ee.size(), T > 1 ? T - 1 : 0));
  rep.ee_sup = 0.0;
  rep.ee_worst = -1;
  for (std::size_t i = 0; i < rep.ee.size(); ++i) {
    const double s = sup_norm(rep.ee[i]);
    if (!(s <= rep.ee_sup)) {
      rep.ee_sup = s;
      rep.ee_worst = static_cast<int>(i) + 1;
    }
  }
  rep.ee_pass = rep.ee_sup <= opts.stationarity_tol;
  return rep;
}

LinearEulerSolution solve_linear_euler(double b_coef, double mid_coef, double a_coef,
                                       const std::function<bool(double)>& stable) {
  if (b_coef == 0.0) throw std::invalid_argument("solve_linear_euler: leading coefficient is 0");
  const double disc = mid_coef * mid_coef - 4.0 * b_coef * a_coef;
  if (disc < 0.0) throw RootSelectionError("characteristic roots are complex");
  // Cancellation-free pair.
  const double q = 0.5 * (mid_coef + std::copysign(std::sqrt(disc), mid_coef));
  double z1 = q / b_coef;
  double z2 = q != 0.0 ? a_coef / q : z1;
  if (z1 > z2) std::swap(z1, z2);
  const bool s1 = stable(z1);
  const bool s2 = stable(z2);
  if (s1 && s2 && z1 != z2)
    throw RootSelectionError("both characteristic roots satisfy the stability rule");
  if (!s1 && !s2) throw RootSelectionError("no characteristic root satisfies the stability rule");
  LinearEulerSolution out;
  out.root = s1 ? z1 : z2;
  out.other_root = s1 ? z2 : z1;
  out.ratio = out.root;
  return out;
}

}  // namespace dmp
