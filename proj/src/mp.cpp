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

#include "dmp/mp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <stdexcept>

namespace dmp {

const char* to_string(AdjointProvenance p) {
  return p == AdjointProvenance::series ? "series" : "backward_recursion";
}

namespace {

double sup_norm(const RowVectorXd& v) { return v.size() ? v.cwiseAbs().maxCoeff() : 0.0; }

// lambda_t = g_x,t + lambda_{t+1} A_t for t = last..1, lambda_{last+1} given.
// Returns lambda_1..lambda_last followed by nothing else.
std::vector<RowVectorXd> recurse(const std::vector<StageDerivatives>& d, int last,
                                 RowVectorXd next) {
  std::vector<RowVectorXd> lam(last);
  for (int t = last; t >= 1; --t) {
    RowVectorXd cur = d[t].gx + next * d[t].fx;
    lam[t - 1] = cur;
    next = std::move(cur);
  }
  return lam;
}

Plan truncated(const Plan& plan, int T) {
  Plan p = plan.extended(T);
  p.controls.resize(T);
  return p;
}

}  // namespace

AdjointSeq adjoint_backward(const std::vector<StageDerivatives>& d, const RowVectorXd& seed) {
  if (d.empty()) throw std::invalid_argument("adjoint_backward: no stages");
  const int T = static_cast<int>(d.size()) - 1;
  AdjointSeq out;
  out.lambda = recurse(d, T, seed);
  return out;
}

AdjointSeq adjoint_backward(const StageProblem& problem, const Trajectory& traj, const Plan& plan,
                            const RowVectorXd& seed) {
  const int T = plan.horizon();
  if (traj.horizon() < T) throw std::invalid_argument("adjoint_backward: trajectory too short");
  if (seed.size() != problem.state_dim())
    throw std::invalid_argument("adjoint_backward: seed has wrong dimension");
  return adjoint_backward(linearize(problem, plan, traj, T + 1), seed);
}

AdjointSeq adjoint_backward(const StageProblem& problem, const Trajectory& traj, const Plan& plan,
                            TerminalMode terminal) {
  const int T = plan.horizon();
  const int n = problem.state_dim();
  if (traj.horizon() < T) throw std::invalid_argument("adjoint_backward: trajectory too short");
  if (terminal == TerminalMode::zero_seed)
    return adjoint_backward(problem, traj, plan, RowVectorXd::Zero(n));

  AdjointSeq out;
  if (T == 0) return out;
  RowVectorXd last = problem.has_terminal_reward() ? problem.terminal_gradient(traj.states[T])
                                                   : RowVectorXd::Zero(n);
  const auto d = linearize(problem, plan, traj, T);
  out.lambda = recurse(d, T - 1, last);
  out.lambda.push_back(last);
  return out;
}

RowVectorXd adjoint_series(const StageProblem& problem, const Trajectory& traj, const Plan& plan,
                           int t, int K) {
  if (t < 1 || K < 1) throw std::invalid_argument("adjoint_series: need t >= 1 and K >= 1");
  const int last = t + K - 1;
  if (last > traj.horizon())
    throw std::invalid_argument("adjoint_series: K exceeds the available horizon");
  const int n = problem.state_dim();
  RowVectorXd sum = RowVectorXd::Zero(n);
  MatrixXd prod = MatrixXd::Identity(n, n);  // A_{k-1}...A_t
  for (int k = t; k <= last; ++k) {
    const StageDerivatives d = problem.derivatives(k, traj.states[k], plan.control_at(k));
    sum += d.gx * prod;
    prod = d.fx * prod;
  }
  return sum;
}

std::vector<RowVectorXd> stationarity_residuals(const StageProblem& problem,
                                                const Trajectory& traj, const Plan& plan,
                                                const AdjointSeq& adj) {
  const int T = plan.horizon();
  if (adj.horizon() < T) throw std::invalid_argument("stationarity_residuals: adjoints too short");
  const auto d = linearize(problem, plan, traj, T);
  std::vector<RowVectorXd> r(T);
  for (int t = 0; t < T; ++t) r[t] = d[t].gu + adj.at(t + 1) * d[t].fu;
  return r;
}

std::vector<RowVectorXd> recursion_residuals(const StageProblem& problem, const Trajectory& traj,
                                             const Plan& plan, const AdjointSeq& adj) {
  const int T = std::min(plan.horizon(), adj.horizon());
  std::vector<RowVectorXd> e;
  if (T < 2) return e;
  const auto d = linearize(problem, plan, traj, T);
  e.reserve(T - 1);
  for (int t = 1; t < T; ++t) e.push_back(adj.at(t) - (d[t].gx + adj.at(t + 1) * d[t].fx));
  return e;
}

std::vector<RowVectorXd> transversality_profile(const StageProblem& problem,
                                                const Trajectory& traj, const Plan& plan,
                                                const AdjointSeq& adj, int h) {
  if (h < 1) throw std::invalid_argument("transversality_profile: h must be >= 1");
  const int last = std::min(adj.horizon(), traj.horizon());
  std::vector<RowVectorXd> p;
  if (h > last) return p;
  const int n = problem.state_dim();
  MatrixXd prod = MatrixXd::Identity(n, n);
  for (int t = h; t <= last; ++t) {
    p.push_back(adj.at(t) * prod);
    if (t < last) prod = problem.derivatives(t, traj.states[t], plan.control_at(t)).fx * prod;
  }
  return p;
}

GeometricFit fit_log_linear(const std::vector<double>& x, const std::vector<double>& y) {
  GeometricFit fit;
  fit.points = static_cast<int>(x.size());
  if (x.size() != y.size()) throw std::invalid_argument("fit_log_linear: size mismatch");
  if (x.size() < 2) return fit;
  double mx = 0, my = 0;
  std::vector<double> ly(y.size());
  for (std::size_t i = 0; i < y.size(); ++i) {
    ly[i] = std::log(y[i]);
    mx += x[i];
    my += ly[i];
  }
  mx /= x.size();
  my /= x.size();
  double sxx = 0, sxy = 0, syy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (ly[i] - my);
    syy += (ly[i] - my) * (ly[i] - my);
  }
  if (sxx == 0.0) return fit;
  const double slope = sxy / sxx;
  fit.rate = std::exp(slope);
  // Flat data carries no evidence of decay.
  fit.r2 = syy > 0.0 ? (sxy * sxy) / (sxx * syy) : 0.0;
  return fit;
}

GeometricFit fit_profile_decay(const std::vector<double>& norms) {
  double peak = 0.0;
  for (double v : norms) {
    // Non-finite entries count as divergence.
    if (!std::isfinite(v)) return {std::numeric_limits<double>::infinity(), 0.0, 0};
    peak = std::max(peak, v);
  }
  if (peak == 0.0) return {0.0, 1.0, 0};
  // Entries more than ten decades below the peak are dominated by rounding
  // and by the truncated tail, so they are left out of the fit.
  const double floor = 1e-10 * peak;
  std::vector<double> x, y;
  for (std::size_t i = 0; i < norms.size(); ++i) {
    if (norms[i] > 0.0 && norms[i] >= floor) {
      x.push_back(static_cast<double>(i));
      y.push_back(norms[i]);
    }
  }
  const std::size_t half = x.size() / 2;
  x.erase(x.begin(), x.begin() + half);
  y.erase(y.begin(), y.begin() + half);
  return fit_log_linear(x, y);
}

void finalize_report(ResidualReport& rep, const CheckOptions& opts) {
  rep.stationarity_sup = 0.0;
  rep.stationarity_worst = -1;
  for (std::size_t t = 0; t < rep.stationarity.size(); ++t) {
    const double s = sup_norm(rep.stationarity[t]);
    if (!(s <= rep.stationarity_sup)) {
      rep.stationarity_sup = s;
      rep.stationarity_worst = static_cast<int>(t);
    }
  }
  rep.recursion_sup = 0.0;
  for (const auto& e : rep.recursion) rep.recursion_sup = std::max(rep.recursion_sup, sup_norm(e));

  std::vector<double> norms;
  norms.reserve(rep.tc_profile.size());
  for (const auto& p : rep.tc_profile) norms.push_back(sup_norm(p));
  rep.tc_last_quarter_sup = 0.0;
  const std::size_t q0 = norms.size() - norms.size() / 4;
  for (std::size_t i = (norms.size() < 4 ? 0 : q0); i < norms.size(); ++i)
    rep.tc_last_quarter_sup = std::max(rep.tc_last_quarter_sup, std::isnan(norms[i]) ? std::numeric_limits<double>::infinity() : norms[i]);
  rep.tc_fit = fit_profile_decay(norms);

  rep.stationarity_pass = rep.stationarity_sup <= opts.stationarity_tol;
  rep.recursion_pass = rep.recursion_sup <= opts.recursion_tol;
  rep.tc_pass = rep.tc_fit.rate < 1.0 && rep.tc_last_quarter_sup < opts.tc_tol;
}

int resolve_extension(const CheckOptions& opts, int horizon) {
  return opts.tail_extension >= 0 ? opts.tail_extension : 3 * horizon;
}

ResidualReport residual_report(const StageProblem& problem, const Trajectory& traj,
                               const Plan& plan, const AdjointSeq& adj, const CheckOptions& opts) {
  ResidualReport rep;
  rep.horizon = plan.horizon();
  rep.eval_horizon = plan.horizon();
  rep.tc_h = opts.tc_h;
  rep.stationarity = stationarity_residuals(problem, traj, plan, adj);
  rep.recursion = recursion_residuals(problem, traj, plan, adj);
  rep.tc_profile = transversality_profile(problem, traj, plan, adj, opts.tc_h);
  finalize_report(rep, opts);
  return rep;
}

ResidualReport check_plan(const StageProblem& problem, const Plan& plan, const VectorXd& x0,
                          const CheckOptions& opts, AdjointSeq* adjoints) {
  const int T = plan.horizon();
  const int n = problem.state_dim();
  ResidualReport rep;
  rep.horizon = T;
  rep.tc_h = opts.tc_h;

  // With a terminal reward the problem is genuinely finite: no extension.
  const bool finite = problem.has_terminal_reward();
  const int H = finite ? T : T + resolve_extension(opts, T);
  rep.eval_horizon = H;
  const Plan ext = plan.extended(H);
  const Trajectory traj = rollout(problem, ext, x0);

  std::vector<StageDerivatives> d;
  AdjointSeq adj;
  if (finite) {
    d = linearize(problem, ext, traj, H);
    adj = adjoint_backward(problem, traj, ext, TerminalMode::from_terminal_reward);
  } else {
    d = linearize(problem, ext, traj, H + 1);
    adj = adjoint_backward(d, RowVectorXd::Zero(n));
  }

  rep.stationarity.resize(T);
  for (int t = 0; t < T; ++t) rep.stationarity[t] = d[t].gu + adj.at(t + 1) * d[t].fu;
  for (int t = 1; t < T; ++t)
    rep.recursion.push_back(adj.at(t) - (d[t].gx + adj.at(t + 1) * d[t].fx));

  MatrixXd prod = MatrixXd::Identity(n, n);
  for (int t = opts.tc_h; t <= adj.horizon(); ++t) {
    rep.tc_profile.push_back(adj.at(t) * prod);
    if (t < adj.horizon()) prod = d[t].fx * prod;
  }
  finalize_report(rep, opts);
  if (adjoints) *adjoints = std::move(adj);
  return rep;
}

double gateaux_differential(const StageProblem& problem, const Plan& plan, const VectorXd& x0,
                            int tau, const VectorXd& y, int T) {
  if (tau < 0 || tau >= T) throw std::invalid_argument("gateaux_differential: need 0 <= tau < T");
  const Plan p = truncated(plan, T);
  const Trajectory traj = rollout(problem, p, x0);
  const StageDerivatives d0 = problem.derivatives(tau, traj.states[tau], p.controls[tau]);
  double sum = d0.gu.dot(y);
  VectorXd v = d0.fu * y;  // state sensitivity at tau+1
  for (int t = tau + 1; t < T; ++t) {
    const StageDerivatives d = problem.derivatives(t, traj.states[t], p.controls[t]);
    sum += d.gx.dot(v);
    v = d.fx * v;
  }
  if (problem.has_terminal_reward()) sum += problem.terminal_gradient(traj.states[T]).dot(v);
  return sum;
}

RhoGenerator open_loop_rho(const StageProblem& problem, const Plan& plan, const VectorXd& x0,
                           int tau) {
  const Trajectory prefix = rollout(problem, truncated(plan, tau), x0);
  const VectorXd x_tau = prefix.states.back();
  return [&problem, plan, x_tau, tau](const VectorXd& u, int count) {
    std::vector<RowVectorXd> rho;
    rho.reserve(count);
    VectorXd x = problem.dynamics(tau, x_tau, u);
    MatrixXd prod = MatrixXd::Identity(x.size(), x.size());  // A_{t-1}...A_{tau+1}
    for (int t = tau + 1; t <= tau + count; ++t) {
      const VectorXd ut = plan.control_at(t);
      const StageDerivatives d = problem.derivatives(t, x, ut);
      rho.push_back(d.gx * prod);
      prod = d.fx * prod;
      x = problem.dynamics(t, x, ut);
    }
    return rho;
  };
}

AmpProbeReport amp_probe(const RhoGenerator& rho, const VectorXd& centre, const ControlBox& box,
                         int tau, double radius, int n_samples, const std::vector<int>& K_list,
                         std::uint64_t seed) {
  if (K_list.size() < 3) throw std::invalid_argument("amp_probe: need at least three K values");
  if (K_list.front() <= tau) throw std::invalid_argument("amp_probe: K values must exceed tau");
  for (std::size_t i = 1; i < K_list.size(); ++i)
    if (K_list[i] <= K_list[i - 1]) throw std::invalid_argument("amp_probe: K must increase");
  if (!(radius >= 0.0)) throw std::invalid_argument("amp_probe: radius must be non-negative");

  double margin = std::numeric_limits<double>::infinity();
  for (Eigen::Index i = 0; i < centre.size(); ++i)
    margin = std::min({margin, centre(i) - box.lo(i), box.hi(i) - centre(i)});
  if (radius >= margin)
    throw std::invalid_argument("amp_probe: radius exceeds the interiority margin");

  AmpProbeReport rep;
  rep.tau = tau;
  rep.radius = radius;
  rep.n_samples = n_samples;
  rep.K.assign(K_list.begin(), K_list.end() - 1);
  rep.tail_sup.assign(rep.K.size(), 0.0);

  const int count = K_list.back() - 1 - tau;
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss;
  std::uniform_real_distribution<double> unif;
  const auto m = centre.size();

  auto accumulate = [&](const VectorXd& u) {
    const auto r = rho(u, count);
    for (std::size_t i = 0; i + 1 < K_list.size(); ++i) {
      RowVectorXd block = RowVectorXd::Zero(r.front().size());
      for (int t = K_list[i]; t < K_list[i + 1]; ++t) block += r[t - tau - 1];
      rep.tail_sup[i] = std::max(rep.tail_sup[i], sup_norm(block));
    }
  };

  accumulate(centre);
  for (int s = 0; s < n_samples; ++s) {
    VectorXd dir(m);
    for (Eigen::Index i = 0; i < m; ++i) dir(i) = gauss(rng);
    const double len = dir.norm();
    if (len == 0.0) continue;
    const double scale = radius * std::pow(unif(rng), 1.0 / static_cast<double>(m)) / len;
    accumulate(centre + scale * dir);
  }

  std::vector<double> x, y;
  bool any_zero = false;
  for (std::size_t i = 0; i < rep.K.size(); ++i) {
    if (rep.tail_sup[i] > 0.0) {
      x.push_back(rep.K[i]);
      y.push_back(rep.tail_sup[i]);
    } else {
      any_zero = true;
    }
  }
  if (x.empty()) {
    rep.fit = {0.0, 1.0, 0};
    rep.pass = true;
    return rep;
  }
  rep.fit = fit_log_linear(x, y);
  if (x.size() < 2 && any_zero) rep.fit = {0.0, 1.0, static_cast<int>(x.size())};
  rep.pass = rep.fit.rate < 1.0 && rep.fit.r2 >= 0.9;
  return rep;
}

AmpProbeReport check_assumption_amp(const StageProblem& problem, const Plan& plan,
                                    const VectorXd& x0, int tau, double radius, int n_samples,
                                    const std::vector<int>& K_list, std::uint64_t seed) {
  const Trajectory traj = rollout(problem, truncated(plan, tau + 1), x0);
  const ControlBox box = problem.control_box(tau, traj.states[tau]);
  return amp_probe(open_loop_rho(problem, plan, x0, tau), plan.control_at(tau), box, tau, radius,
                   n_samples, K_list, seed);
}

}  // namespace dmp
