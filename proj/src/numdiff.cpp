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

#include "dmp/numdiff.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>
#include <vector>

#include "dmp/dual.hpp"

namespace dmp::numdiff {

namespace {

struct Stencil {
  double h;
  bool central;
  int side;  // +1 forward, -1 backward when not central
};

Stencil plan_stencil(const Eigen::VectorXd& p, Eigen::Index i, const FdConfig& cfg) {
  double h = cfg.step_rel * (1.0 + std::abs(p(i)));
  double below = std::numeric_limits<double>::infinity();
  double above = std::numeric_limits<double>::infinity();
  if (cfg.lower) below = p(i) - (*cfg.lower)(i);
  if (cfg.upper) above = (*cfg.upper)(i) - p(i);
  const double margin = std::min(below, above);
  if (margin >= h) return {h, true, 0};
  if (margin > 0.0) return {std::min(h, 0.5 * margin), true, 0};
  // Sitting on a bound: one-sided into the interior.
  return {h, false, below <= 0.0 ? +1 : -1};
}

double directional(const ScalarFn& f, std::vector<double>& buf, Eigen::Index i, double base,
                   const Stencil& s) {
  if (s.central) {
    buf[i] = base + s.h;
    const double fp = f(buf);
    buf[i] = base - s.h;
    const double fm = f(buf);
    buf[i] = base;
    return (fp - fm) / (2.0 * s.h);
  }
  const double f0 = f(buf);
  buf[i] = base + s.side * s.h;
  const double f1 = f(buf);
  buf[i] = base;
  return s.side * (f1 - f0) / s.h;
}

}  // namespace

Eigen::VectorXd fd_grad(const ScalarFn& func, const Eigen::VectorXd& point, const FdConfig& cfg) {
  if (!(cfg.step_rel > 0.0)) throw std::invalid_argument("step_rel must be positive");
  std::vector<double> buf(point.data(), point.data() + point.size());
  Eigen::VectorXd g(point.size());
  for (Eigen::Index i = 0; i < point.size(); ++i) {
    Stencil s = plan_stencil(point, i, cfg);
    try {
      g(i) = directional(func, buf, i, point(i), s);
    } catch (const DomainError&) {
      buf[i] = point(i);
      s.h /= 10.0;
      try {
        g(i) = directional(func, buf, i, point(i), s);
      } catch (const DomainError& e) {
        throw FdError("finite-difference stencil left the domain for coordinate " +
                      std::to_string(i) + ": " + e.what());
      }
    }
  }
  return g;
}

Eigen::MatrixXd fd_jacobian(const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>& func,
                            const Eigen::VectorXd& point, const FdConfig& cfg) {
  if (!(cfg.step_rel > 0.0)) throw std::invalid_argument("step_rel must be positive");
  const Eigen::VectorXd f0 = func(point);
  Eigen::MatrixXd jac(f0.size(), point.size());
  Eigen::VectorXd buf = point;
  // Same stencils as fd_grad, one column per coordinate.
  auto column = [&](Eigen::Index i, const Stencil& s) -> Eigen::VectorXd {
    if (s.central) {
      buf(i) = point(i) + s.h;
      const Eigen::VectorXd fp = func(buf);
      buf(i) = point(i) - s.h;
      const Eigen::VectorXd fm = func(buf);
      buf(i) = point(i);
      return (fp - fm) / (2.0 * s.h);
    }
    buf(i) = point(i) + s.side * s.h;
    const Eigen::VectorXd f1 = func(buf);
    buf(i) = point(i);
    return s.side * (f1 - f0) / s.h;
  };
  for (Eigen::Index i = 0; i < point.size(); ++i) {
    Stencil s = plan_stencil(point, i, cfg);
    try {
      jac.col(i) = column(i, s);
    } catch (const DomainError&) {
      buf(i) = point(i);
      s.h /= 10.0;
      try {
        jac.col(i) = column(i, s);
      } catch (const DomainError& e) {
        throw FdError("finite-difference stencil left the domain for coordinate " +
                      std::to_string(i) + ": " + e.what());
      }
    }
  }
  return jac;
}

std::string JacobianCheck::describe() const {
  std::ostringstream os;
  os << (pass ? "PASS" : "FAIL") << " max_abs=" << max_abs_error << " max_rel=" << max_rel_error;
  if (worst_row >= 0) os << " at (" << worst_row << "," << worst_col << ")";
  return os.str();
}

JacobianCheck check_jacobian(const Eigen::MatrixXd& analytic, const Eigen::MatrixXd& numeric,
                             double rtol, double atol) {
  if (analytic.rows() != numeric.rows() || analytic.cols() != numeric.cols())
    throw std::invalid_argument("check_jacobian: shape mismatch");
  JacobianCheck out;
  double worst_excess = -std::numeric_limits<double>::infinity();
  for (Eigen::Index r = 0; r < analytic.rows(); ++r) {
    for (Eigen::Index c = 0; c < analytic.cols(); ++c) {
      const double a = analytic(r, c);
      const double n = numeric(r, c);
      const double err = std::abs(a - n);
      const double scale = std::max(std::abs(a), std::abs(n));
      out.max_abs_error = std::max(out.max_abs_error, err);
      if (scale > 0.0) out.max_rel_error = std::max(out.max_rel_error, err / scale);
      const double excess = err - (atol + rtol * scale);
      if (!(excess <= 0.0)) out.pass = false;
      if (err > 0.0 && excess > worst_excess) {
        worst_excess = excess;
        out.worst_row = static_cast<int>(r);
        out.worst_col = static_cast<int>(c);
      }
    }
  }
  return out;
}

}  // namespace dmp::numdiff
