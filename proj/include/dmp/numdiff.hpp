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

#pragma once

#include <Eigen/Dense>

#include <functional>
#include <optional>
#include <span>
#include <string>

namespace dmp::numdiff {

/// Central-difference settings. The step for coordinate i is
/// h_i = step_rel * (1 + |p_i|).
struct FdConfig {
  double step_rel = 1e-6;
  // Optional open box the stencil must stay inside. When a coordinate sits
  // closer than h to a bound, h is capped at half that margin.
  std::optional<Eigen::VectorXd> lower;
  std::optional<Eigen::VectorXd> upper;
};

using ScalarFn = std::function<double(std::span<const double>)>;

class FdError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

Eigen::VectorXd fd_grad(const ScalarFn& func, const Eigen::VectorXd& point,
                        const FdConfig& cfg = {});

/// Jacobian of a vector function, one central difference per column.
Eigen::MatrixXd fd_jacobian(const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>& func,
                            const Eigen::VectorXd& point, const FdConfig& cfg = {});

struct JacobianCheck {
  double max_abs_error = 0.0;
  double max_rel_error = 0.0;
  int worst_row = -1;
  int worst_col = -1;
  bool pass = true;

  std::string describe() const;
};

/// PASS iff |a - n| <= atol + rtol * max(|a|, |n|) entrywise.
JacobianCheck check_jacobian(const Eigen::MatrixXd& analytic, const Eigen::MatrixXd& numeric,
                             double rtol, double atol = 0.0);

}  // namespace dmp::numdiff
