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

#include <cmath>
#include <stdexcept>
#include <string>

namespace dmp {

/// Raised when an expression is evaluated outside the real domain of one of
/// its operations (log of a non-positive number, 0^negative, ...).
class DomainError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Forward-mode dual number a + b·ε with ε² = 0. `deriv` carries the
/// directional derivative along the seeded direction.
struct Dual {
  double value = 0.0;
  double deriv = 0.0;

  constexpr Dual() = default;
  constexpr Dual(double v) : value(v) {}  // NOLINT: constants promote implicitly
  constexpr Dual(double v, double d) : value(v), deriv(d) {}

  static constexpr Dual variable(double v) { return {v, 1.0}; }
};

constexpr Dual operator+(Dual a, Dual b) { return {a.value + b.value, a.deriv + b.deriv}; }
constexpr Dual operator-(Dual a, Dual b) { return {a.value - b.value, a.deriv - b.deriv}; }
constexpr Dual operator-(Dual a) { return {-a.value, -a.deriv}; }
constexpr Dual operator*(Dual a, Dual b) {
  return {a.value * b.value, a.deriv * b.value + a.value * b.deriv};
}
constexpr Dual operator/(Dual a, Dual b) {
  return {a.value / b.value, (a.deriv * b.value - a.value * b.deriv) / (b.value * b.value)};
}

namespace scalar {

inline double value_of(double v) { return v; }
inline double value_of(const Dual& v) { return v.value; }

inline double log(double v) {
  if (!(v > 0.0)) throw DomainError("ln of non-positive argument " + std::to_string(v));
  return std::log(v);
}
inline Dual log(Dual v) { return {log(v.value), v.deriv / v.value}; }

inline double exp(double v) { return std::exp(v); }
inline Dual exp(Dual v) {
  const double e = std::exp(v.value);
  return {e, e * v.deriv};
}

inline double sqrt(double v) {
  if (v < 0.0) throw DomainError("sqrt of negative argument " + std::to_string(v));
  return std::sqrt(v);
}
inline Dual sqrt(Dual v) {
  const double s = sqrt(v.value);
  return {s, v.deriv / (2.0 * s)};
}

inline bool is_integer(double v) { return std::isfinite(v) && std::floor(v) == v; }

inline double pow(double base, double expo) {
  if (base < 0.0 && !is_integer(expo))
    throw DomainError("negative base " + std::to_string(base) + " with non-integer exponent");
  if (base == 0.0 && expo < 0.0) throw DomainError("0 raised to a negative power");
  return std::pow(base, expo);
}

inline Dual pow(Dual base, Dual expo) {
  const double v = pow(base.value, expo.value);
  double d = 0.0;
  if (base.deriv != 0.0) {
    // d/da a^b = b a^(b-1); skip the a^(b-1) evaluation when b == 0
    if (expo.value != 0.0) d += expo.value * pow(base.value, expo.value - 1.0) * base.deriv;
  }
  if (expo.deriv != 0.0) {
    if (!(base.value > 0.0))
      throw DomainError("exponent derivative undefined for non-positive base");
    d += v * std::log(base.value) * expo.deriv;
  }
  return {v, d};
}

}  // namespace scalar
}  // namespace dmp
