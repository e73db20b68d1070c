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

#include <cstddef>
#include <cstdint>
#include <map>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "dmp/dual.hpp"

namespace dmp::expr {

// Infix expression language for stage dynamics and rewards.
//
// Identifiers: x1..xn (state), u1..um (control), t (stage index) and
// declared parameter names. Functions: ln, exp, sqrt, pow(a, b).
// Precedence, tightest first: ^ (right associative), unary minus, * /, + -.

class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& what, std::size_t offset);
  std::size_t offset() const { return offset_; }

 private:
  std::size_t offset_;
};

class UnboundSymbol : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class NodeKind : std::uint8_t {
  constant,
  state,
  control,
  time,
  parameter,
  negate,
  add,
  sub,
  mul,
  div,
  pow,
  call,
};

enum class Function : std::uint8_t { ln, exp, sqrt, pow };

struct SourceSpan {
  std::size_t begin = 0;
  std::size_t end = 0;
};

struct Node {
  NodeKind kind = NodeKind::constant;
  double value = 0.0;  // constant nodes
  int index = 0;       // 0-based slot for state/control/parameter nodes
  Function fn = Function::ln;
  int lhs = -1;        // children are indices into Expr::nodes()
  int rhs = -1;
  SourceSpan span;
};

/// Symbols an expression may reference.
struct Signature {
  int state_dim = 0;
  int control_dim = 0;
  std::vector<std::string> params;  // order defines parameter slots

  int param_slot(std::string_view name) const;
};

/// Evaluation point. Parameters are plain reals; x, u and t may carry dual
/// seeds.
template <class S>
struct Point {
  std::span<const S> x;
  std::span<const S> u;
  S t{};
  std::span<const double> params;
};

/// Immutable parsed expression. Nodes are stored children-first, so the
/// root is the last node.
class Expr {
 public:
  Expr() = default;

  const std::vector<Node>& nodes() const { return impl_->nodes; }
  const Node& root() const { return impl_->nodes.back(); }
  const Signature& signature() const { return impl_->signature; }
  const std::string& source() const { return impl_->source; }
  bool empty() const { return impl_ == nullptr; }

  bool uses_state() const { return impl_->uses_state; }
  bool uses_control() const { return impl_->uses_control; }
  bool uses_time() const { return impl_->uses_time; }

  template <class S>
  S evaluate(const Point<S>& p) const;

 private:
  struct Impl {
    std::vector<Node> nodes;
    Signature signature;
    std::string source;
    bool uses_state = false;
    bool uses_control = false;
    bool uses_time = false;
  };
  std::shared_ptr<const Impl> impl_;

  friend Expr parse(std::string_view, const Signature&);
};

extern template double Expr::evaluate<double>(const Point<double>&) const;
extern template Dual Expr::evaluate<Dual>(const Point<Dual>&) const;

Expr parse(std::string_view source, const Signature& signature);

/// Convenience form taking the declared parameter names and dimensions.
Expr parse(std::string_view source, const std::vector<std::string>& declared_params, int n, int m);

/// Name-keyed bindings: "x1", "u2", "t" and parameter names.
using Bindings = std::map<std::string, double, std::less<>>;

double eval(const Expr& e, const Bindings& bindings);

/// Exact gradient by forward-mode duals, one pass per entry of `wrt`
/// (variable names such as "x1", "u1" or "t").
std::vector<double> grad(const Expr& e, const Bindings& bindings,
                         const std::vector<std::string>& wrt);

/// Fully parenthesised rendering that parses back to the same tree.
std::string to_string(const Expr& e);

/// Tree equality ignoring source spans.
bool structurally_equal(const Expr& a, const Expr& b);

}  // namespace dmp::expr
