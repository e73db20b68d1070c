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

#include "dmp/exprlang.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <functional>

namespace dmp::expr {

ParseError::ParseError(const std::string& what, std::size_t offset)
    : std::runtime_error(what + " at offset " + std::to_string(offset)), offset_(offset) {}

int Signature::param_slot(std::string_view name) const {
  auto it = std::find(params.begin(), params.end(), name);
  return it == params.end() ? -1 : static_cast<int>(it - params.begin());
}

namespace {

bool parse_index(std::string_view digits, int& out) {
  if (digits.empty()) return false;
  if (!std::all_of(digits.begin(), digits.end(), [](char c) { return std::isdigit(c); }))
    return false;
  auto [p, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), out);
  return ec == std::errc() && p == digits.data() + digits.size();
}

class Parser {
 public:
  Parser(std::string_view src, const Signature& sig) : src_(src), sig_(sig) {}

  std::vector<Node> run() {
    skip_ws();
    if (pos_ >= src_.size()) throw ParseError("empty expression", pos_);
    parse_sum();
    skip_ws();
    if (pos_ != src_.size())
      throw ParseError(std::string("unexpected '") + src_[pos_] + "'", pos_);
    return std::move(nodes_);
  }

 private:
  std::string_view src_;
  const Signature& sig_;
  std::size_t pos_ = 0;
  std::vector<Node> nodes_;

  void skip_ws() {
    while (pos_ < src_.size() && std::isspace(static_cast<unsigned char>(src_[pos_]))) ++pos_;
  }

  bool accept(char c) {
    skip_ws();
    if (pos_ < src_.size() && src_[pos_] == c) {
      ++pos_;
      return true;
    }
    return false;
  }

  int push(Node n) {
    nodes_.push_back(n);
    return static_cast<int>(nodes_.size()) - 1;
  }

  int binary(NodeKind kind, int lhs, int rhs) {
    Node n;
    n.kind = kind;
    n.lhs = lhs;
    n.rhs = rhs;
    n.span = {nodes_[lhs].span.begin, nodes_[rhs].span.end};
    return push(n);
  }

  int parse_sum() {
    int lhs = parse_product();
    for (;;) {
      if (accept('+')) {
        lhs = binary(NodeKind::add, lhs, parse_product());
      } else if (accept('-')) {
        lhs = binary(NodeKind::sub, lhs, parse_product());
      } else {
        return lhs;
      }
    }
  }

  int parse_product() {
    int lhs = parse_unary();
    for (;;) {
      if (accept('*')) {
        lhs = binary(NodeKind::mul, lhs, parse_unary());
      } else if (accept('/')) {
        lhs = binary(NodeKind::div, lhs, parse_unary());
      } else {
        return lhs;
      }
    }
  }

  int parse_unary() {
    skip_ws();
    const std::size_t start = pos_;
    if (accept('-')) {
      int operand = parse_unary();
      Node n;
      n.kind = NodeKind::negate;
      n.lhs = operand;
      n.span = {start, nodes_[operand].span.end};
      return push(n);
    }
    return parse_power();
  }

  // base ('^' unary)?  -- the exponent may carry its own sign: 2^-1
  int parse_power() {
    int base = parse_primary();
    if (accept('^')) return binary(NodeKind::pow, base, parse_unary());
    return base;
  }

  int parse_primary() {
    skip_ws();
    if (pos_ >= src_.size()) throw ParseError("expected operand", pos_);
    const char c = src_[pos_];
    if (c == '(') {
      ++pos_;
      int inner = parse_sum();
      if (!accept(')')) throw ParseError("expected ')'", pos_);
      return inner;
    }
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') return parse_number();
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') return parse_identifier();
    throw ParseError(std::string("unexpected '") + c + "'", pos_);
  }

  int parse_number() {
    const std::size_t start = pos_;
    while (pos_ < src_.size() &&
           (std::isdigit(static_cast<unsigned char>(src_[pos_])) || src_[pos_] == '.'))
      ++pos_;
    if (pos_ < src_.size() && (src_[pos_] == 'e' || src_[pos_] == 'E')) {
      std::size_t save = pos_++;
      if (pos_ < src_.size() && (src_[pos_] == '+' || src_[pos_] == '-')) ++pos_;
      if (pos_ < src_.size() && std::isdigit(static_cast<unsigned char>(src_[pos_]))) {
        while (pos_ < src_.size() && std::isdigit(static_cast<unsigned char>(src_[pos_]))) ++pos_;
      } else {
        pos_ = save;
      }
    }
    double v = 0.0;
    auto [p, ec] = std::from_chars(src_.data() + start, src_.data() + pos_, v);
    if (ec != std::errc() || p != src_.data() + pos_) throw ParseError("malformed number", start);
    Node n;
    n.kind = NodeKind::constant;
    n.value = v;
    n.span = {start, pos_};
    return push(n);
  }

  int parse_identifier() {
    const std::size_t start = pos_;
    while (pos_ < src_.size() &&
           (std::isalnum(static_cast<unsigned char>(src_[pos_])) || src_[pos_] == '_'))
      ++pos_;
    const std::string_view name = src_.substr(start, pos_ - start);

    skip_ws();
    if (pos_ < src_.size() && src_[pos_] == '(') return parse_call(name, start);

    Node n;
    n.span = {start, start + name.size()};
    int index = 0;
    if (name == "t") {
      n.kind = NodeKind::time;
    } else if ((name[0] == 'x' || name[0] == 'u') && parse_index(name.substr(1), index)) {
      const bool state = name[0] == 'x';
      const int dim = state ? sig_.state_dim : sig_.control_dim;
      if (index < 1 || index > dim)
        throw ParseError("variable " + std::string(name) + " out of range (dimension " +
                             std::to_string(dim) + ")",
                         start);
      n.kind = state ? NodeKind::state : NodeKind::control;
      n.index = index - 1;
    } else if (int slot = sig_.param_slot(name); slot >= 0) {
      n.kind = NodeKind::parameter;
      n.index = slot;
    } else {
      throw ParseError("undeclared identifier '" + std::string(name) + "'", start);
    }
    return push(n);
  }

  int parse_call(std::string_view name, std::size_t start) {
    Function fn;
    int arity = 1;
    if (name == "ln") {
      fn = Function::ln;
    } else if (name == "exp") {
      fn = Function::exp;
    } else if (name == "sqrt") {
      fn = Function::sqrt;
    } else if (name == "pow") {
      fn = Function::pow;
      arity = 2;
    } else {
      throw ParseError("unknown function '" + std::string(name) + "'", start);
    }
    accept('(');
    int a = parse_sum();
    int b = -1;
    if (arity == 2) {
      if (!accept(',')) throw ParseError("expected ',' in pow(a, b)", pos_);
      b = parse_sum();
    }
    if (!accept(')')) throw ParseError("expected ')'", pos_);
    Node n;
    n.kind = NodeKind::call;
    n.fn = fn;
    n.lhs = a;
    n.rhs = b;
    n.span = {start, pos_};
    return push(n);
  }
};

template <class S>
S apply_pow(const S& a, const S& b) {
  return scalar::pow(a, b);
}

}  // namespace

Expr parse(std::string_view source, const Signature& signature) {
  Parser parser(source, signature);
  auto impl = std::make_shared<Expr::Impl>();
  impl->nodes = parser.run();
  impl->signature = signature;
  impl->source = std::string(source);
  for (const Node& n : impl->nodes) {
    impl->uses_state |= n.kind == NodeKind::state;
    impl->uses_control |= n.kind == NodeKind::control;
    impl->uses_time |= n.kind == NodeKind::time;
  }
  Expr e;
  e.impl_ = std::move(impl);
  return e;
}

Expr parse(std::string_view source, const std::vector<std::string>& declared_params, int n,
           int m) {
  return parse(source, Signature{n, m, declared_params});
}

template <class S>
S Expr::evaluate(const Point<S>& p) const {
  const auto& ns = impl_->nodes;
  std::vector<S> vals(ns.size());
  for (std::size_t i = 0; i < ns.size(); ++i) {
    const Node& n = ns[i];
    switch (n.kind) {
      case NodeKind::constant:
        vals[i] = S(n.value);
        break;
      case NodeKind::state:
        vals[i] = p.x[n.index];
        break;
      case NodeKind::control:
        vals[i] = p.u[n.index];
        break;
      case NodeKind::time:
        vals[i] = p.t;
        break;
      case NodeKind::parameter:
        vals[i] = S(p.params[n.index]);
        break;
      case NodeKind::negate:
        vals[i] = -vals[n.lhs];
        break;
      case NodeKind::add:
        vals[i] = vals[n.lhs] + vals[n.rhs];
        break;
      case NodeKind::sub:
        vals[i] = vals[n.lhs] - vals[n.rhs];
        break;
      case NodeKind::mul:
        vals[i] = vals[n.lhs] * vals[n.rhs];
        break;
      case NodeKind::div:
        if (scalar::value_of(vals[n.rhs]) == 0.0) throw DomainError("division by zero");
        vals[i] = vals[n.lhs] / vals[n.rhs];
        break;
      case NodeKind::pow:
        vals[i] = apply_pow(vals[n.lhs], vals[n.rhs]);
        break;
      case NodeKind::call:
        switch (n.fn) {
          case Function::ln:
            vals[i] = scalar::log(vals[n.lhs]);
            break;
          case Function::exp:
            vals[i] = scalar::exp(vals[n.lhs]);
            break;
          case Function::sqrt:
            vals[i] = scalar::sqrt(vals[n.lhs]);
            break;
          case Function::pow:
            vals[i] = apply_pow(vals[n.lhs], vals[n.rhs]);
            break;
        }
        break;
    }
  }
  return vals.back();
}

template double Expr::evaluate<double>(const Point<double>&) const;
template Dual Expr::evaluate<Dual>(const Point<Dual>&) const;

namespace {

struct NamedPoint {
  std::vector<double> x, u, params;
  double t = 0.0;
};

NamedPoint resolve(const Expr& e, const Bindings& b) {
  const Signature& sig = e.signature();
  NamedPoint p;
  p.x.assign(sig.state_dim, std::nan(""));
  p.u.assign(sig.control_dim, std::nan(""));
  p.params.assign(sig.params.size(), std::nan(""));
  for (const Node& n : e.nodes()) {
    std::string key;
    switch (n.kind) {
      case NodeKind::state:
        key = "x" + std::to_string(n.index + 1);
        break;
      case NodeKind::control:
        key = "u" + std::to_string(n.index + 1);
        break;
      case NodeKind::time:
        key = "t";
        break;
      case NodeKind::parameter:
        key = sig.params[n.index];
        break;
      default:
        continue;
    }
    auto it = b.find(key);
    if (it == b.end()) throw UnboundSymbol("unbound symbol '" + key + "'");
    switch (n.kind) {
      case NodeKind::state:
        p.x[n.index] = it->second;
        break;
      case NodeKind::control:
        p.u[n.index] = it->second;
        break;
      case NodeKind::time:
        p.t = it->second;
        break;
      default:
        p.params[n.index] = it->second;
        break;
    }
  }
  return p;
}

}  // namespace

double eval(const Expr& e, const Bindings& bindings) {
  NamedPoint p = resolve(e, bindings);
  return e.evaluate(Point<double>{p.x, p.u, p.t, p.params});
}

std::vector<double> grad(const Expr& e, const Bindings& bindings,
                         const std::vector<std::string>& wrt) {
  NamedPoint p = resolve(e, bindings);
  std::vector<Dual> x(p.x.begin(), p.x.end());
  std::vector<Dual> u(p.u.begin(), p.u.end());
  std::vector<double> out;
  out.reserve(wrt.size());
  for (const std::string& name : wrt) {
    for (auto& d : x) d.deriv = 0.0;
    for (auto& d : u) d.deriv = 0.0;
    Dual t{p.t};
    int index = 0;
    if (name == "t") {
      t.deriv = 1.0;
    } else if (name.size() > 1 && name[0] == 'x' && parse_index(name.substr(1), index) &&
               index >= 1 && index <= static_cast<int>(x.size())) {
      x[index - 1].deriv = 1.0;
    } else if (name.size() > 1 && name[0] == 'u' && parse_index(name.substr(1), index) &&
               index >= 1 && index <= static_cast<int>(u.size())) {
      u[index - 1].deriv = 1.0;
    } else {
      throw UnboundSymbol("cannot differentiate with respect to '" + name + "'");
    }
    // Unreferenced variables are NaN in the resolved point; the derivative
    // with respect to them is exactly zero.
    for (auto& d : x)
      if (std::isnan(d.value)) d.value = 0.0;
    for (auto& d : u)
      if (std::isnan(d.value)) d.value = 0.0;
    out.push_back(e.evaluate(Point<Dual>{x, u, t, p.params}).deriv);
  }
  return out;
}

namespace {

std::string render(const Expr& e, int i) {
  const Node& n = e.nodes()[i];
  auto bin = [&](const char* op) {
    return "(" + render(e, n.lhs) + " " + op + " " + render(e, n.rhs) + ")";
  };
  switch (n.kind) {
    case NodeKind::constant: {
      char buf[64];
      std::snprintf(buf, sizeof buf, "%.17g", n.value);
      return buf;
    }
    case NodeKind::state:
      return "x" + std::to_string(n.index + 1);
    case NodeKind::control:
      return "u" + std::to_string(n.index + 1);
    case NodeKind::time:
      return "t";
    case NodeKind::parameter:
      return e.signature().params[n.index];
    case NodeKind::negate:
      return "(-" + render(e, n.lhs) + ")";
    case NodeKind::add:
      return bin("+");
    case NodeKind::sub:
      return bin("-");
    case NodeKind::mul:
      return bin("*");
    case NodeKind::div:
      return bin("/");
    case NodeKind::pow:
      return bin("^");
    case NodeKind::call:
      switch (n.fn) {
        case Function::ln:
          return "ln(" + render(e, n.lhs) + ")";
        case Function::exp:
          return "exp(" + render(e, n.lhs) + ")";
        case Function::sqrt:
          return "sqrt(" + render(e, n.lhs) + ")";
        case Function::pow:
          return "pow(" + render(e, n.lhs) + ", " + render(e, n.rhs) + ")";
      }
  }
  return {};
}

bool same_tree(const Expr& a, int i, const Expr& b, int j) {
  const Node& p = a.nodes()[i];
  const Node& q = b.nodes()[j];
  if (p.kind != q.kind) return false;
  switch (p.kind) {
    case NodeKind::constant:
      return p.value == q.value;
    case NodeKind::state:
    case NodeKind::control:
      return p.index == q.index;
    case NodeKind::parameter:
      return a.signature().params[p.index] == b.signature().params[q.index];
    case NodeKind::time:
      return true;
    case NodeKind::negate:
      return same_tree(a, p.lhs, b, q.lhs);
    case NodeKind::call:
      if (p.fn != q.fn) return false;
      if (p.fn == Function::pow && !same_tree(a, p.rhs, b, q.rhs)) return false;
      return same_tree(a, p.lhs, b, q.lhs);
    default:
      return same_tree(a, p.lhs, b, q.lhs) && same_tree(a, p.rhs, b, q.rhs);
  }
}

}  // namespace

std::string to_string(const Expr& e) { return render(e, static_cast<int>(e.nodes().size()) - 1); }

bool structurally_equal(const Expr& a, const Expr& b) {
  return same_tree(a, static_cast<int>(a.nodes().size()) - 1, b,
                   static_cast<int>(b.nodes().size()) - 1);
}

}  // namespace dmp::expr
