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

// Problem files and CSV artifacts.

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>

#include "dmp/cli.hpp"

namespace dmp::cli {

namespace {

using Section = std::vector<std::pair<std::string, std::string>>;

std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  const auto b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream in(s);
  while (std::getline(in, cur, sep)) out.push_back(trim(cur));
  if (!s.empty() && s.back() == sep) out.push_back("");
  return out;
}

double to_number(const std::string& s, const std::string& what) {
  const std::string v = trim(s);
  char* end = nullptr;
  const double d = std::strtod(v.c_str(), &end);
  if (v.empty() || end != v.c_str() + v.size()) throw UsageError(what + ": '" + s + "' is not a number");
  return d;
}

int to_int(const std::string& s, const std::string& what) {
  const double d = to_number(s, what);
  if (d != static_cast<int>(d)) throw UsageError(what + ": '" + s + "' is not an integer");
  return static_cast<int>(d);
}

std::vector<double> to_numbers(const std::string& s, const std::string& what) {
  std::vector<double> out;
  for (const auto& p : split(s, ',')) out.push_back(to_number(p, what));
  return out;
}

const std::set<std::string> kSections = {"meta",     "params",   "dims",    "dynamics",   "reward",
                                          "terminal", "controls", "policy", "horizon", "tolerances"};

std::map<std::string, Section> read_sections(const std::string& text) {
  std::map<std::string, Section> out;
  std::istringstream in(text);
  std::string line, current;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const std::string where = "line " + std::to_string(lineno);
    if (line.front() == '[') {
      if (line.back() != ']') throw UsageError(where + ": malformed section header");
      current = trim(line.substr(1, line.size() - 2));
      if (!kSections.count(current)) throw UsageError(where + ": unknown section [" + current + "]");
      if (out.count(current)) throw UsageError(where + ": section [" + current + "] repeated");
      out[current];
      continue;
    }
    if (current.empty()) throw UsageError(where + ": entry outside any section");
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw UsageError(where + ": expected key = value");
    const std::string key = trim(line.substr(0, eq));
    if (key.empty()) throw UsageError(where + ": empty key");
    auto& sec = out[current];
    for (const auto& kv : sec)
      if (kv.first == key) throw UsageError(where + ": '" + key + "' repeated in [" + current + "]");
    sec.emplace_back(key, trim(line.substr(eq + 1)));
  }
  return out;
}

const std::string* find(const Section& s, const std::string& key) {
  for (const auto& kv : s)
    if (kv.first == key) return &kv.second;
  return nullptr;
}

const Section& need(const std::map<std::string, Section>& secs, const std::string& name) {
  const auto it = secs.find(name);
  if (it == secs.end()) throw UsageError("missing section [" + name + "]");
  return it->second;
}

const std::string& need_key(const Section& s, const std::string& section, const std::string& key) {
  const std::string* v = find(s, key);
  if (!v) throw UsageError("[" + section + "] needs '" + key + "'");
  return *v;
}

void only_keys(const Section& s, const std::string& section, const std::set<std::string>& allowed) {
  for (const auto& kv : s)
    if (!allowed.count(kv.first)) throw UsageError("[" + section + "]: unexpected key '" + kv.first + "'");
}

std::set<std::string> indexed(const std::string& prefix, int count) {
  std::set<std::string> out;
  for (int i = 1; i <= count; ++i) out.insert(prefix + std::to_string(i));
  return out;
}

// "lo .. hi"
std::pair<std::string, std::string> parse_box(const std::string& v, const std::string& key) {
  const auto dots = v.find("..");
  if (dots == std::string::npos) throw UsageError("[controls] " + key + ": expected 'lo .. hi'");
  const std::string lo = trim(v.substr(0, dots)), hi = trim(v.substr(dots + 2));
  if (lo.empty() || hi.empty()) throw UsageError("[controls] " + key + ": expected 'lo .. hi'");
  return {lo, hi};
}

FeedbackPolicy parse_policy(const Section& s, int n, int m,
                            const std::vector<std::pair<std::string, double>>& params) {
  const std::string family = find(s, "family") ? *find(s, "family") : "expression";
  auto num = [&](const char* key) { return to_number(need_key(s, "policy", key), std::string("[policy] ") + key); };
  if (family == "linear_fraction") {
    only_keys(s, "policy", {"family", "alpha"});
    return FeedbackPolicy::linear_fraction(num("alpha"));
  }
  if (family == "power") {
    only_keys(s, "policy", {"family", "d", "A", "alpha"});
    return FeedbackPolicy::power(num("d"), num("A"), num("alpha"));
  }
  if (family == "constant") {
    VectorXd u(m);
    for (int i = 0; i < m; ++i) u(i) = num(("u" + std::to_string(i + 1)).c_str());
    return FeedbackPolicy::constant(u, n);
  }
  if (family == "affine") {
    only_keys(s, "policy", {"family", "C", "c"});
    const auto C = to_numbers(need_key(s, "policy", "C"), "[policy] C");
    const auto c = to_numbers(need_key(s, "policy", "c"), "[policy] c");
    if (static_cast<int>(C.size()) != m * n || static_cast<int>(c.size()) != m)
      throw UsageError("[policy]: C needs m*n entries (row-major) and c needs m");
    MatrixXd Cm(m, n);
    for (int i = 0; i < m; ++i)
      for (int k = 0; k < n; ++k) Cm(i, k) = C[i * n + k];
    return FeedbackPolicy::affine(Cm, Eigen::Map<const VectorXd>(c.data(), m));
  }
  if (family != "expression") throw UsageError("[policy]: unknown family '" + family + "'");
  // Keys u1..um are the maps; anything else is a policy parameter.
  std::vector<std::string> exprs(m);
  auto pp = params;
  const auto us = indexed("u", m);
  for (const auto& [k, v] : s) {
    if (k == "family") continue;
    if (us.count(k)) {
      exprs[std::stoi(k.substr(1)) - 1] = v;
    } else {
      pp.emplace_back(k, to_number(v, "[policy] " + k));
    }
  }
  for (int i = 0; i < m; ++i)
    if (exprs[i].empty()) throw UsageError("[policy] needs 'u" + std::to_string(i + 1) + "'");
  return FeedbackPolicy(exprs, pp, n);
}

}  // namespace

Problem parse_problem(const std::string& text, const std::map<std::string, double>& overrides) {
  const auto secs = read_sections(text);
  Problem p;
  const Section& meta = need(secs, "meta");
  only_keys(meta, "meta", {"name", "kind"});
  p.name = find(meta, "name") ? *find(meta, "name") : "problem";
  p.kind = need_key(meta, "meta", "kind");
  if (p.kind != "ocp" && p.kind != "euler" && p.kind != "game")
    throw UsageError("[meta] kind must be ocp, euler or game, not '" + p.kind + "'");

  std::vector<std::pair<std::string, double>> params;
  if (secs.count("params"))
    for (const auto& [k, v] : secs.at("params")) params.emplace_back(k, to_number(v, "[params] " + k));
  for (const auto& [k, v] : overrides) {
    auto it = std::find_if(params.begin(), params.end(), [&](const auto& kv) { return kv.first == k; });
    if (it == params.end()) throw UsageError("no parameter '" + k + "' in [params]");
    it->second = v;
  }

  const Section& dims = need(secs, "dims");
  only_keys(dims, "dims", {"n", "m"});
  const int n = to_int(need_key(dims, "dims", "n"), "[dims] n");
  if (n < 1) throw UsageError("[dims] n must be at least 1");
  std::vector<int> ms;
  if (const std::string* mv = find(dims, "m")) {
    for (const auto& s : split(*mv, ',')) ms.push_back(to_int(s, "[dims] m"));
  } else if (p.kind == "euler") {
    ms = {n};
  } else {
    throw UsageError("[dims] needs 'm'");
  }
  for (int mj : ms)
    if (mj < 1) throw UsageError("[dims] control dimensions must be at least 1");
  if (p.kind != "game" && ms.size() != 1) throw UsageError("[dims] m takes a list only for games");
  if (p.kind == "euler" && ms[0] != n) throw UsageError("euler problems need m = n");
  int m_total = 0;
  for (int mj : ms) m_total += mj;

  std::vector<std::string> dynamics;
  if (p.kind == "euler") {
    if (secs.count("dynamics")) throw UsageError("euler problems take no [dynamics]; the control is the next state");
  } else {
    const Section& dyn = need(secs, "dynamics");
    only_keys(dyn, "dynamics", indexed("f", n));
    for (int i = 1; i <= n; ++i) dynamics.push_back(need_key(dyn, "dynamics", "f" + std::to_string(i)));
  }

  const Section& rew = need(secs, "reward");
  std::vector<std::string> rewards;
  if (p.kind == "game") {
    only_keys(rew, "reward", indexed("g", static_cast<int>(ms.size())));
    for (std::size_t j = 1; j <= ms.size(); ++j) rewards.push_back(need_key(rew, "reward", "g" + std::to_string(j)));
  } else {
    only_keys(rew, "reward", {"g"});
    rewards.push_back(need_key(rew, "reward", "g"));
  }

  std::vector<std::pair<std::string, std::string>> bounds(m_total, {"-inf", "inf"});
  if (secs.count("controls")) {
    const Section& c = secs.at("controls");
    only_keys(c, "controls", indexed("u", m_total));
    for (const auto& [k, v] : c) bounds[std::stoi(k.substr(1)) - 1] = parse_box(v, k);
  }

  std::optional<std::string> terminal;
  if (secs.count("terminal")) {
    if (p.kind != "ocp") throw UsageError("[terminal] is supported for ocp problems only");
    const Section& s = secs.at("terminal");
    only_keys(s, "terminal", {"gT"});
    terminal = need_key(s, "terminal", "gT");
  }

  if (p.kind == "game") {
    GameDefinition g;
    g.name = p.name;
    g.state_dim = n;
    g.control_dims = ms;
    g.params = params;
    g.dynamics = dynamics;
    g.rewards = rewards;
    g.bounds = bounds;
    p.game = std::make_shared<const GameProblem>(g);
  } else {
    ProblemDefinition d;
    d.name = p.name;
    d.state_dim = n;
    d.control_dim = ms[0];
    d.params = params;
    d.dynamics = dynamics;
    d.reward = rewards[0];
    d.terminal = terminal;
    d.bounds = bounds;
    if (p.kind == "euler") {
      p.euler = std::make_shared<const EulerProblem>(d);
      p.stage = p.euler->stage_problem();
    } else {
      p.stage = std::make_shared<const ExpressionProblem>(d);
    }
  }

  if (secs.count("policy")) {
    if (p.kind == "game") throw UsageError("[policy] is not supported for games");
    p.policy = parse_policy(secs.at("policy"), n, ms[0], params);
    p.policy_problem = p.stage;
  }

  if (secs.count("horizon")) {
    const Section& h = secs.at("horizon");
    only_keys(h, "horizon", {"T", "tail_rule", "x0"});
    if (const std::string* v = find(h, "T")) p.T = to_int(*v, "[horizon] T");
    if (const std::string* v = find(h, "tail_rule")) p.tail = tail_rule_from_string(*v);
    if (const std::string* v = find(h, "x0")) {
      const auto x = to_numbers(*v, "[horizon] x0");
      p.x0 = Eigen::Map<const VectorXd>(x.data(), static_cast<Eigen::Index>(x.size()));
    }
  }
  if (secs.count("tolerances")) {
    const Section& s = secs.at("tolerances");
    only_keys(s, "tolerances", {"stationarity_tol", "recursion_tol", "tc_tol", "internal_tol", "max_iters"});
    for (const auto& [k, v] : s) p.tolerances[k] = to_number(v, "[tolerances] " + k);
  }
  return p;
}

Problem load_problem(const std::string& path, const Options& opts) {
  Problem p;
  if (path.rfind("bench:", 0) == 0) {
    const std::string name = path.substr(6);
    const auto& known = bench::names();
    if (std::find(known.begin(), known.end(), name) == known.end())
      throw UsageError("unknown benchmark '" + name + "'");
    bench::BenchmarkCase c = bench::make_by_name(name, opts.params);
    p.name = c.name;
    switch (c.kind) {
      case bench::Kind::open_loop:
        p.kind = "ocp";
        p.stage = c.problem;
        break;
      case bench::Kind::markov:
      case bench::Kind::euler:
        p.kind = "euler";
        p.euler = c.euler;
        p.stage = c.euler->stage_problem();
        p.policy = c.policy;
        p.policy_problem = c.problem;
        break;
      case bench::Kind::game:
        p.kind = "game";
        p.game = c.game;
        break;
    }
    p.x0 = c.x0;
    p.bench = std::move(c);
  } else {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw UsageError("cannot open '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    p = parse_problem(ss.str(), opts.params);
  }
  if (opts.T) p.T = *opts.T;
  if (p.T < 1) throw UsageError("T must be at least 1");
  if (opts.x0) p.x0 = Eigen::Map<const VectorXd>(opts.x0->data(), static_cast<Eigen::Index>(opts.x0->size()));
  if (opts.tail_rule) p.tail = tail_rule_from_string(*opts.tail_rule);
  if (opts.tol) p.tolerances["stationarity_tol"] = *opts.tol;
  const int n = p.game ? p.game->state_dim() : p.stage->state_dim();
  if (p.x0.size() == 0) throw UsageError("no initial state: pass --x0 or set x0 in [horizon]");
  if (p.x0.size() != n)
    throw UsageError("x0 has " + std::to_string(p.x0.size()) + " entries, the state has " + std::to_string(n));
  return p;
}

FeedbackPolicy read_policy(const std::string& text, const Problem& p) {
  const auto secs = read_sections(text);
  const StageProblem& target = p.policy_problem ? *p.policy_problem : *p.stage;
  std::vector<std::pair<std::string, double>> params;
  if (const auto* e = dynamic_cast<const ExpressionProblem*>(&target)) params = e->definition().params;
  return parse_policy(need(secs, "policy"), target.state_dim(), target.control_dim(), params);
}

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string trajectory_csv(const Trajectory& traj, const Plan& plan) {
  const int T = traj.horizon();
  const Eigen::Index n = traj.states.front().size();
  const Eigen::Index m = plan.control_at(0).size();
  std::string s = "t";
  for (Eigen::Index i = 1; i <= n; ++i) s += ",x" + std::to_string(i);
  for (Eigen::Index i = 1; i <= m; ++i) s += ",u" + std::to_string(i);
  s += '\n';
  for (int t = 0; t <= T; ++t) {
    s += std::to_string(t);
    for (Eigen::Index i = 0; i < n; ++i) s += "," + format_double(traj.states[t](i));
    const VectorXd u = plan.control_at(t);
    for (Eigen::Index i = 0; i < m; ++i) s += "," + format_double(u(i));
    s += '\n';
  }
  return s;
}

std::string adjoints_csv(const AdjointSeq& adj, int count) {
  const Eigen::Index n = adj.lambda.empty() ? 0 : adj.lambda.front().size();
  std::string s = "t";
  for (Eigen::Index i = 1; i <= n; ++i) s += ",lambda" + std::to_string(i);
  s += '\n';
  for (int t = 1; t <= count && t <= adj.horizon(); ++t) {
    s += std::to_string(t);
    for (Eigen::Index i = 0; i < n; ++i) s += "," + format_double(adj.at(t)(i));
    s += '\n';
  }
  return s;
}

std::string plan_csv(const Plan& plan, int first) {
  const Eigen::Index m = plan.control_at(0).size();
  std::string s = "t";
  for (Eigen::Index i = 0; i < m; ++i) s += ",u" + std::to_string(first + i);
  s += '\n';
  for (int t = 0; t < plan.horizon(); ++t) {
    s += std::to_string(t);
    for (Eigen::Index i = 0; i < m; ++i) s += "," + format_double(plan.controls[t](i));
    s += '\n';
  }
  return s;
}

Plan read_plan_csv(const std::string& text, TailRule tail) {
  std::istringstream in(text);
  std::string line;
  std::vector<std::string> header;
  while (header.empty() && std::getline(in, line))
    if (!trim(line).empty()) header = split(trim(line), ',');
  if (header.empty()) throw UsageError("plan file is empty");
  std::vector<int> ucols;
  bool has_x = false;
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (!header[i].empty() && header[i][0] == 'u') ucols.push_back(static_cast<int>(i));
    if (!header[i].empty() && header[i][0] == 'x') has_x = true;
  }
  if (ucols.empty()) throw UsageError("plan file has no u columns");
  Plan plan;
  plan.tail = tail;
  int row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (trim(line).empty()) continue;
    const auto cells = split(trim(line), ',');
    if (cells.size() != header.size()) throw UsageError("plan file row " + std::to_string(row) + ": wrong number of fields");
    VectorXd u(static_cast<Eigen::Index>(ucols.size()));
    for (std::size_t k = 0; k < ucols.size(); ++k)
      u(static_cast<Eigen::Index>(k)) = to_number(cells[ucols[k]], "plan file row " + std::to_string(row));
    plan.controls.push_back(u);
  }
  if (has_x && !plan.controls.empty()) plan.controls.pop_back();
  if (plan.controls.empty()) throw UsageError("plan file has no controls");
  plan.steady_state = plan.controls.back();
  return plan;
}

}  // namespace dmp::cli
