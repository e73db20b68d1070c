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

#include <cstdlib>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "dmp/cli.hpp"

namespace {

void common(CLI::App* app, dmp::cli::Options& o) {
  app->add_option("--T", o.T, "truncation horizon");
  app->add_option("--x0", o.x0, "initial state, comma list")->delimiter(',');
  app->add_option("--tol", o.tol, "stationarity tolerance");
  app->add_option("--tail-rule", o.tail_rule, "repeat_last | zero | steady_state");
  app->add_option("--out-dir", o.out_dir, "artifact directory (DMP_OUT_DIR overrides)");
  app->add_flag("--json", o.json, "print machine-readable output");
  app->add_option("--threads", o.threads, "worker threads for the sufficiency probe");
  app->add_option("--seed", o.seed, "sampling seed");
  app->allow_extras();
}

// Leftover `--name value` pairs become parameter overrides.
bool collect_params(const CLI::App* app, dmp::cli::Options& o) {
  const auto rest = app->remaining();
  for (std::size_t i = 0; i < rest.size(); i += 2) {
    const std::string& key = rest[i];
    if (key.rfind("--", 0) != 0 || key.size() < 3 || i + 1 >= rest.size()) {
      std::cerr << "error: unexpected argument '" << key << "'\n";
      return false;
    }
    char* end = nullptr;
    const double v = std::strtod(rest[i + 1].c_str(), &end);
    if (rest[i + 1].empty() || *end != '\0') {
      std::cerr << "error: " << key << " needs a number\n";
      return false;
    }
    o.params[key.substr(2)] = v;
  }
  return true;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"dmp: discrete-time maximum principle solver and checker"};
  app.require_subcommand(1);
  dmp::cli::Options o;
  std::string file, plan_file, filter;

  auto* solve = app.add_subcommand("solve", "solve an optimal control problem");
  solve->add_option("file", file, "problem file or bench:<name>")->required();
  solve->add_flag("--finite", o.finite, "plain truncated problem, no horizon ladder");
  common(solve, o);

  auto* check = app.add_subcommand("check", "residual reports for a plan or policy");
  check->add_option("file", file, "problem file or bench:<name>")->required();
  check->add_option("plan", plan_file, "plan CSV or policy file");
  check->add_flag("--amp-probe", o.amp_probe, "probe the tail summability assumption");
  check->add_flag("--sufficiency", o.sufficiency, "sample concavity chords");
  common(check, o);

  auto* game = app.add_subcommand("game", "open-loop Nash equilibrium");
  game->add_option("file", file, "game file or bench:<name>")->required();
  game->add_option("--method", o.method, "newton | br");
  common(game, o);

  auto* bench = app.add_subcommand("bench", "benchmark table");
  bench->add_option("name", filter, "single benchmark");
  common(bench, o);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : dmp::cli::kError;
  }
  for (const auto* sub : {solve, check, game, bench})
    if (sub->parsed() && !collect_params(sub, o)) return dmp::cli::kError;

  if (solve->parsed()) return dmp::cli::cmd_solve(file, o, std::cout, std::cerr);
  if (check->parsed()) return dmp::cli::cmd_check(file, plan_file, o, std::cout, std::cerr);
  if (game->parsed()) return dmp::cli::cmd_game(file, o, std::cout, std::cerr);
  return dmp::cli::cmd_bench(filter, o, std::cout, std::cerr);
}
