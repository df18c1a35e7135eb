//
// Copyright 2026 The DPFact Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
//

// dpfact: generate synthetic data, run federated factorization, compare
// factor sets, and compute privacy budgets.

#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "dpfact.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Differentially private collaborative CP tensor factorization"};
  app.require_subcommand(1);

  std::string config_path;
  auto* generate = app.add_subcommand("generate", "Write a synthetic tensor, shards and truth factors");
  generate->add_option("--config", config_path, "Experiment config file")->required();
  std::optional<std::uint64_t> gen_seed;
  generate->add_option("--seed", gen_seed, "Override the config seed");

  auto* run = app.add_subcommand("run", "Run the federated factorization");
  run->add_option("--config", config_path, "Experiment config file")->required();
  dpfact::RunOverrides overrides;
  run->add_option("--seed", overrides.seed, "Override the config seed");
  run->add_flag("--no-noise", overrides.no_noise, "Disable perturbation (non-private comparator)");
  run->add_option("--fixed-epochs", overrides.fixed_epochs,
                  "Run exactly E epochs (privacy-first mode)")
      ->check(CLI::PositiveNumber);

  auto* evaluate = app.add_subcommand("evaluate", "Factor match score between two factor sets");
  std::string factors_a;
  std::string factors_b;
  evaluate->add_option("factors_a", factors_a, "Directory with A.txt B.txt C.txt")->required();
  evaluate->add_option("factors_b", factors_b, "Directory with A.txt B.txt C.txt")->required();

  auto* budget = app.add_subcommand("budget", "zCDP budget calculator");
  dpfact::BudgetQuery query;
  budget->add_option("--epsilon", query.epsilon, "Target epsilon; prints the per-epoch rho");
  budget->add_option("--rho", query.rho, "Per-epoch, per-matrix rho; prints epsilon");
  budget->add_option("--delta", query.delta, "delta")->capture_default_str();
  budget->add_option("--epochs", query.epochs, "Number of epochs E")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return dpfact::kExitError;
  }

  try {
    if (*generate) {
      auto cfg = dpfact::load_config(config_path);
      if (gen_seed) {
        cfg.seed = *gen_seed;
        cfg.synth.seed = *gen_seed;
      }
      dpfact::cmd_generate(cfg, std::cout);
      return 0;
    }
    if (*run) {
      const auto report = dpfact::cmd_run(dpfact::load_config(config_path), overrides, std::cout);
      return report.exit_code;
    }
    if (*evaluate) {
      dpfact::cmd_evaluate(factors_a, factors_b, std::cout);
      return 0;
    }
    if (*budget) {
      dpfact::cmd_budget(query, std::cout);
      return 0;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return dpfact::kExitError;
  }
  return dpfact::kExitError;
}
