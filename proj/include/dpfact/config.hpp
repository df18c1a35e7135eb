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

#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "dpfact/data_io.hpp"
#include "dpfact/errors.hpp"
#include "dpfact/federation.hpp"
#include "dpfact/local_solver.hpp"
#include "dpfact/privacy.hpp"

namespace dpfact {

struct ExperimentConfig {
  SolverParams solver;  // eta 1e-2, gamma 5, mu 0.5, tau 1, clip 1
  PrivacyParams privacy;  // rho 1e-3, delta 1e-4
  std::size_t rank = 50;
  std::size_t sites = 5;
  int max_epochs = 100;
  // > 0 runs exactly this many epochs (privacy-first mode).
  int fixed_epochs = 0;
  // > 0 derives rho from (epsilon, delta, fixed_epochs).
  double epsilon = 0.0;
  double tol = 1e-4;
  double transfer_rate = kDefaultTransferRate;
  std::uint64_t seed = 0;
  bool concurrent = false;
  bool shuffle_rows = false;

  SynthSpec synth;

  std::string tensor_path;     // input COO for `run`
  std::string output_dir = "out";
  std::string metrics_path;    // defaults to <output_dir>/metrics.csv
  std::string reference_path;  // optional factor set to score against

  std::filesystem::path metrics_file() const {
    return metrics_path.empty() ? std::filesystem::path(output_dir) / "metrics.csv"
                                : std::filesystem::path(metrics_path);
  }

  FederationConfig federation() const {
    FederationConfig f;
    f.solver = solver;
    f.privacy = privacy;
    f.rank = rank;
    f.seed = seed;
    f.transfer_rate = transfer_rate;
    f.concurrent = concurrent;
    return f;
  }
};

namespace detail {

inline std::vector<std::vector<std::size_t>> parse_suppress(const std::string& key,
                                                            std::string_view text) {
  // "site:column,site:column"
  std::vector<std::vector<std::size_t>> out;
  std::size_t pos = 0;
  while (pos < text.size()) {
    auto end = text.find(',', pos);
    if (end == std::string_view::npos) end = text.size();
    const auto item = trim(text.substr(pos, end - pos));
    pos = end + 1;
    if (item.empty()) continue;
    const auto colon = item.find(':');
    std::size_t site = 0;
    std::size_t col = 0;
    if (colon == std::string_view::npos || !parse_number(trim(item.substr(0, colon)), site) ||
        !parse_number(trim(item.substr(colon + 1)), col)) {
      throw ConfigError(key, "expected site:column pairs, got '" + std::string(item) + "'");
    }
    if (out.size() <= site) out.resize(site + 1);
    out[site].push_back(col);
  }
  return out;
}

}  // namespace detail

// Flat "key = value" text; '#' starts a comment line. Unknown keys and
// out-of-domain values are rejected with the offending key named.
inline ExperimentConfig parse_config(std::istream& in, const std::string& source = "<config>") {
  ExperimentConfig cfg;
  using Setter = std::function<void(const std::string&, std::string_view)>;

  auto real = [](double& field, auto check, const char* rule) -> Setter {
    return [&field, check, rule](const std::string& key, std::string_view v) {
      double x = 0.0;
      if (!detail::parse_number(v, x)) throw ConfigError(key, "expected a number, got '" + std::string(v) + "'");
      if (!check(x)) throw ConfigError(key, std::string("must be ") + rule);
      field = x;
    };
  };
  auto integer = [](auto& field, auto check, const char* rule) -> Setter {
    return [&field, check, rule](const std::string& key, std::string_view v) {
      std::remove_reference_t<decltype(field)> x{};
      if (!detail::parse_number(v, x)) throw ConfigError(key, "expected an integer, got '" + std::string(v) + "'");
      if (!check(x)) throw ConfigError(key, std::string("must be ") + rule);
      field = x;
    };
  };
  auto boolean = [](bool& field) -> Setter {
    return [&field](const std::string& key, std::string_view v) {
      if (v == "true" || v == "1") field = true;
      else if (v == "false" || v == "0") field = false;
      else throw ConfigError(key, "expected true or false, got '" + std::string(v) + "'");
    };
  };
  auto text = [](std::string& field) -> Setter {
    return [&field](const std::string&, std::string_view v) { field = std::string(v); };
  };
  auto positive = [](auto x) { return x > 0; };
  auto non_negative = [](auto x) { return x >= 0; };
  auto finite_pos = [](double x) { return x > 0.0 && std::isfinite(x); };
  auto finite_nonneg = [](double x) { return x >= 0.0 && std::isfinite(x); };

  std::map<std::string, Setter, std::less<>> setters{
      {"eta", real(cfg.solver.eta, finite_pos, "finite and > 0")},
      {"gamma", real(cfg.solver.gamma, finite_nonneg, "finite and >= 0")},
      {"mu", real(cfg.solver.mu, finite_nonneg, "finite and >= 0")},
      {"tau", integer(cfg.solver.tau, positive, ">= 1")},
      {"clip", real(cfg.solver.clip, positive, "> 0 (inf disables clipping)")},
      {"prox_threshold",
       [&cfg](const std::string& key, std::string_view v) {
         if (v == "eta_mu") cfg.solver.prox = ProxThreshold::kEtaMu;
         else if (v == "mu") cfg.solver.prox = ProxThreshold::kMu;
         else throw ConfigError(key, "expected eta_mu or mu");
       }},
      {"rho", real(cfg.privacy.rho, positive, "> 0 (inf disables noise)")},
      {"delta", real(cfg.privacy.delta, [](double x) { return x > 0.0 && x < 1.0; }, "in (0, 1)")},
      {"epsilon", real(cfg.epsilon, finite_nonneg, "finite and >= 0")},
      {"rank", integer(cfg.rank, positive, ">= 1")},
      {"sites", integer(cfg.sites, positive, ">= 1")},
      {"max_epochs", integer(cfg.max_epochs, non_negative, ">= 0")},
      {"fixed_epochs", integer(cfg.fixed_epochs, non_negative, ">= 0")},
      {"tol", real(cfg.tol, finite_pos, "finite and > 0")},
      {"transfer_rate", real(cfg.transfer_rate, finite_pos, "finite and > 0")},
      {"seed", integer(cfg.seed, non_negative, ">= 0")},
      {"concurrent", boolean(cfg.concurrent)},
      {"shuffle_rows", boolean(cfg.shuffle_rows)},
      {"dim_i", integer(cfg.synth.dims.i, positive, ">= 1")},
      {"dim_j", integer(cfg.synth.dims.j, positive, ">= 1")},
      {"dim_k", integer(cfg.synth.dims.k, positive, ">= 1")},
      {"true_rank", integer(cfg.synth.rank, positive, ">= 1")},
      {"sparsity", real(cfg.synth.sparsity, [](double x) { return x > 0.0 && x <= 1.0; }, "in (0, 1]")},
      {"obs_noise", real(cfg.synth.noise_std, finite_nonneg, "finite and >= 0")},
      {"suppress",
       [&cfg](const std::string& key, std::string_view v) {
         cfg.synth.suppress = detail::parse_suppress(key, v);
       }},
      {"tensor", text(cfg.tensor_path)},
      {"output_dir", text(cfg.output_dir)},
      {"metrics", text(cfg.metrics_path)},
      {"reference", text(cfg.reference_path)},
  };

  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto t = detail::trim(line);
    if (t.empty() || t.front() == '#') continue;
    const auto eq = t.find('=');
    if (eq == std::string_view::npos) throw ParseError(source, lineno, "expected 'key = value'");
    const std::string key(detail::trim(t.substr(0, eq)));
    const auto value = detail::trim(t.substr(eq + 1));
    auto it = setters.find(key);
    if (it == setters.end()) throw ConfigError(key, "unknown key");
    it->second(key, value);
  }
  cfg.synth.sites = cfg.sites;
  cfg.synth.seed = cfg.seed;
  return cfg;
}

inline ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open config: " + path.string());
  return parse_config(in, path.string());
}

}  // namespace dpfact
