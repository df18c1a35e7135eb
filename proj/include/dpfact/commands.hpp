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

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "dpfact/config.hpp"
#include "dpfact/data_io.hpp"
#include "dpfact/federation.hpp"
#include "dpfact/metrics.hpp"
#include "dpfact/privacy.hpp"

namespace dpfact {

inline constexpr int kExitConverged = 0;
inline constexpr int kExitError = 1;
inline constexpr int kExitEpochLimit = 2;

inline constexpr const char* kMetricsHeader =
    "epoch,rmse,comm_bytes,comm_seconds,rho_total,eps_exact,eps_approx";

namespace detail {

inline std::string fmt(double v, const char* spec = "%.10g") {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  std::snprintf(buf, sizeof(buf), spec, v);
  return buf;
}

}  // namespace detail

inline void write_metrics_csv(const std::vector<EpochMetrics>& rows,
                              const std::filesystem::path& path) {
  auto out = detail::open_for_write(path);
  out << kMetricsHeader << '\n';
  for (const auto& m : rows) {
    out << m.epoch << ',' << detail::format_double(m.rmse) << ',' << m.comm_bytes << ','
        << detail::format_double(m.comm_seconds) << ','
        << detail::format_double(m.rho_total) << ','
        << detail::format_double(m.eps_exact) << ','
        << detail::format_double(m.eps_approx) << '\n';
  }
  if (!out) throw Error("write failed: " + path.string());
}

// `epoch=<e> rho_total=<r> eps_exact=<x> eps_approx=<y> delta=<d>`
inline std::string budget_line(int epoch, double rho_total, double delta) {
  return "epoch=" + std::to_string(epoch) + " rho_total=" + detail::fmt(rho_total) +
         " eps_exact=" + detail::fmt(zcdp_to_dp(rho_total, delta)) +
         " eps_approx=" + detail::fmt(zcdp_to_dp_approx(rho_total, delta)) +
         " delta=" + detail::fmt(delta);
}

// ---------------------------------------------------------------------------
// generate

struct GenerateResult {
  SyntheticData data;
  std::vector<std::filesystem::path> files;
};

// Writes <out>/global.coo, <out>/shard_<t>.coo, the stacked ground truth in
// <out>/truth and each site's truth in <out>/truth/site_<t>.
inline GenerateResult cmd_generate(const ExperimentConfig& cfg, std::ostream& log) {
  GenerateResult r;
  r.data = generate_synthetic(cfg.synth);
  const std::filesystem::path dir(cfg.output_dir);
  r.files.push_back(dir / "global.coo");
  write_coo(r.data.global, r.files.back());
  for (std::size_t t = 0; t < r.data.shards.size(); ++t) {
    r.files.push_back(dir / ("shard_" + std::to_string(t) + ".coo"));
    write_coo(r.data.shards[t], r.files.back());
    write_factors(r.data.truth[t], dir / "truth" / ("site_" + std::to_string(t)));
  }
  std::vector<FactorMatrix> blocks;
  for (const auto& f : r.data.truth) blocks.push_back(f.A);
  write_factors(FactorizationResult::FromFactors(vstack(blocks), r.data.truth.front().B,
                                                 r.data.truth.front().C),
                dir / "truth");
  log << "global " << r.files.front().string() << " entries=" << r.data.global.nnz() << '\n';
  for (std::size_t t = 0; t < r.data.shards.size(); ++t) {
    log << "shard " << t << ' ' << r.files[t + 1].string()
        << " rows=" << r.data.shards[t].dims().i << " entries=" << r.data.shards[t].nnz()
        << '\n';
  }
  return r;
}

// ---------------------------------------------------------------------------
// run

struct RunOverrides {
  std::optional<std::uint64_t> seed;
  bool no_noise = false;
  std::optional<int> fixed_epochs;
};

struct RunReport {
  ExperimentConfig config;  // after overrides
  RunOutcome outcome;
  std::optional<FmsReport> reference_fms;
  std::vector<std::size_t> zero_columns;  // per site, in A
  double rho_total = 0.0;
  double eps_exact = 0.0;
  double eps_approx = 0.0;
  double delta = 0.0;
  std::vector<std::string> warnings;
  FactorizationResult global_factors;
  int exit_code = kExitEpochLimit;
};

// Folds CLI overrides into the config and derives rho from an epsilon target
// when running a fixed number of epochs.
inline ExperimentConfig apply_overrides(ExperimentConfig cfg, const RunOverrides& o) {
  if (o.seed) {
    cfg.seed = *o.seed;
    cfg.synth.seed = *o.seed;
  }
  if (o.fixed_epochs) cfg.fixed_epochs = *o.fixed_epochs;
  if (cfg.fixed_epochs > 0 && cfg.epsilon > 0.0) {
    cfg.privacy.rho = rho_for_target(cfg.epsilon, cfg.privacy.delta, cfg.fixed_epochs);
  }
  if (o.no_noise) cfg.privacy.rho = kNoNoise;
  return cfg;
}

// Runs a federation over pre-partitioned shards.
inline RunReport run_experiment(std::vector<SparseTensorCOO> shards, const ExperimentConfig& cfg) {
  RunReport report;
  report.config = cfg;
  Federation fed(std::move(shards), cfg.federation());
  report.warnings = fed.warnings();
  const bool fixed = cfg.fixed_epochs > 0;
  const int epochs = fixed ? cfg.fixed_epochs : cfg.max_epochs;
  report.outcome = fed.run(epochs, cfg.tol, /*stop_on_convergence=*/!fixed);
  for (const auto& s : fed.sites()) report.zero_columns.push_back(s.A.zero_columns());
  report.delta = cfg.privacy.delta;
  report.rho_total = fed.accountant().rho_total();
  report.eps_exact = zcdp_to_dp(report.rho_total, report.delta);
  report.eps_approx = zcdp_to_dp_approx(report.rho_total, report.delta);
  report.global_factors = fed.global_factors();
  report.exit_code = (!fixed && report.outcome.converged) ? kExitConverged : kExitEpochLimit;
  if (!cfg.reference_path.empty()) {
    report.reference_fms = fms_report(read_factors(cfg.reference_path), report.global_factors);
  }
  return report;
}

// Reads the configured tensor, partitions it, runs, and writes the metrics
// CSV plus the learned factors under <output_dir>.
inline RunReport cmd_run(const ExperimentConfig& base, const RunOverrides& overrides,
                         std::ostream& log) {
  const ExperimentConfig cfg = apply_overrides(base, overrides);
  if (cfg.tensor_path.empty()) throw ConfigError("tensor", "required for run");
  SparseTensorCOO tensor = read_coo(cfg.tensor_path);
  if (cfg.shuffle_rows) tensor = shuffle_patient_rows(tensor, cfg.seed);
  RunReport report = run_experiment(partition_rows(tensor, cfg.sites), cfg);

  write_metrics_csv(report.outcome.epochs, cfg.metrics_file());
  const std::filesystem::path dir(cfg.output_dir);
  write_factors(report.global_factors, dir / "factors");

  for (const auto& w : report.warnings) log << "warning: " << w << '\n';
  log << "sites=" << cfg.sites << " rank=" << cfg.rank << " eta=" << detail::fmt(cfg.solver.eta)
      << " gamma=" << detail::fmt(cfg.solver.gamma) << " mu=" << detail::fmt(cfg.solver.mu)
      << " tau=" << cfg.solver.tau << " rho=" << detail::fmt(cfg.privacy.rho)
      << " seed=" << cfg.seed << '\n';
  log << "initial_rmse=" << detail::fmt(report.outcome.initial_rmse) << '\n';
  if (!report.outcome.epochs.empty()) {
    const auto& last = report.outcome.epochs.back();
    log << "epochs=" << last.epoch << " final_rmse=" << detail::fmt(last.rmse)
        << " comm_bytes=" << last.comm_bytes
        << " comm_seconds=" << detail::fmt(last.comm_seconds) << '\n';
    log << budget_line(last.epoch, report.rho_total, report.delta) << '\n';
  } else {
    log << "epochs=0\n";
  }
  for (std::size_t t = 0; t < report.zero_columns.size(); ++t) {
    log << "site " << t << " zero_columns=" << report.zero_columns[t] << '\n';
  }
  if (report.reference_fms) log << "fms=" << detail::fmt(report.reference_fms->score) << '\n';
  log << (report.exit_code == kExitConverged ? "status=converged" : "status=epoch_limit")
      << " metrics=" << cfg.metrics_file().string() << '\n';
  return report;
}

// ---------------------------------------------------------------------------
// evaluate

inline FmsReport cmd_evaluate(const std::filesystem::path& a, const std::filesystem::path& b,
                              std::ostream& log) {
  const FactorizationResult x = read_factors(a);
  const FactorizationResult y = read_factors(b);
  if (x.rank() != y.rank()) {
    throw DimensionError("evaluate: ranks differ (" + std::to_string(x.rank()) + " vs " +
                         std::to_string(y.rank()) + ")");
  }
  FmsReport report = fms_report(x, y);
  log << "fms=" << detail::fmt(report.score) << '\n';
  log << "column matched cosine_product weight_ratio score\n";
  for (const auto& c : report.columns) {
    log << c.x_column << ' ' << c.y_column << ' ' << detail::fmt(c.cosine_product) << ' '
        << detail::fmt(c.weight_ratio) << ' ' << detail::fmt(c.score);
    if (c.score < 1.0 - 1e-9) log << " *";
    log << '\n';
  }
  return report;
}

// ---------------------------------------------------------------------------
// budget

struct BudgetQuery {
  std::optional<double> epsilon;
  std::optional<double> rho;
  double delta = 1e-4;
  int epochs = 1;
};

struct BudgetAnswer {
  double rho_b = 0.0;
  double rho_total = 0.0;
  double eps_exact = 0.0;
  double eps_approx = 0.0;
};

// Given epsilon: the per-epoch, per-matrix rho. Given rho: the spend after
// 2E serial releases. Prints one budget line per epoch either way.
inline BudgetAnswer cmd_budget(const BudgetQuery& q, std::ostream& log) {
  if (q.epsilon.has_value() == q.rho.has_value()) {
    throw DomainError("budget: give exactly one of --epsilon or --rho");
  }
  if (!(q.delta > 0.0 && q.delta < 1.0)) throw DomainError("budget: delta must lie in (0, 1)");
  if (q.epochs <= 0) throw DomainError("budget: epochs must be >= 1");
  BudgetAnswer ans;
  if (q.epsilon) {
    ans.rho_b = rho_for_target(*q.epsilon, q.delta, q.epochs);
    log << "rho_b=" << detail::fmt(ans.rho_b) << " epsilon=" << detail::fmt(*q.epsilon)
        << " delta=" << detail::fmt(q.delta) << " epochs=" << q.epochs << '\n';
  } else {
    if (!(*q.rho > 0.0) || !std::isfinite(*q.rho)) throw DomainError("budget: rho must be finite and > 0");
    ans.rho_b = *q.rho;
  }
  std::vector<double> releases;
  for (int e = 1; e <= q.epochs; ++e) {
    releases.push_back(ans.rho_b);  // B
    releases.push_back(ans.rho_b);  // C
    ans.rho_total = compose_serial(releases);
    log << budget_line(e, ans.rho_total, q.delta) << '\n';
  }
  ans.eps_exact = zcdp_to_dp(ans.rho_total, q.delta);
  ans.eps_approx = zcdp_to_dp_approx(ans.rho_total, q.delta);
  return ans;
}

}  // namespace dpfact
