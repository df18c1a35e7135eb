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

// Acceptance checks. Prints one PASS/FAIL line per criterion and exits
// non-zero if any fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <functional>
#include <limits>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include "dpfact.hpp"

namespace {

using namespace dpfact;
using Clock = std::chrono::steady_clock;

struct Outcome {
  bool pass = false;
  std::string detail;
};

int failures = 0;

void Check(int id, const char* name, double budget_seconds,
           const std::function<Outcome()>& body) {
  const auto start = Clock::now();
  Outcome o;
  try {
    o = body();
  } catch (const std::exception& e) {
    o = {false, std::string("exception: ") + e.what()};
  }
  const double secs = std::chrono::duration<double>(Clock::now() - start).count();
  if (secs > budget_seconds) {
    o.pass = false;
    o.detail += " (over time budget)";
  }
  if (!o.pass) ++failures;
  std::printf("%s C%d %s [%.2fs] %s\n", o.pass ? "PASS" : "FAIL", id, name, secs,
              o.detail.c_str());
  std::fflush(stdout);
}

std::string Fmt(const char* spec, double v) {
  char buf[96];
  std::snprintf(buf, sizeof(buf), spec, v);
  return buf;
}

FactorMatrix Uniform(std::size_t rows, std::size_t rank, std::mt19937_64& rng, double lo,
                     double hi) {
  std::uniform_real_distribution<double> u(lo, hi);
  FactorMatrix m(rows, rank);
  for (double& v : m.values()) v = u(rng);
  return m;
}

// 1. Analytic row gradients against central differences.
Outcome GradientOracle() {
  std::mt19937_64 rng(101);
  std::uniform_int_distribution<std::size_t> dim(1, 5), rank_d(1, 3);
  const double h = 1e-6;
  double worst = 0.0;
  for (int inst = 0; inst < 100; ++inst) {
    const std::size_t i = dim(rng), j = dim(rng), k = dim(rng), rank = rank_d(rng);
    std::uniform_int_distribution<std::size_t> pi(0, i - 1), pj(0, j - 1), pk(0, k - 1);
    const Entry e{pi(rng), pj(rng), pk(rng), std::uniform_real_distribution<double>(0.5, 2.0)(rng)};
    SiteState s = SiteState::Initialize(0, SparseTensorCOO(Dims{i, j, k}, {e}), rank, inst);
    s.A = Uniform(i, rank, rng, -1, 1);
    s.B = Uniform(j, rank, rng, -1, 1);
    s.C = Uniform(k, rank, rng, -1, 1);
    const FactorMatrix b_hat = Uniform(j, rank, rng, -1, 1);
    const FactorMatrix c_hat = Uniform(k, rank, rng, -1, 1);
    SolverParams p;
    p.eta = 1.0;
    p.gamma = std::uniform_real_distribution<double>(0.0, 5.0)(rng);
    p.mu = 0.0;
    p.clip = std::numeric_limits<double>::infinity();

    SiteState stepped = s;
    sgd_entry_update(stepped, e, b_hat.row(e.j), c_hat.row(e.k), p);

    auto check = [&](FactorMatrix SiteState::*mode, std::size_t row) {
      std::vector<double> analytic(rank), numeric(rank);
      for (std::size_t r = 0; r < rank; ++r) {
        analytic[r] = ((s.*mode)(row, r) - (stepped.*mode)(row, r)) / p.eta;
        SiteState plus = s, minus = s;
        (plus.*mode)(row, r) += h;
        (minus.*mode)(row, r) -= h;
        numeric[r] = (local_objective(plus, b_hat, c_hat, p) -
                      local_objective(minus, b_hat, c_hat, p)) / (2 * h);
      }
      double diff = 0.0, norm = 0.0;
      for (std::size_t r = 0; r < rank; ++r) {
        diff += (analytic[r] - numeric[r]) * (analytic[r] - numeric[r]);
        norm += numeric[r] * numeric[r];
      }
      worst = std::max(worst, std::sqrt(diff) / std::max(std::sqrt(norm), 1e-3));
    };
    check(&SiteState::A, e.i);
    check(&SiteState::B, e.j);
    check(&SiteState::C, e.k);
  }
  return {worst < 1e-5, "max relative error " + Fmt("%.3g", worst)};
}

// 2. Group soft-thresholding against a numeric minimizer.
Outcome ProxOracle() {
  std::mt19937_64 rng(202);
  std::uniform_real_distribution<double> u(-2.0, 2.0);
  double worst_gap = 0.0;
  bool below_zero = true;
  for (int inst = 0; inst < 50; ++inst) {
    const std::size_t rows = 1 + inst % 6;
    FactorMatrix v(rows, 1);
    for (double& x : v.values()) x = u(rng);
    const double norm = v.column_norm(0);
    const double t = std::abs(u(rng)) * norm;
    auto objective = [&](const std::vector<double>& x) {
      double sq = 0.0, xn = 0.0;
      for (std::size_t n = 0; n < rows; ++n) {
        sq += (x[n] - v(n, 0)) * (x[n] - v(n, 0));
        xn += x[n] * x[n];
      }
      return 0.5 * sq + t * std::sqrt(xn);
    };
    // Numeric minimizer: golden-section along the ray through v, then a
    // coordinate pattern search from there in the full space.
    auto along = [&](double s) {
      std::vector<double> x(rows);
      for (std::size_t n = 0; n < rows; ++n) x[n] = s * v(n, 0);
      return x;
    };
    double lo = 0.0, hi = 1.0;
    const double g = (std::sqrt(5.0) - 1.0) / 2.0;
    for (int it = 0; it < 200; ++it) {
      const double a = hi - g * (hi - lo), b = lo + g * (hi - lo);
      if (objective(along(a)) < objective(along(b))) hi = b; else lo = a;
    }
    std::vector<double> best = along(0.5 * (lo + hi));
    double best_f = objective(best);
    for (double step = 0.1; step > 1e-10; step *= 0.5) {
      bool improved = true;
      while (improved) {
        improved = false;
        for (std::size_t n = 0; n < rows; ++n)
          for (double dir : {1.0, -1.0}) {
            auto x = best;
            x[n] += dir * step;
            const double f = objective(x);
            if (f < best_f) { best_f = f; best = x; improved = true; }
          }
      }
    }
    const auto out = prox_l21(v, t);
    std::vector<double> got(rows);
    for (std::size_t n = 0; n < rows; ++n) got[n] = out(n, 0);
    worst_gap = std::max(worst_gap, objective(got) - best_f);
    if (norm <= t && out.column_norm(0) != 0.0) below_zero = false;
  }
  std::mt19937_64 rng2(5);
  const FactorMatrix m = Uniform(7, 4, rng2, -1, 1);
  const bool identity = prox_l21(m, 0.0) == m;
  return {worst_gap <= 1e-6 && identity && below_zero,
          "max objective gap " + Fmt("%.3g", worst_gap) + (identity ? "" : ", identity broken") +
              (below_zero ? "" : ", below-threshold column non-zero")};
}

// 3. Budget inversion and conversion.
Outcome PrivacyRoundTrip() {
  double worst = 0.0;
  for (double eps : {0.5, 1.2, 1.9})
    for (double delta : {1e-4, 1e-6})
      for (int epochs : {10, 20, 50}) {
        std::vector<double> releases(2 * epochs, rho_for_target(eps, delta, epochs));
        worst = std::max(worst, std::abs(zcdp_to_dp_approx(compose_serial(releases), delta) - eps));
      }
  PrivacyAccountant acc(5);
  for (int e = 1; e <= 20; ++e)
    for (std::size_t t = 0; t < 5; ++t) {
      acc.append({e, t, MatrixTag::kB, 1e-3, 0.0, 0.0});
      acc.append({e, t, MatrixTag::kC, 1e-3, 0.0, 0.0});
    }
  const double exact = acc.epsilon_exact(1e-4);
  return {worst < 1e-9 && exact >= 1.2 && exact <= 1.3,
          "max |eps error| " + Fmt("%.3g", worst) + ", eps_exact(1e-3, 1e-4, 20) = " +
              Fmt("%.6f", exact)};
}

// 4. Empirical noise scale.
Outcome NoiseCalibration() {
  const SolverParams p;
  const PrivacyParams priv;
  const double sigma = gaussian_sigma(l2_sensitivity(p.tau, p.clip, p.eta), priv.rho);
  Rng rng = make_stream(404, 0, Stream::kNoise);
  const auto out = perturb_matrix(FactorMatrix(1000, 1000), sigma, rng);
  double sum = 0.0, sq = 0.0;
  for (double v : out.values()) sum += v;
  const double mean = sum / 1e6;
  for (double v : out.values()) sq += (v - mean) * (v - mean);
  const double sd = std::sqrt(sq / (1e6 - 1));
  const double rel = std::abs(sd - sigma) / sigma;
  return {rel < 0.02, "sigma " + Fmt("%.6f", sigma) + ", empirical " + Fmt("%.6f", sd) +
                          ", relative error " + Fmt("%.3g", rel)};
}

// 5. Noise-free convergence on a small synthetic tensor.
Outcome Convergence() {
  SynthSpec spec;
  spec.dims = {100, 30, 40};
  spec.rank = 5;
  spec.sparsity = 1e-3;
  spec.sites = 5;
  spec.seed = 505;
  const auto data = generate_synthetic(spec);
  FederationConfig cfg;
  cfg.rank = 5;
  cfg.seed = 505;
  cfg.solver.gamma = 5.0;
  cfg.solver.mu = 0.0;
  cfg.solver.eta = 0.03;
  cfg.privacy.rho = kNoNoise;
  Federation fed(data.shards, cfg);
  const auto out = fed.run(50, 0.0, /*stop_on_convergence=*/false);
  const double final_rmse = out.epochs.back().rmse;
  return {final_rmse <= 0.5 * out.initial_rmse,
          "initial " + Fmt("%.4f", out.initial_rmse) + ", after 50 epochs " +
              Fmt("%.4f", final_rmse)};
}

// 6. One site without regularization is plain SGD.
Outcome CentralizedEquivalence() {
  SynthSpec spec;
  spec.dims = {80, 20, 25};
  spec.rank = 4;
  spec.sparsity = 0.01;
  spec.sites = 1;
  spec.seed = 606;
  const auto data = generate_synthetic(spec);
  FederationConfig cfg;
  cfg.rank = 4;
  cfg.seed = 606;
  cfg.solver.gamma = 0.0;
  cfg.solver.mu = 0.0;
  cfg.privacy.rho = kNoNoise;
  Federation fed(data.shards, cfg);
  const auto out = fed.run(30, 0.0, false);
  SgdBaselineParams bp;
  bp.rank = 4;
  bp.seed = 606;
  bp.eta = cfg.solver.eta;
  bp.epochs = 30;
  const auto base = centralized_sgd(data.global, bp);
  bool same = out.initial_rmse == base.initial_rmse && out.epochs.size() == base.rmse.size();
  for (std::size_t e = 0; same && e < base.rmse.size(); ++e) same = out.epochs[e].rmse == base.rmse[e];
  return {same, same ? "30 RMSE values identical" : "RMSE columns differ"};
}

double Spearman(const std::vector<double>& x, const std::vector<double>& y) {
  auto ranks = [](const std::vector<double>& v) {
    std::vector<std::size_t> idx(v.size());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    std::sort(idx.begin(), idx.end(), [&](auto a, auto b) { return v[a] < v[b]; });
    std::vector<double> r(v.size());
    for (std::size_t n = 0; n < idx.size();) {
      std::size_t m = n;
      while (m + 1 < idx.size() && v[idx[m + 1]] == v[idx[n]]) ++m;
      for (std::size_t q = n; q <= m; ++q) r[idx[q]] = 0.5 * static_cast<double>(n + m) + 1.0;
      n = m + 1;
    }
    return r;
  };
  const auto rx = ranks(x), ry = ranks(y);
  const double mx = std::accumulate(rx.begin(), rx.end(), 0.0) / rx.size();
  const double my = std::accumulate(ry.begin(), ry.end(), 0.0) / ry.size();
  double sxy = 0, sxx = 0, syy = 0;
  for (std::size_t n = 0; n < rx.size(); ++n) {
    sxy += (rx[n] - mx) * (ry[n] - my);
    sxx += (rx[n] - mx) * (rx[n] - mx);
    syy += (ry[n] - my) * (ry[n] - my);
  }
  return sxy / std::sqrt(sxx * syy);
}

// 7. Utility grows with the privacy budget.
constexpr double kLargeEpsFms = 0.9;

Outcome PrivacyUtility() {
  const std::vector<double> eps_grid{0.1, 0.5, 1.0, 2.0, 5.0};
  const int epochs = 20;
  const int seeds = 5;
  std::vector<double> mean_fms(eps_grid.size(), 0.0);
  double worst_seed = 1.0;
  for (int s = 0; s < seeds; ++s) {
    std::vector<double> seed_fms;
    SynthSpec spec;
    spec.dims = {200, 30, 40};
    spec.rank = 5;
    spec.sparsity = 0.02;
    spec.sites = 5;
    spec.seed = 700 + s;
    const auto data = generate_synthetic(spec);
    FederationConfig cfg;
    cfg.rank = 5;
    cfg.seed = 700 + s;
    cfg.solver.mu = 0.0;
    cfg.privacy.rho = kNoNoise;
    Federation clean(data.shards, cfg);
    clean.run(epochs, 0.0, false);
    const auto reference = clean.global_factors();
    for (std::size_t n = 0; n < eps_grid.size(); ++n) {
      cfg.privacy.rho = rho_for_target(eps_grid[n], cfg.privacy.delta, epochs);
      Federation priv(data.shards, cfg);
      priv.run(epochs, 0.0, false);
      seed_fms.push_back(fms(reference, priv.global_factors()));
      mean_fms[n] += seed_fms.back() / seeds;
    }
    worst_seed = std::min(worst_seed, Spearman(eps_grid, seed_fms));
  }
  const double rho_s = Spearman(eps_grid, mean_fms);
  std::string detail = "mean FMS";
  for (double f : mean_fms) detail += " " + Fmt("%.4f", f);
  detail += ", Spearman " + Fmt("%.3f", rho_s) + " (worst single seed " +
            Fmt("%.3f", worst_seed) + ")";
  return {rho_s > 0.8 && worst_seed > 0.8 && mean_fms.back() >= kLargeEpsFms, detail};
}

// 8. Communication time is linear in the number of sites.
Outcome CommLinearity() {
  const auto c1 = comm_cost(300, 800, 50, 1, 1);
  const auto c5 = comm_cost(300, 800, 50, 5, 1);
  const auto c10 = comm_cost(300, 800, 50, 10, 1);
  const bool bytes_exact = c5.bytes == 5 * c1.bytes && c10.bytes == 10 * c1.bytes;
  const double r5 = c5.seconds / c1.seconds, r10 = c10.seconds / c1.seconds;
  const bool secs = std::abs(r5 - 5.0) <= 1e-12 * 5.0 && std::abs(r10 - 10.0) <= 1e-12 * 10.0;
  return {bytes_exact && secs, "seconds " + Fmt("%.6f", c1.seconds) + " : " +
                                   Fmt("%.6f", c5.seconds) + " : " + Fmt("%.6f", c10.seconds)};
}

// 9. A component absent at one site is pruned there and kept elsewhere.
Outcome Heterogeneity() {
  SynthSpec spec;
  spec.dims = {60, 30, 30};
  spec.rank = 3;
  spec.sparsity = 0.5;
  spec.sites = 3;
  spec.seed = 909;
  const std::size_t site = 1, suppressed = 2;
  spec.suppress = {{}, {suppressed}};
  const auto data = generate_synthetic(spec);

  const std::vector<double> mus{0.0, 2.0, 5.0, 12.0, 100.0};
  const std::size_t calibrated = 3;
  std::vector<std::size_t> zero_counts;
  std::string detail;
  bool pruned = false;
  for (std::size_t n = 0; n < mus.size(); ++n) {
    FederationConfig cfg;
    cfg.rank = 3;
    cfg.seed = 909;
    cfg.solver.eta = 0.05;
    cfg.solver.gamma = 5.0;
    cfg.solver.mu = mus[n];
    cfg.privacy.rho = kNoNoise;
    Federation fed(data.shards, cfg);
    fed.run(1000, 0.0, false);
    const FactorMatrix& a = fed.sites()[site].A;
    zero_counts.push_back(a.zero_columns());
    if (n == calibrated) {
      // Which learned column is the suppressed truth component: greedy match
      // of the global feature factors against the truth.
      const auto& truth = data.truth[site];
      std::vector<double> cos(3 * 3);
      for (std::size_t p = 0; p < 3; ++p)
        for (std::size_t q = 0; q < 3; ++q)
          cos[p * 3 + q] = detail::column_cosine(truth.B, p, fed.server().B_hat, q) *
                           detail::column_cosine(truth.C, p, fed.server().C_hat, q);
      std::vector<int> match(3, -1);
      std::vector<bool> used_p(3), used_q(3);
      for (int round = 0; round < 3; ++round) {
        double best = -2;
        std::size_t bp = 0, bq = 0;
        for (std::size_t p = 0; p < 3; ++p)
          for (std::size_t q = 0; q < 3; ++q)
            if (!used_p[p] && !used_q[q] && cos[p * 3 + q] > best) {
              best = cos[p * 3 + q];
              bp = p;
              bq = q;
            }
        used_p[bp] = used_q[bq] = true;
        match[bp] = static_cast<int>(bq);
      }
      const std::size_t learned = static_cast<std::size_t>(match[suppressed]);
      pruned = a.column_norm(learned) == 0.0;
      for (std::size_t p = 0; p < 3; ++p)
        if (p != suppressed && a.column_norm(static_cast<std::size_t>(match[p])) == 0.0) pruned = false;
      detail += "suppressed component -> column " + std::to_string(learned) + "; ";
    }
  }
  bool monotone = true;
  detail += "zero columns by mu:";
  for (std::size_t n = 0; n < mus.size(); ++n) {
    detail += " " + Fmt("%g", mus[n]) + "->" + std::to_string(zero_counts[n]);
    if (n > 0 && zero_counts[n] < zero_counts[n - 1]) monotone = false;
  }
  return {monotone && pruned, detail};
}

// 10. Byte-level scan of serialized uploads for patient-factor values.
Outcome NoLeak() {
  SynthSpec spec;
  spec.dims = {60, 10, 12};
  spec.rank = 3;
  spec.sparsity = 0.05;
  spec.sites = 3;
  spec.seed = 1010;
  const auto data = generate_synthetic(spec);
  std::vector<SiteState> sites;
  for (std::size_t t = 0; t < 3; ++t) sites.push_back(SiteState::Initialize(t, data.shards[t], 3, 1010));
  std::vector<double> sentinels;
  for (auto& s : sites)
    for (std::size_t n = 0; n < s.A.values().size(); ++n) {
      // Distinct, recognisable values unlikely to arise in B or C.
      s.A.values()[n] = 0.123456789012345 + 1e-9 * static_cast<double>(sentinels.size());
      sentinels.push_back(s.A.values()[n]);
    }
  ServerState server = ServerState::Initialize(10, 12, 3, 1010);
  PrivacyAccountant acc(3);
  const auto r = run_round(sites, server, SolverParams{}, PrivacyParams{}, acc, RoundOptions{});
  for (const auto& s : sites)
    for (double v : s.A.values()) sentinels.push_back(v);
  std::size_t hits = 0, scanned = 0;
  for (const auto& m : r.uploads) {
    const auto bytes = m.Serialize();
    scanned += bytes.size();
    for (double v : sentinels) {
      unsigned char pattern[8];
      std::memcpy(pattern, &v, 8);
      if (std::search(bytes.begin(), bytes.end(), pattern, pattern + 8) != bytes.end()) ++hits;
    }
    if (bytes.size() != payload_bytes(10, 12, 3)) ++hits;
  }
  return {hits == 0, std::to_string(scanned) + " bytes scanned for " +
                         std::to_string(sentinels.size()) + " values, " + std::to_string(hits) +
                         " hits"};
}

}  // namespace

int main() {
  Check(1, "gradient-oracle", 5, GradientOracle);
  Check(2, "prox-oracle", 5, ProxOracle);
  Check(3, "privacy-round-trip", 1, PrivacyRoundTrip);
  Check(4, "noise-calibration", 10, NoiseCalibration);
  Check(5, "noise-free-convergence", 60, Convergence);
  Check(6, "centralized-equivalence", 60, CentralizedEquivalence);
  Check(7, "privacy-utility-trend", 300, PrivacyUtility);
  Check(8, "communication-linearity", 1, CommLinearity);
  Check(9, "heterogeneity-capture", 120, Heterogeneity);
  Check(10, "no-leak", 1, NoLeak);
  std::printf("%d of 10 criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
