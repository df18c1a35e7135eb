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

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <map>
#include <mutex>
#include <random>
#include <span>
#include <string>
#include <tuple>
#include <vector>

#include "dpfact/errors.hpp"
#include "dpfact/factor_matrix.hpp"
#include "dpfact/rng.hpp"

namespace dpfact {

inline constexpr double kNoNoise = std::numeric_limits<double>::infinity();

struct PrivacyParams {
  // Per-epoch zCDP budget for each shared factor matrix. Infinity disables
  // the noise entirely.
  double rho = 1e-3;
  double delta = 1e-4;

  bool noise_enabled() const { return std::isfinite(rho); }

  void validate() const {
    if (!(rho > 0.0)) throw DomainError("rho must be > 0 (or inf for no noise)");
    if (!(delta > 0.0 && delta < 1.0)) throw DomainError("delta must lie in (0, 1)");
  }
};

// L2 sensitivity of tau-pass permutation SGD with gradient bound L:
// 2 * tau * L * eta.
inline double l2_sensitivity(int tau, double lipschitz, double eta) {
  if (tau <= 0 || !(lipschitz > 0.0) || !(eta > 0.0) ||
      !std::isfinite(lipschitz) || !std::isfinite(eta)) {
    throw DomainError("l2_sensitivity: tau, L and eta must be finite and positive");
  }
  return 2.0 * static_cast<double>(tau) * lipschitz * eta;
}

// Noise scale giving rho-zCDP for the given sensitivity.
inline double gaussian_sigma(double sensitivity, double rho) {
  if (!(rho > 0.0)) throw DomainError("gaussian_sigma: rho must be > 0");
  if (!(sensitivity >= 0.0)) throw DomainError("gaussian_sigma: sensitivity must be >= 0");
  if (std::isinf(rho)) return 0.0;
  return sensitivity * std::sqrt(1.0 / (2.0 * rho));
}

// Adds i.i.d. N(0, sigma^2) to every element. sigma == 0 draws nothing.
inline FactorMatrix perturb_matrix(FactorMatrix m, double sigma, Rng& rng) {
  if (!(sigma >= 0.0) || !std::isfinite(sigma)) {
    throw DomainError("perturb_matrix: sigma must be finite and >= 0");
  }
  if (sigma == 0.0) return m;
  std::normal_distribution<double> noise(0.0, sigma);
  for (double& v : m.values()) v += noise(rng);
  return m;
}

inline double compose_serial(std::span<const double> rhos) {
  double total = 0.0;
  for (double r : rhos) {
    if (!(r >= 0.0)) throw DomainError("compose_serial: rho must be >= 0");
    total += r;
  }
  return total;
}

// Mechanisms over a partition of the data into T disjoint shards.
inline double compose_parallel(std::span<const double> rhos_per_site,
                               std::size_t sites) {
  if (rhos_per_site.size() != sites || sites == 0) {
    throw DimensionError("compose_parallel: expected one budget per site");
  }
  return compose_serial(rhos_per_site) / static_cast<double>(sites);
}

// rho-zCDP implies (rho + sqrt(4 rho ln(1/delta)), delta)-DP.
inline double zcdp_to_dp(double rho, double delta) {
  if (!(delta > 0.0 && delta < 1.0)) throw DomainError("zcdp_to_dp: delta must lie in (0, 1)");
  if (!(rho >= 0.0)) throw DomainError("zcdp_to_dp: rho must be >= 0");
  return rho + std::sqrt(4.0 * rho * std::log(1.0 / delta));
}

// The leading term only: sqrt(4 rho ln(1/delta)).
inline double zcdp_to_dp_approx(double rho, double delta) {
  if (!(delta > 0.0 && delta < 1.0)) throw DomainError("zcdp_to_dp_approx: delta must lie in (0, 1)");
  if (!(rho >= 0.0)) throw DomainError("zcdp_to_dp_approx: rho must be >= 0");
  return std::sqrt(4.0 * rho * std::log(1.0 / delta));
}

// Per-epoch, per-matrix budget so that E epochs of two noised matrices give
// (epsilon, delta)-DP under the approximate conversion.
inline double rho_for_target(double epsilon, double delta, int epochs) {
  if (!(epsilon > 0.0)) throw DomainError("rho_for_target: epsilon must be > 0");
  if (!(delta > 0.0 && delta < 1.0)) throw DomainError("rho_for_target: delta must lie in (0, 1)");
  if (epochs <= 0) throw DomainError("rho_for_target: epochs must be > 0");
  return epsilon * epsilon /
         (8.0 * static_cast<double>(epochs) * std::log(1.0 / delta));
}

enum class MatrixTag : int { kB = 1, kC = 2 };

struct LedgerEntry {
  int epoch = 0;
  std::size_t site_id = 0;
  MatrixTag tag = MatrixTag::kB;
  double rho = 0.0;
  double sigma = 0.0;
  double sensitivity = 0.0;

  auto key() const { return std::make_tuple(epoch, site_id, static_cast<int>(tag)); }
};

// Append-only zCDP ledger across T sites. Matrices released by one site in
// one epoch compose serially; sites compose in parallel; epochs serially.
// Appends may arrive from several threads; the ledger is kept sorted by
// (epoch, site_id, tag) so totals do not depend on arrival order.
class PrivacyAccountant {
 public:
  explicit PrivacyAccountant(std::size_t sites = 1) : sites_(sites) {
    if (sites_ == 0) throw DomainError("PrivacyAccountant: need at least one site");
  }
  PrivacyAccountant(const PrivacyAccountant& other) {
    std::lock_guard lock(other.mu_);
    sites_ = other.sites_;
    ledger_ = other.ledger_;
    rho_total_ = other.rho_total_;
  }
  PrivacyAccountant& operator=(const PrivacyAccountant& other) {
    if (this == &other) return *this;
    std::scoped_lock lock(mu_, other.mu_);
    sites_ = other.sites_;
    ledger_ = other.ledger_;
    rho_total_ = other.rho_total_;
    return *this;
  }

  void append(const LedgerEntry& entry) {
    if (entry.site_id >= sites_) {
      throw DomainError("PrivacyAccountant: site id out of range");
    }
    if (!(entry.rho >= 0.0)) throw DomainError("PrivacyAccountant: rho must be >= 0");
    std::lock_guard lock(mu_);
    auto pos = std::upper_bound(
        ledger_.begin(), ledger_.end(), entry,
        [](const LedgerEntry& a, const LedgerEntry& b) { return a.key() < b.key(); });
    ledger_.insert(pos, entry);
    rho_total_ = replay(ledger_, sites_);
  }

  double rho_total() const {
    std::lock_guard lock(mu_);
    return rho_total_;
  }

  // Serial spend of a single site across all of its releases.
  double site_total(std::size_t site_id) const {
    std::lock_guard lock(mu_);
    std::vector<double> rhos;
    for (const auto& e : ledger_)
      if (e.site_id == site_id) rhos.push_back(e.rho);
    return compose_serial(rhos);
  }

  std::vector<LedgerEntry> ledger() const {
    std::lock_guard lock(mu_);
    return ledger_;
  }

  std::size_t sites() const { return sites_; }

  double epsilon_exact(double delta) const { return zcdp_to_dp(rho_total(), delta); }
  double epsilon_approx(double delta) const {
    return zcdp_to_dp_approx(rho_total(), delta);
  }

  // Recomputes the total from a sorted ledger.
  static double replay(std::span<const LedgerEntry> ledger, std::size_t sites) {
    std::map<int, std::vector<std::vector<double>>> by_epoch;
    for (const auto& e : ledger) {
      auto& per_site = by_epoch[e.epoch];
      per_site.resize(sites);
      per_site[e.site_id].push_back(e.rho);
    }
    std::vector<double> epoch_totals;
    for (const auto& [epoch, per_site] : by_epoch) {
      std::vector<double> site_rhos;
      for (const auto& rhos : per_site) site_rhos.push_back(compose_serial(rhos));
      epoch_totals.push_back(compose_parallel(site_rhos, sites));
    }
    return compose_serial(epoch_totals);
  }

 private:
  mutable std::mutex mu_;
  std::size_t sites_ = 1;
  std::vector<LedgerEntry> ledger_;
  double rho_total_ = 0.0;
};

}  // namespace dpfact
