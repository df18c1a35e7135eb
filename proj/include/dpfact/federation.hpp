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
#include <bit>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstring>
#include <exception>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include "dpfact/cp.hpp"
#include "dpfact/errors.hpp"
#include "dpfact/factor_matrix.hpp"
#include "dpfact/local_solver.hpp"
#include "dpfact/metrics.hpp"
#include "dpfact/partition.hpp"
#include "dpfact/privacy.hpp"
#include "dpfact/rng.hpp"
#include "dpfact/sparse_tensor.hpp"

namespace dpfact {

inline constexpr std::size_t kMessageHeaderBytes = 24;
inline constexpr double kDefaultTransferRate = 15'000'000.0;  // bytes/second

// Globals B-hat, C-hat held by the parameter server.
struct ServerState {
  FactorMatrix B_hat;
  FactorMatrix C_hat;
  int epoch = 0;

  static ServerState Initialize(std::size_t j, std::size_t k, std::size_t rank,
                                std::uint64_t seed) {
    Rng init = make_stream(seed, 0, Stream::kServerInit);
    ServerState s;
    s.B_hat = random_uniform(j, rank, init);
    s.C_hat = random_uniform(k, rank, init);
    return s;
  }
};

// One site's upload for one epoch. There is deliberately no field that can
// carry the patient factor A.
struct RoundMessage {
  // Tag written into the header: both feature matrices follow.
  static constexpr std::uint64_t kFeatureMatricesTag =
      static_cast<std::uint64_t>(MatrixTag::kB) |
      static_cast<std::uint64_t>(MatrixTag::kC);

  std::size_t site_id = 0;
  int epoch = 0;
  FactorMatrix priv_B;
  FactorMatrix priv_C;

  std::size_t byte_size() const {
    return kMessageHeaderBytes +
           8 * (priv_B.values().size() + priv_C.values().size());
  }

  // Little-endian: three u64 header words (site_id, epoch, tag), then B and
  // C row-major as IEEE-754 doubles.
  std::vector<std::uint8_t> Serialize() const {
    std::vector<std::uint8_t> out;
    out.reserve(byte_size());
    put(out, static_cast<std::uint64_t>(site_id));
    put(out, static_cast<std::uint64_t>(epoch));
    put(out, kFeatureMatricesTag);
    for (double v : priv_B.values()) put(out, std::bit_cast<std::uint64_t>(v));
    for (double v : priv_C.values()) put(out, std::bit_cast<std::uint64_t>(v));
    return out;
  }

  static RoundMessage Deserialize(std::span<const std::uint8_t> bytes,
                                  std::size_t j, std::size_t k,
                                  std::size_t rank) {
    const std::size_t expected = kMessageHeaderBytes + 8 * rank * (j + k);
    if (bytes.size() != expected) {
      throw ProtocolError("RoundMessage: expected " + std::to_string(expected) +
                          " bytes, got " + std::to_string(bytes.size()));
    }
    std::size_t pos = 0;
    RoundMessage m;
    m.site_id = static_cast<std::size_t>(get(bytes, pos));
    m.epoch = static_cast<int>(get(bytes, pos));
    if (get(bytes, pos) != kFeatureMatricesTag) {
      throw ProtocolError("RoundMessage: unknown matrix tag");
    }
    m.priv_B = FactorMatrix(j, rank);
    m.priv_C = FactorMatrix(k, rank);
    for (double& v : m.priv_B.values()) v = std::bit_cast<double>(get(bytes, pos));
    for (double& v : m.priv_C.values()) v = std::bit_cast<double>(get(bytes, pos));
    return m;
  }

 private:
  static void put(std::vector<std::uint8_t>& out, std::uint64_t word) {
    for (int b = 0; b < 8; ++b) out.push_back(static_cast<std::uint8_t>(word >> (8 * b)));
  }
  static std::uint64_t get(std::span<const std::uint8_t> in, std::size_t& pos) {
    std::uint64_t word = 0;
    for (int b = 0; b < 8; ++b) word |= static_cast<std::uint64_t>(in[pos++]) << (8 * b);
    return word;
  }
};

// Size of one upload (or one broadcast) of B (J x R) and C (K x R).
inline std::uint64_t payload_bytes(std::size_t j, std::size_t k, std::size_t rank,
                                   std::size_t header = kMessageHeaderBytes) {
  return header + 8ull * (static_cast<std::uint64_t>(j) * rank +
                          static_cast<std::uint64_t>(k) * rank);
}

struct CommCost {
  std::uint64_t bytes = 0;
  double seconds = 0.0;
};

// E rounds at T sites, each round one upload and one broadcast per site.
inline CommCost comm_cost(std::size_t j, std::size_t k, std::size_t rank,
                          std::size_t sites, std::size_t epochs,
                          double rate = kDefaultTransferRate,
                          std::size_t header = kMessageHeaderBytes) {
  if (!(rate > 0.0)) throw DomainError("comm_cost: transfer rate must be > 0");
  CommCost c;
  c.bytes = static_cast<std::uint64_t>(epochs) * sites * 2 *
            payload_bytes(j, k, rank, header);
  c.seconds = static_cast<double>(c.bytes) / rate;
  return c;
}

// Elastic averaging step at the server:
//   B-hat += eta * sum_t gamma * (privB_t - B-hat)
// summed in ascending site order. Advances the epoch counter.
inline void server_update(ServerState& server, std::span<const RoundMessage> uploads,
                          std::size_t sites, double eta, double gamma) {
  std::vector<const RoundMessage*> by_site(sites, nullptr);
  for (const auto& m : uploads) {
    if (m.site_id >= sites) {
      throw ProtocolError("server_update: unknown site " + std::to_string(m.site_id));
    }
    if (by_site[m.site_id] != nullptr) {
      throw ProtocolError("server_update: duplicate upload from site " +
                          std::to_string(m.site_id));
    }
    if (m.priv_B.rows() != server.B_hat.rows() || m.priv_B.rank() != server.B_hat.rank() ||
        m.priv_C.rows() != server.C_hat.rows() || m.priv_C.rank() != server.C_hat.rank()) {
      throw DimensionError("server_update: upload shape does not match globals");
    }
    by_site[m.site_id] = &m;
  }
  for (std::size_t t = 0; t < sites; ++t) {
    if (by_site[t] == nullptr) {
      throw ProtocolError("server_update: missing upload from site " + std::to_string(t));
    }
  }
  auto pull = [&](FactorMatrix& global, auto member) {
    auto g = global.values();
    std::vector<double> force(g.size(), 0.0);
    for (const RoundMessage* m : by_site) {
      const auto local = (m->*member).values();
      for (std::size_t n = 0; n < g.size(); ++n) force[n] += gamma * (local[n] - g[n]);
    }
    for (std::size_t n = 0; n < g.size(); ++n) g[n] += eta * force[n];
  };
  pull(server.B_hat, &RoundMessage::priv_B);
  pull(server.C_hat, &RoundMessage::priv_C);
  ++server.epoch;
}

// Local feature matrices of one site at one point in time.
struct FeatureSnapshot {
  FactorMatrix B;
  FactorMatrix C;
};

inline std::vector<FeatureSnapshot> snapshot_features(std::span<const SiteState> sites) {
  std::vector<FeatureSnapshot> out;
  out.reserve(sites.size());
  for (const auto& s : sites) out.push_back({s.B, s.C});
  return out;
}

// True iff every site's B and C moved by a relative Frobenius change strictly
// below tol.
inline bool has_converged(std::span<const FeatureSnapshot> prev,
                          std::span<const FeatureSnapshot> curr, double tol) {
  if (prev.size() != curr.size()) throw DimensionError("has_converged: site count differs");
  double worst = 0.0;
  for (std::size_t t = 0; t < prev.size(); ++t) {
    for (auto member : {&FeatureSnapshot::B, &FeatureSnapshot::C}) {
      const FactorMatrix& p = prev[t].*member;
      const FactorMatrix& c = curr[t].*member;
      const double change =
          frobenius_distance(c, p) / std::max(p.frobenius_norm(), 1e-12);
      worst = std::max(worst, change);
    }
  }
  return worst < tol;
}

struct EpochMetrics {
  int epoch = 0;
  double rmse = 0.0;
  std::uint64_t comm_bytes = 0;  // cumulative through this epoch
  double comm_seconds = 0.0;
  double rho_total = 0.0;
  double eps_exact = 0.0;
  double eps_approx = 0.0;
};

struct RoundOptions {
  // Global observed tensor (concatenated shards); used for RMSE.
  const SparseTensorCOO* observed = nullptr;
  double transfer_rate = kDefaultTransferRate;
  std::uint64_t bytes_before = 0;
  bool concurrent = false;
};

struct RoundResult {
  EpochMetrics metrics;
  std::vector<RoundMessage> uploads;
};

namespace detail {

inline RoundMessage site_round(SiteState& site, const ServerState& server,
                               const SolverParams& params,
                               const PrivacyParams& priv,
                               PrivacyAccountant& accountant, int epoch) {
  run_local_epoch(site, server.B_hat, server.C_hat, params);
  RoundMessage msg;
  msg.site_id = site.site_id;
  msg.epoch = epoch;
  if (priv.noise_enabled()) {
    const double sensitivity = l2_sensitivity(params.tau, params.clip, params.eta);
    const double sigma = gaussian_sigma(sensitivity, priv.rho);
    msg.priv_B = perturb_matrix(site.B, sigma, site.noise_rng);
    msg.priv_C = perturb_matrix(site.C, sigma, site.noise_rng);
    accountant.append({epoch, site.site_id, MatrixTag::kB, priv.rho, sigma, sensitivity});
    accountant.append({epoch, site.site_id, MatrixTag::kC, priv.rho, sigma, sensitivity});
  } else {
    msg.priv_B = site.B;
    msg.priv_C = site.C;
    accountant.append({epoch, site.site_id, MatrixTag::kB, kNoNoise, 0.0, 0.0});
    accountant.append({epoch, site.site_id, MatrixTag::kC, kNoNoise, 0.0, 0.0});
  }
  return msg;
}

}  // namespace detail

// One synchronous communication epoch: local solves (optionally one thread
// per site), noised uploads, ordered aggregation, broadcast. Sites keep
// their own B, C; the updated globals become their penalty anchors.
inline RoundResult run_round(std::vector<SiteState>& sites, ServerState& server,
                             const SolverParams& params, const PrivacyParams& priv,
                             PrivacyAccountant& accountant,
                             const RoundOptions& opts) {
  if (sites.empty()) throw DomainError("run_round: no sites");
  const int epoch = server.epoch + 1;
  RoundResult result;
  result.uploads.resize(sites.size());

  if (opts.concurrent && sites.size() > 1) {
    std::vector<std::exception_ptr> errors(sites.size());
    std::vector<std::thread> workers;
    workers.reserve(sites.size());
    for (std::size_t t = 0; t < sites.size(); ++t) {
      workers.emplace_back([&, t] {
        try {
          result.uploads[t] =
              detail::site_round(sites[t], server, params, priv, accountant, epoch);
        } catch (...) {
          errors[t] = std::current_exception();
        }
      });
    }
    for (auto& w : workers) w.join();
    for (const auto& e : errors)
      if (e) std::rethrow_exception(e);
  } else {
    for (std::size_t t = 0; t < sites.size(); ++t) {
      result.uploads[t] =
          detail::site_round(sites[t], server, params, priv, accountant, epoch);
    }
  }

  server_update(server, result.uploads, sites.size(), params.eta, params.gamma);

  std::uint64_t round_bytes = 0;
  for (const auto& m : result.uploads) round_bytes += 2 * m.byte_size();

  EpochMetrics& em = result.metrics;
  em.epoch = server.epoch;
  if (opts.observed != nullptr) {
    std::vector<FactorizationResult> factors;
    factors.reserve(sites.size());
    for (const auto& s : sites) factors.push_back(s.factors());
    em.rmse = rmse(*opts.observed, factors);
  }
  em.comm_bytes = opts.bytes_before + round_bytes;
  em.comm_seconds = static_cast<double>(em.comm_bytes) / opts.transfer_rate;
  em.rho_total = accountant.rho_total();
  em.eps_exact = zcdp_to_dp(em.rho_total, priv.delta);
  em.eps_approx = zcdp_to_dp_approx(em.rho_total, priv.delta);
  return result;
}

struct FederationConfig {
  SolverParams solver;
  PrivacyParams privacy;
  std::size_t rank = 50;
  std::uint64_t seed = 0;
  double transfer_rate = kDefaultTransferRate;
  bool concurrent = false;
};

struct RunOutcome {
  double initial_rmse = 0.0;
  std::vector<EpochMetrics> epochs;
  bool converged = false;
};

// Owns the sites, the server and the accountant for one experiment.
class Federation {
 public:
  Federation(std::vector<SparseTensorCOO> shards, FederationConfig config)
      : config_(std::move(config)), accountant_(shards.empty() ? 1 : shards.size()) {
    if (shards.empty()) throw DomainError("Federation: need at least one site");
    config_.solver.validate();
    config_.privacy.validate();
    if (config_.rank == 0) throw DomainError("Federation: rank must be >= 1");
    if (!(config_.transfer_rate > 0.0)) throw DomainError("Federation: transfer rate must be > 0");
    if (config_.privacy.noise_enabled() && !std::isfinite(config_.solver.clip)) {
      throw DomainError("Federation: noise requires a finite gradient clip bound");
    }
    observed_ = concatenate_rows(shards);
    const Dims d = observed_.dims();
    for (std::size_t t = 0; t < shards.size(); ++t) {
      sites_.push_back(SiteState::Initialize(t, std::move(shards[t]), config_.rank,
                                             config_.seed));
    }
    server_ = ServerState::Initialize(d.j, d.k, config_.rank, config_.seed);

    const double pull = config_.solver.eta * config_.solver.gamma *
                        static_cast<double>(sites_.size());
    if (pull >= 1.0) {
      warnings_.push_back("eta * gamma * T = " + std::to_string(pull) +
                          " >= 1; server update may overshoot");
    }
    for (const auto& s : sites_) {
      if (!step_within_lipschitz_bound(s, config_.solver)) {
        warnings_.push_back("site " + std::to_string(s.site_id) +
                            ": eta exceeds 2 / beta at initialization");
      }
    }
  }

  double current_rmse() const {
    std::vector<FactorizationResult> factors;
    for (const auto& s : sites_) factors.push_back(s.factors());
    return rmse(observed_, factors);
  }

  RoundResult step() {
    RoundOptions opts;
    opts.observed = &observed_;
    opts.transfer_rate = config_.transfer_rate;
    opts.bytes_before = bytes_;
    opts.concurrent = config_.concurrent;
    RoundResult r = run_round(sites_, server_, config_.solver, config_.privacy,
                              accountant_, opts);
    bytes_ = r.metrics.comm_bytes;
    return r;
  }

  // Runs until convergence (relative change < tol) or max_epochs. With
  // stop_on_convergence false, exactly max_epochs rounds are run.
  RunOutcome run(int max_epochs, double tol, bool stop_on_convergence = true) {
    RunOutcome out;
    out.initial_rmse = observed_.nnz() == 0 ? 0.0 : current_rmse();
    for (int e = 0; e < max_epochs; ++e) {
      auto before = snapshot_features(sites_);
      out.epochs.push_back(step().metrics);
      out.converged = has_converged(before, snapshot_features(sites_), tol);
      if (out.converged && stop_on_convergence) break;
    }
    return out;
  }

  // Patient factors stacked in site order with the server's globals.
  FactorizationResult global_factors() const {
    std::vector<FactorMatrix> blocks;
    for (const auto& s : sites_) blocks.push_back(s.A);
    return FactorizationResult::FromFactors(vstack(blocks), server_.B_hat,
                                            server_.C_hat);
  }

  const std::vector<SiteState>& sites() const { return sites_; }
  const ServerState& server() const { return server_; }
  const PrivacyAccountant& accountant() const { return accountant_; }
  const SparseTensorCOO& observed() const { return observed_; }
  const FederationConfig& config() const { return config_; }
  const std::vector<std::string>& warnings() const { return warnings_; }

 private:
  FederationConfig config_;
  SparseTensorCOO observed_;
  std::vector<SiteState> sites_;
  ServerState server_;
  PrivacyAccountant accountant_;
  std::uint64_t bytes_ = 0;
  std::vector<std::string> warnings_;
};

}  // namespace dpfact
