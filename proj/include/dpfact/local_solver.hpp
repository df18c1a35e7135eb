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
#include <cstdint>
#include <limits>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "dpfact/cp.hpp"
#include "dpfact/errors.hpp"
#include "dpfact/factor_matrix.hpp"
#include "dpfact/rng.hpp"
#include "dpfact/sparse_tensor.hpp"

namespace dpfact {

// Which threshold the group soft-thresholding step uses. kEtaMu is the
// closed form of prox_{eta * mu * ||.||_{2,1}}; kMu applies mu unscaled.
enum class ProxThreshold { kEtaMu, kMu };

struct SolverParams {
  double eta = 1e-2;
  double gamma = 5.0;
  double mu = 0.5;
  int tau = 1;
  // Per-entry gradient clip bound G; also the Lipschitz bound L fed into the
  // sensitivity. Infinity disables clipping.
  double clip = 1.0;
  ProxThreshold prox = ProxThreshold::kEtaMu;

  double prox_threshold() const {
    return prox == ProxThreshold::kEtaMu ? eta * mu : mu;
  }

  void validate() const {
    if (!(eta > 0.0) || !std::isfinite(eta)) throw DomainError("eta must be > 0");
    if (!(gamma >= 0.0) || !std::isfinite(gamma)) throw DomainError("gamma must be >= 0");
    if (!(mu >= 0.0) || !std::isfinite(mu)) throw DomainError("mu must be >= 0");
    if (tau < 1) throw DomainError("tau must be >= 1");
    if (!(clip > 0.0)) throw DomainError("clip must be > 0");
  }
};

// One site's local shard and factors. A never leaves the site.
struct SiteState {
  std::size_t site_id = 0;
  SparseTensorCOO tensor;
  FactorMatrix A;
  FactorMatrix B;
  FactorMatrix C;
  std::uint64_t rng_seed = 0;
  Rng shuffle_rng;
  Rng noise_rng;

  // Draws A, B, C uniform on [0, 1) (in that order) from the site's init
  // stream and seeds the shuffle and noise streams.
  static SiteState Initialize(std::size_t site_id, SparseTensorCOO tensor,
                              std::size_t rank, std::uint64_t seed) {
    if (rank == 0) throw DomainError("SiteState: rank must be >= 1");
    SiteState s;
    s.site_id = site_id;
    s.rng_seed = seed;
    const Dims d = tensor.dims();
    s.tensor = std::move(tensor);
    Rng init = make_stream(seed, site_id, Stream::kInit);
    s.A = random_uniform(d.i, rank, init);
    s.B = random_uniform(d.j, rank, init);
    s.C = random_uniform(d.k, rank, init);
    s.shuffle_rng = make_stream(seed, site_id, Stream::kShuffle);
    s.noise_rng = make_stream(seed, site_id, Stream::kNoise);
    return s;
  }

  std::size_t rank() const { return A.rank(); }

  FactorizationResult factors() const {
    return FactorizationResult::FromFactors(A, B, C);
  }
};

namespace detail {

// Rescales g in place so that ||g||_2 <= bound.
inline void clip_to_norm(std::span<double> g, double bound) {
  if (!std::isfinite(bound)) return;
  double sq = 0.0;
  for (double v : g) sq += v * v;
  const double norm = std::sqrt(sq);
  if (norm > bound) {
    const double scale = bound / norm;
    for (double& v : g) v *= scale;
  }
}

inline void require_finite(std::span<const double> row, char name,
                           std::size_t index) {
  for (double v : row) {
    if (!std::isfinite(v)) {
      throw NumericError(std::string("non-finite value in row ") + name + "[" +
                         std::to_string(index) + "]");
    }
  }
}

struct EntryScratch {
  std::vector<double> ga, gb, gc;
  explicit EntryScratch(std::size_t rank) : ga(rank), gb(rank), gc(rank) {}
};

inline void sgd_update_rows(std::span<double> a, std::span<double> b,
                            std::span<double> c, double value,
                            std::span<const double> b_hat,
                            std::span<const double> c_hat,
                            const SolverParams& p, EntryScratch& s) {
  const std::size_t rank = a.size();
  double fit = 0.0;
  for (std::size_t r = 0; r < rank; ++r) fit += a[r] * b[r] * c[r];
  const double residual = fit - value;
  for (std::size_t r = 0; r < rank; ++r) {
    s.ga[r] = residual * (b[r] * c[r]);
    s.gb[r] = residual * (a[r] * c[r]);
    s.gc[r] = residual * (a[r] * b[r]);
  }
  clip_to_norm(s.ga, p.clip);
  clip_to_norm(s.gb, p.clip);
  clip_to_norm(s.gc, p.clip);
  for (std::size_t r = 0; r < rank; ++r) {
    const double db = s.gb[r] + p.gamma * (b[r] - b_hat[r]);
    const double dc = s.gc[r] + p.gamma * (c[r] - c_hat[r]);
    a[r] -= p.eta * s.ga[r];
    b[r] -= p.eta * db;
    c[r] -= p.eta * dc;
  }
}

}  // namespace detail

// One stochastic step on the rows touched by `e` (local coordinates). All
// three gradients are taken at the pre-update rows.
inline void sgd_entry_update(SiteState& state, const Entry& e,
                             std::span<const double> b_hat_row,
                             std::span<const double> c_hat_row,
                             const SolverParams& params) {
  const std::size_t rank = state.rank();
  if (e.i >= state.A.rows() || e.j >= state.B.rows() || e.k >= state.C.rows()) {
    throw IndexError("sgd_entry_update: entry index out of range");
  }
  if (b_hat_row.size() != rank || c_hat_row.size() != rank) {
    throw DimensionError("sgd_entry_update: global rows have wrong rank");
  }
  detail::EntryScratch scratch(rank);
  detail::sgd_update_rows(state.A.row(e.i), state.B.row(e.j), state.C.row(e.k),
                          e.value, b_hat_row, c_hat_row, params, scratch);
  detail::require_finite(state.A.row(e.i), 'a', e.i);
  detail::require_finite(state.B.row(e.j), 'b', e.j);
  detail::require_finite(state.C.row(e.k), 'c', e.k);
}

// Group soft-thresholding over the columns of A. Columns with norm at or
// below the threshold become exactly zero.
inline void prox_l21_inplace(FactorMatrix& a, double threshold) {
  if (!std::isfinite(threshold) || threshold < 0.0) {
    throw DomainError("prox_l21: threshold must be finite and >= 0");
  }
  if (threshold == 0.0) return;
  for (std::size_t r = 0; r < a.rank(); ++r) {
    const double norm = a.column_norm(r);
    const double scale = norm <= threshold ? 0.0 : 1.0 - threshold / norm;
    for (std::size_t i = 0; i < a.rows(); ++i) {
      a(i, r) = scale == 0.0 ? 0.0 : a(i, r) * scale;
    }
  }
}

inline FactorMatrix prox_l21(FactorMatrix a, double threshold) {
  prox_l21_inplace(a, threshold);
  return a;
}

// tau passes of permutation SGD over the shard, each followed by one prox
// step on A. Adds no noise. An empty shard leaves every factor untouched.
inline void run_local_epoch(SiteState& state, const FactorMatrix& b_hat,
                            const FactorMatrix& c_hat,
                            const SolverParams& params) {
  if (b_hat.rows() != state.B.rows() || b_hat.rank() != state.rank() ||
      c_hat.rows() != state.C.rows() || c_hat.rank() != state.rank()) {
    throw DimensionError("run_local_epoch: global factors do not match site");
  }
  const auto entries = state.tensor.entries();
  if (entries.empty()) return;
  std::vector<std::size_t> order(entries.size());
  detail::EntryScratch scratch(state.rank());
  for (int pass = 0; pass < params.tau; ++pass) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::shuffle(order.begin(), order.end(), state.shuffle_rng);
    for (std::size_t n : order) {
      const Entry& e = entries[n];
      detail::sgd_update_rows(state.A.row(e.i), state.B.row(e.j),
                              state.C.row(e.k), e.value, b_hat.row(e.j),
                              c_hat.row(e.k), params, scratch);
      detail::require_finite(state.A.row(e.i), 'a', e.i);
      detail::require_finite(state.B.row(e.j), 'b', e.j);
      detail::require_finite(state.C.row(e.k), 'c', e.k);
    }
    prox_l21_inplace(state.A, params.prox_threshold());
  }
}

// 1/2 sum of squared residuals over observed entries, plus the elastic
// penalties and mu * ||A^T||_{2,1}.
inline double local_objective(const SiteState& state, const FactorMatrix& b_hat,
                              const FactorMatrix& c_hat,
                              const SolverParams& params) {
  double sse = 0.0;
  for (const auto& e : state.tensor.entries()) {
    const double r =
        reconstruct_entry(state.A, state.B, state.C, e.i, e.j, e.k) - e.value;
    sse += r * r;
  }
  const double db = frobenius_distance(state.B, b_hat);
  const double dc = frobenius_distance(state.C, c_hat);
  return 0.5 * sse + 0.5 * params.gamma * db * db +
         0.5 * params.gamma * dc * dc + params.mu * l21_norm(state.A.transposed());
}

// ||(A^T A) * (C^T C) + gamma I||_F, the Lipschitz constant of the gradient of
// the B-subproblem. Pass (A, B) for the C-subproblem.
inline double beta_lipschitz(const FactorMatrix& a, const FactorMatrix& c,
                             double gamma) {
  if (a.rank() != c.rank()) throw DimensionError("beta_lipschitz: rank mismatch");
  const std::size_t rank = a.rank();
  auto gram = [rank](const FactorMatrix& m) {
    std::vector<double> g(rank * rank, 0.0);
    for (std::size_t i = 0; i < m.rows(); ++i)
      for (std::size_t p = 0; p < rank; ++p)
        for (std::size_t q = 0; q < rank; ++q) g[p * rank + q] += m(i, p) * m(i, q);
    return g;
  };
  const auto ga = gram(a);
  const auto gc = gram(c);
  double sum = 0.0;
  for (std::size_t p = 0; p < rank; ++p) {
    for (std::size_t q = 0; q < rank; ++q) {
      double v = ga[p * rank + q] * gc[p * rank + q];
      if (p == q) v += gamma;
      sum += v * v;
    }
  }
  return std::sqrt(sum);
}

// True when eta <= 2 / beta holds for both feature subproblems of the site.
inline bool step_within_lipschitz_bound(const SiteState& state,
                                        const SolverParams& params) {
  const double beta = std::max(beta_lipschitz(state.A, state.C, params.gamma),
                               beta_lipschitz(state.A, state.B, params.gamma));
  return beta == 0.0 || params.eta <= 2.0 / beta;
}

}  // namespace dpfact
