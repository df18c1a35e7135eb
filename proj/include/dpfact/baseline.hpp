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
#include <cstdint>
#include <numeric>
#include <vector>

#include "dpfact/cp.hpp"
#include "dpfact/metrics.hpp"
#include "dpfact/rng.hpp"
#include "dpfact/sparse_tensor.hpp"

namespace dpfact {

struct SgdBaselineParams {
  std::size_t rank = 50;
  double eta = 1e-2;
  int tau = 1;
  double clip = 1.0;
  std::uint64_t seed = 0;
  int epochs = 100;
};

struct SgdBaselineResult {
  double initial_rmse = 0.0;
  std::vector<double> rmse;  // one value per epoch
  FactorizationResult factors;
};

// Centralized CP-SGD: no sites, no server, no regularization, no noise. Uses
// the same seed conventions as site 0 so a one-site federated run can be
// compared against it.
inline SgdBaselineResult centralized_sgd(const SparseTensorCOO& tensor,
                                         const SgdBaselineParams& p) {
  const Dims d = tensor.dims();
  Rng init = make_stream(p.seed, 0, Stream::kInit);
  FactorMatrix a = random_uniform(d.i, p.rank, init);
  FactorMatrix b = random_uniform(d.j, p.rank, init);
  FactorMatrix c = random_uniform(d.k, p.rank, init);
  Rng shuffle = make_stream(p.seed, 0, Stream::kShuffle);

  SgdBaselineResult out;
  auto current_rmse = [&] {
    return rmse(tensor, FactorizationResult::FromFactors(a, b, c));
  };
  out.initial_rmse = current_rmse();

  const auto entries = tensor.entries();
  std::vector<std::size_t> order(entries.size());
  std::vector<double> ga(p.rank), gb(p.rank), gc(p.rank);
  auto clip = [&](std::vector<double>& g) {
    if (!std::isfinite(p.clip)) return;
    double sq = 0.0;
    for (double v : g) sq += v * v;
    const double norm = std::sqrt(sq);
    if (norm > p.clip) {
      for (double& v : g) v *= p.clip / norm;
    }
  };

  for (int epoch = 0; epoch < p.epochs; ++epoch) {
    for (int pass = 0; pass < p.tau; ++pass) {
      std::iota(order.begin(), order.end(), std::size_t{0});
      std::shuffle(order.begin(), order.end(), shuffle);
      for (std::size_t n : order) {
        const Entry& e = entries[n];
        auto ar = a.row(e.i);
        auto br = b.row(e.j);
        auto cr = c.row(e.k);
        double fit = 0.0;
        for (std::size_t r = 0; r < p.rank; ++r) fit += ar[r] * br[r] * cr[r];
        const double residual = fit - e.value;
        for (std::size_t r = 0; r < p.rank; ++r) {
          ga[r] = residual * (br[r] * cr[r]);
          gb[r] = residual * (ar[r] * cr[r]);
          gc[r] = residual * (ar[r] * br[r]);
        }
        clip(ga);
        clip(gb);
        clip(gc);
        for (std::size_t r = 0; r < p.rank; ++r) {
          ar[r] -= p.eta * ga[r];
          br[r] -= p.eta * gb[r];
          cr[r] -= p.eta * gc[r];
        }
      }
    }
    out.rmse.push_back(current_rmse());
  }
  out.factors = FactorizationResult::FromFactors(std::move(a), std::move(b),
                                                 std::move(c));
  return out;
}

}  // namespace dpfact
