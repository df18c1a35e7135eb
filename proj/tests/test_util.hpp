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

// Shared helpers for the unit tests.

#include <cstdint>
#include <random>
#include <vector>

#include "dpfact.hpp"

namespace dpfact::testing {

inline FactorMatrix RandomMatrix(std::size_t rows, std::size_t rank, std::mt19937_64& rng,
                                 double lo = -1.0, double hi = 1.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  FactorMatrix m(rows, rank);
  for (double& v : m.values()) v = u(rng);
  return m;
}

// Dense low-rank tensor with every cell stored (all values strictly positive).
inline SparseTensorCOO DenseLowRank(const FactorMatrix& a, const FactorMatrix& b,
                                    const FactorMatrix& c) {
  std::vector<Entry> entries;
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < b.rows(); ++j)
      for (std::size_t k = 0; k < c.rows(); ++k)
        entries.push_back({i, j, k, reconstruct_entry(a, b, c, i, j, k)});
  return SparseTensorCOO(Dims{a.rows(), b.rows(), c.rows()}, std::move(entries));
}

}  // namespace dpfact::testing
