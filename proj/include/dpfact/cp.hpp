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
#include <cstddef>
#include <string>
#include <vector>

#include "dpfact/errors.hpp"
#include "dpfact/factor_matrix.hpp"

namespace dpfact {

// Columnwise Kronecker product. Row (i * J + j) of the result holds
// A(i, r) * B(j, r).
inline FactorMatrix khatri_rao(const FactorMatrix& a, const FactorMatrix& b) {
  if (a.rank() != b.rank()) {
    throw DimensionError("khatri_rao: column counts differ (" +
                         std::to_string(a.rank()) + " vs " +
                         std::to_string(b.rank()) + ")");
  }
  FactorMatrix out(a.rows() * b.rows(), a.rank());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < b.rows(); ++j)
      for (std::size_t r = 0; r < a.rank(); ++r)
        out(i * b.rows() + j, r) = a(i, r) * b(j, r);
  return out;
}

// sum_r A(i,r) B(j,r) C(k,r).
inline double reconstruct_entry(const FactorMatrix& a, const FactorMatrix& b,
                                const FactorMatrix& c, std::size_t i,
                                std::size_t j, std::size_t k) {
  if (i >= a.rows() || j >= b.rows() || k >= c.rows()) {
    throw IndexError("reconstruct_entry: index out of range");
  }
  if (a.rank() != b.rank() || a.rank() != c.rank()) {
    throw DimensionError("reconstruct_entry: rank mismatch");
  }
  const auto ar = a.row(i);
  const auto br = b.row(j);
  const auto cr = c.row(k);
  double sum = 0.0;
  for (std::size_t r = 0; r < ar.size(); ++r) sum += ar[r] * br[r] * cr[r];
  return sum;
}

// Sum of row 2-norms.
inline double l21_norm(const FactorMatrix& w) {
  double total = 0.0;
  for (std::size_t i = 0; i < w.rows(); ++i) {
    double sq = 0.0;
    for (double v : w.row(i)) sq += v * v;
    total += std::sqrt(sq);
  }
  return total;
}

// lambda_r = ||A_{:r}|| ||B_{:r}|| ||C_{:r}||, taken from the raw columns.
inline std::vector<double> factor_weights(const FactorMatrix& a,
                                          const FactorMatrix& b,
                                          const FactorMatrix& c) {
  if (a.rank() != b.rank() || a.rank() != c.rank()) {
    throw DimensionError("factor_weights: rank mismatch");
  }
  std::vector<double> lambda(a.rank());
  for (std::size_t r = 0; r < a.rank(); ++r) {
    lambda[r] = a.column_norm(r) * b.column_norm(r) * c.column_norm(r);
  }
  return lambda;
}

struct FactorizationResult {
  FactorMatrix A;
  FactorMatrix B;
  FactorMatrix C;
  std::vector<double> lambda;

  static FactorizationResult FromFactors(FactorMatrix a, FactorMatrix b,
                                         FactorMatrix c) {
    auto lambda = factor_weights(a, b, c);
    return {std::move(a), std::move(b), std::move(c), std::move(lambda)};
  }

  std::size_t rank() const { return A.rank(); }
};

}  // namespace dpfact
