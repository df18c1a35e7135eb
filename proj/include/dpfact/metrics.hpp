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
#include <span>
#include <vector>

#include "dpfact/cp.hpp"
#include "dpfact/errors.hpp"
#include "dpfact/sparse_tensor.hpp"

namespace dpfact {

// Root mean square error over the observed non-zeros of `observed`. Sites own
// contiguous blocks of mode-1 rows in order, so entry i is reconstructed from
// the site whose A block covers row i.
inline double rmse(const SparseTensorCOO& observed,
                   std::span<const FactorizationResult> sites) {
  if (observed.nnz() == 0) throw DomainError("rmse: no observed entries");
  if (sites.empty()) throw DimensionError("rmse: no sites");
  std::vector<std::size_t> row_end;
  std::size_t rows = 0;
  for (const auto& s : sites) {
    if (s.B.rows() != observed.dims().j || s.C.rows() != observed.dims().k) {
      throw DimensionError("rmse: feature dims do not match observed tensor");
    }
    rows += s.A.rows();
    row_end.push_back(rows);
  }
  if (rows != observed.dims().i) {
    throw DimensionError("rmse: patient rows do not add up to mode-1 size");
  }
  double sse = 0.0;
  for (const auto& e : observed.entries()) {
    const auto site = static_cast<std::size_t>(
        std::upper_bound(row_end.begin(), row_end.end(), e.i) - row_end.begin());
    const std::size_t base = site == 0 ? 0 : row_end[site - 1];
    const auto& f = sites[site];
    const double r = e.value - reconstruct_entry(f.A, f.B, f.C, e.i - base, e.j, e.k);
    sse += r * r;
  }
  return std::sqrt(sse / static_cast<double>(observed.nnz()));
}

inline double rmse(const SparseTensorCOO& observed,
                   const FactorizationResult& factors) {
  return rmse(observed, std::span<const FactorizationResult>(&factors, 1));
}

struct FmsColumn {
  std::size_t x_column = 0;
  std::size_t y_column = 0;
  double cosine_product = 0.0;  // product over the three modes
  double weight_ratio = 0.0;    // xi_y / xi_x, 0 when xi_x is 0
  double score = 0.0;           // (1 - penalty) * cosine_product
};

struct FmsReport {
  double score = 0.0;
  std::vector<FmsColumn> columns;  // ordered by x column
};

namespace detail {

inline double column_cosine(const FactorMatrix& x, std::size_t p,
                            const FactorMatrix& y, std::size_t q) {
  const double nx = x.column_norm(p);
  const double ny = y.column_norm(q);
  if (nx == 0.0 || ny == 0.0) return 0.0;
  double dot = 0.0;
  for (std::size_t i = 0; i < x.rows(); ++i) dot += x(i, p) * y(i, q);
  return dot / (nx * ny);
}

}  // namespace detail

// Factor match score with greedy column matching. Pairs are taken in order of
// descending cosine product; each column of either side is used once. Ties
// break on the lower (x, y) index pair.
inline FmsReport fms_report(const FactorizationResult& x,
                            const FactorizationResult& y) {
  const std::size_t rank = x.rank();
  if (y.rank() != rank || x.B.rank() != rank || x.C.rank() != rank ||
      y.B.rank() != rank || y.C.rank() != rank) {
    throw DimensionError("fms: rank mismatch");
  }
  if (x.A.rows() != y.A.rows() || x.B.rows() != y.B.rows() ||
      x.C.rows() != y.C.rows()) {
    throw DimensionError("fms: mode dimensions differ");
  }
  FmsReport report;
  if (rank == 0) return report;

  std::vector<double> cos(rank * rank);
  for (std::size_t p = 0; p < rank; ++p)
    for (std::size_t q = 0; q < rank; ++q)
      cos[p * rank + q] = detail::column_cosine(x.A, p, y.A, q) *
                          detail::column_cosine(x.B, p, y.B, q) *
                          detail::column_cosine(x.C, p, y.C, q);

  const auto xi_x = factor_weights(x.A, x.B, x.C);
  const auto xi_y = factor_weights(y.A, y.B, y.C);

  std::vector<bool> used_x(rank, false);
  std::vector<bool> used_y(rank, false);
  report.columns.resize(rank);
  for (std::size_t step = 0; step < rank; ++step) {
    double best = -std::numeric_limits<double>::infinity();
    std::size_t bp = 0;
    std::size_t bq = 0;
    for (std::size_t p = 0; p < rank; ++p) {
      if (used_x[p]) continue;
      for (std::size_t q = 0; q < rank; ++q) {
        if (used_y[q]) continue;
        if (cos[p * rank + q] > best) {
          best = cos[p * rank + q];
          bp = p;
          bq = q;
        }
      }
    }
    used_x[bp] = used_y[bq] = true;
    const double hi = std::max(xi_x[bp], xi_y[bq]);
    const double penalty = hi == 0.0 ? 0.0 : std::abs(xi_x[bp] - xi_y[bq]) / hi;
    FmsColumn col;
    col.x_column = bp;
    col.y_column = bq;
    col.cosine_product = best;
    col.weight_ratio = xi_x[bp] == 0.0 ? 0.0 : xi_y[bq] / xi_x[bp];
    col.score = (1.0 - penalty) * best;
    report.columns[bp] = col;
  }
  double total = 0.0;
  for (const auto& c : report.columns) total += c.score;
  report.score = total / static_cast<double>(rank);
  return report;
}

inline double fms(const FactorizationResult& x, const FactorizationResult& y) {
  return fms_report(x, y).score;
}

}  // namespace dpfact
