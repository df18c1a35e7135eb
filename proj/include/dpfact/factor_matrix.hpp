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
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

#include "dpfact/errors.hpp"

namespace dpfact {

// Dense rows x rank matrix stored row-major, so a_{i:} is contiguous.
class FactorMatrix {
 public:
  FactorMatrix() = default;
  FactorMatrix(std::size_t rows, std::size_t rank, double fill = 0.0)
      : rows_(rows), rank_(rank), data_(rows * rank, fill) {}

  // Builds from nested row lists; every row must have the same length.
  static FactorMatrix FromRows(
      std::initializer_list<std::initializer_list<double>> rows) {
    const std::size_t rank = rows.size() == 0 ? 0 : rows.begin()->size();
    FactorMatrix m(rows.size(), rank);
    std::size_t i = 0;
    for (const auto& row : rows) {
      if (row.size() != rank) {
        throw DimensionError("FactorMatrix::FromRows: ragged rows");
      }
      std::copy(row.begin(), row.end(), m.row(i++).begin());
    }
    return m;
  }

  std::size_t rows() const { return rows_; }
  std::size_t rank() const { return rank_; }
  bool empty() const { return data_.empty(); }

  double& operator()(std::size_t i, std::size_t r) {
    return data_[i * rank_ + r];
  }
  double operator()(std::size_t i, std::size_t r) const {
    return data_[i * rank_ + r];
  }

  std::span<double> row(std::size_t i) {
    return {data_.data() + i * rank_, rank_};
  }
  std::span<const double> row(std::size_t i) const {
    return {data_.data() + i * rank_, rank_};
  }

  std::span<double> values() { return data_; }
  std::span<const double> values() const { return data_; }

  double column_norm(std::size_t r) const {
    double sum = 0.0;
    for (std::size_t i = 0; i < rows_; ++i) {
      const double v = (*this)(i, r);
      sum += v * v;
    }
    return std::sqrt(sum);
  }

  double frobenius_norm() const {
    double sum = 0.0;
    for (double v : data_) sum += v * v;
    return std::sqrt(sum);
  }

  bool all_finite() const {
    return std::all_of(data_.begin(), data_.end(),
                       [](double v) { return std::isfinite(v); });
  }

  // Number of columns whose entries are all exactly zero.
  std::size_t zero_columns() const {
    std::size_t count = 0;
    for (std::size_t r = 0; r < rank_; ++r) {
      bool zero = true;
      for (std::size_t i = 0; i < rows_ && zero; ++i) zero = (*this)(i, r) == 0.0;
      count += zero ? 1 : 0;
    }
    return count;
  }

  FactorMatrix transposed() const {
    FactorMatrix t(rank_, rows_);
    for (std::size_t i = 0; i < rows_; ++i)
      for (std::size_t r = 0; r < rank_; ++r) t(r, i) = (*this)(i, r);
    return t;
  }

  friend bool operator==(const FactorMatrix&, const FactorMatrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t rank_ = 0;
  std::vector<double> data_;
};

// ||a - b||_F; shapes must match.
inline double frobenius_distance(const FactorMatrix& a, const FactorMatrix& b) {
  if (a.rows() != b.rows() || a.rank() != b.rank()) {
    throw DimensionError("frobenius_distance: shape mismatch");
  }
  double sum = 0.0;
  const auto av = a.values();
  const auto bv = b.values();
  for (std::size_t n = 0; n < av.size(); ++n) {
    const double d = av[n] - bv[n];
    sum += d * d;
  }
  return std::sqrt(sum);
}

// Stacks matrices with equal rank on top of each other.
inline FactorMatrix vstack(std::span<const FactorMatrix> blocks) {
  if (blocks.empty()) return {};
  const std::size_t rank = blocks.front().rank();
  std::size_t rows = 0;
  for (const auto& b : blocks) {
    if (b.rank() != rank) throw DimensionError("vstack: rank mismatch");
    rows += b.rows();
  }
  FactorMatrix out(rows, rank);
  std::size_t offset = 0;
  for (const auto& b : blocks) {
    std::copy(b.values().begin(), b.values().end(),
              out.values().begin() + static_cast<std::ptrdiff_t>(offset * rank));
    offset += b.rows();
  }
  return out;
}

}  // namespace dpfact
