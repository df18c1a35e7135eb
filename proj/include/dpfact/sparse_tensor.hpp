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
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <tuple>
#include <vector>

#include "dpfact/errors.hpp"

namespace dpfact {

struct Dims {
  std::size_t i = 0;
  std::size_t j = 0;
  std::size_t k = 0;

  friend bool operator==(const Dims&, const Dims&) = default;
};

struct Entry {
  std::size_t i = 0;
  std::size_t j = 0;
  std::size_t k = 0;
  double value = 0.0;

  friend bool operator==(const Entry&, const Entry&) = default;
};

// Observed 3-mode tensor in coordinate format. Entries keep their insertion
// order; every coordinate is in range, unique, and holds a non-zero value.
class SparseTensorCOO {
 public:
  SparseTensorCOO() = default;

  explicit SparseTensorCOO(Dims dims, std::vector<Entry> entries = {})
      : dims_(dims), entries_(std::move(entries)) {
    if (dims_.i == 0 || dims_.j == 0 || dims_.k == 0) {
      throw DomainError("SparseTensorCOO: dims must be positive");
    }
    for (std::size_t n = 0; n < entries_.size(); ++n) check_entry(entries_[n], n);
    check_unique();
  }

  const Dims& dims() const { return dims_; }
  std::span<const Entry> entries() const { return entries_; }
  std::size_t nnz() const { return entries_.size(); }

  friend bool operator==(const SparseTensorCOO&, const SparseTensorCOO&) = default;

 private:
  void check_entry(const Entry& e, std::size_t n) const {
    if (e.i >= dims_.i || e.j >= dims_.j || e.k >= dims_.k) {
      throw IndexError("SparseTensorCOO: entry " + std::to_string(n) +
                       " out of range");
    }
    if (e.value == 0.0) {
      throw ValidationError("SparseTensorCOO: entry " + std::to_string(n) +
                            " stores an explicit zero");
    }
    if (!std::isfinite(e.value)) {
      throw ValidationError("SparseTensorCOO: entry " + std::to_string(n) +
                            " is not finite");
    }
  }

  void check_unique() const {
    std::vector<std::array<std::size_t, 3>> keys;
    keys.reserve(entries_.size());
    for (const auto& e : entries_) keys.push_back({e.i, e.j, e.k});
    std::sort(keys.begin(), keys.end());
    auto dup = std::adjacent_find(keys.begin(), keys.end());
    if (dup != keys.end()) {
      throw ValidationError("SparseTensorCOO: duplicate coordinate (" +
                            std::to_string((*dup)[0]) + "," +
                            std::to_string((*dup)[1]) + "," +
                            std::to_string((*dup)[2]) + ")");
    }
  }

  Dims dims_;
  std::vector<Entry> entries_;
};

}  // namespace dpfact
