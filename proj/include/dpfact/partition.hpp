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

#include <cstddef>
#include <span>
#include <vector>

#include "dpfact/errors.hpp"
#include "dpfact/sparse_tensor.hpp"

namespace dpfact {

// First mode-1 row owned by each of T sites, plus a final sentinel equal to I.
// Blocks have floor(I / T) rows; the last block takes the remainder.
inline std::vector<std::size_t> partition_offsets(std::size_t rows,
                                                  std::size_t sites) {
  if (sites == 0) throw DomainError("partition: T must be >= 1");
  if (sites > rows) throw DomainError("partition: more sites than patient rows");
  const std::size_t block = rows / sites;
  std::vector<std::size_t> offsets(sites + 1);
  for (std::size_t t = 0; t < sites; ++t) offsets[t] = t * block;
  offsets[sites] = rows;
  return offsets;
}

// Splits mode 1 into T contiguous blocks and re-bases row indices. Entries
// keep their relative order within each shard.
inline std::vector<SparseTensorCOO> partition_rows(const SparseTensorCOO& tensor,
                                                   std::size_t sites) {
  const Dims d = tensor.dims();
  const auto offsets = partition_offsets(d.i, sites);
  const std::size_t block = d.i / sites;
  std::vector<std::vector<Entry>> buckets(sites);
  for (const auto& e : tensor.entries()) {
    const std::size_t t = std::min(e.i / block, sites - 1);
    Entry local = e;
    local.i -= offsets[t];
    buckets[t].push_back(local);
  }
  std::vector<SparseTensorCOO> shards;
  shards.reserve(sites);
  for (std::size_t t = 0; t < sites; ++t) {
    shards.emplace_back(Dims{offsets[t + 1] - offsets[t], d.j, d.k},
                        std::move(buckets[t]));
  }
  return shards;
}

// Inverse of partition_rows: stacks shards along mode 1.
inline SparseTensorCOO concatenate_rows(std::span<const SparseTensorCOO> shards) {
  if (shards.empty()) throw DomainError("concatenate_rows: no shards");
  const Dims first = shards.front().dims();
  std::size_t rows = 0;
  std::vector<Entry> entries;
  for (const auto& s : shards) {
    if (s.dims().j != first.j || s.dims().k != first.k) {
      throw DimensionError("concatenate_rows: feature dims differ across shards");
    }
    for (Entry e : s.entries()) {
      e.i += rows;
      entries.push_back(e);
    }
    rows += s.dims().i;
  }
  return SparseTensorCOO(Dims{rows, first.j, first.k}, std::move(entries));
}

}  // namespace dpfact
