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

#include <cstdint>
#include <random>

#include "dpfact/factor_matrix.hpp"

namespace dpfact {

using Rng = std::mt19937_64;

// Independent random streams derived from one experiment seed. Each site owns
// one stream per purpose so shuffling never perturbs the noise sequence.
enum class Stream : std::uint32_t {
  kInit = 0,
  kShuffle = 1,
  kNoise = 2,
  kServerInit = 3,
  kSynthetic = 4,
};

inline Rng make_stream(std::uint64_t seed, std::uint64_t site, Stream purpose) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed),
                    static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(site),
                    static_cast<std::uint32_t>(site >> 32),
                    static_cast<std::uint32_t>(purpose)};
  return Rng(seq);
}

// Entries i.i.d. uniform on [0, 1), filled row-major.
inline FactorMatrix random_uniform(std::size_t rows, std::size_t rank, Rng& rng) {
  FactorMatrix m(rows, rank);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  for (double& v : m.values()) v = unif(rng);
  return m;
}

}  // namespace dpfact
