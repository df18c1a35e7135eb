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
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <numeric>
#include <random>
#include <sstream>
#include <string>
#include <string_view>
#include <tuple>
#include <unordered_set>
#include <vector>

#include "dpfact/cp.hpp"
#include "dpfact/errors.hpp"
#include "dpfact/factor_matrix.hpp"
#include "dpfact/partition.hpp"
#include "dpfact/rng.hpp"
#include "dpfact/sparse_tensor.hpp"

namespace dpfact {

// ---------------------------------------------------------------------------
// Synthetic data

struct SynthSpec {
  Dims dims{5000, 300, 800};
  std::size_t rank = 10;
  double sparsity = 1e-5;  // fraction of I*J*K cells that are non-zero
  std::size_t sites = 5;
  // suppress[t] lists ground-truth components absent from site t's patients.
  std::vector<std::vector<std::size_t>> suppress;
  std::uint64_t seed = 0;
  // Standard deviation of additive observation noise; 0 gives exact low-rank
  // values.
  double noise_std = 0.0;
};

struct SyntheticData {
  SparseTensorCOO global;
  std::vector<SparseTensorCOO> shards;
  std::vector<FactorizationResult> truth;  // one per site, shared B and C
};

inline std::uint64_t synthetic_target_nnz(const SynthSpec& spec) {
  const double cells = static_cast<double>(spec.dims.i) *
                       static_cast<double>(spec.dims.j) *
                       static_cast<double>(spec.dims.k);
  const double want = spec.sparsity * cells;
  // 1e-5 * 1.2e9 is 12000.000000000002 in binary; snap products that are an
  // integer up to rounding before taking the ceiling.
  const double nearest = std::round(want);
  if (std::abs(want - nearest) <= 1e-9 * std::max(1.0, want)) {
    return static_cast<std::uint64_t>(nearest);
  }
  return static_cast<std::uint64_t>(std::ceil(want));
}

inline SyntheticData generate_synthetic(const SynthSpec& spec) {
  const Dims d = spec.dims;
  if (d.i == 0 || d.j == 0 || d.k == 0) throw DomainError("generate_synthetic: dims must be positive");
  if (spec.rank == 0) throw DomainError("generate_synthetic: rank must be >= 1");
  if (!(spec.sparsity > 0.0 && spec.sparsity <= 1.0)) {
    throw DomainError("generate_synthetic: sparsity must lie in (0, 1]");
  }
  const double cells_d = static_cast<double>(d.i) * static_cast<double>(d.j) *
                         static_cast<double>(d.k);
  if (spec.sparsity * cells_d < 1.0) {
    throw DomainError("generate_synthetic: sparsity * I * J * K < 1");
  }
  if (cells_d >= 1.8e19) throw DomainError("generate_synthetic: tensor too large");
  if (!(spec.noise_std >= 0.0)) throw DomainError("generate_synthetic: noise_std must be >= 0");
  if (spec.suppress.size() > spec.sites) {
    throw DomainError("generate_synthetic: suppression list longer than site count");
  }
  const auto offsets = partition_offsets(d.i, spec.sites);

  Rng rng = make_stream(spec.seed, 0, Stream::kSynthetic);
  FactorMatrix a = random_uniform(d.i, spec.rank, rng);
  FactorMatrix b = random_uniform(d.j, spec.rank, rng);
  FactorMatrix c = random_uniform(d.k, spec.rank, rng);
  for (std::size_t t = 0; t < spec.suppress.size(); ++t) {
    for (std::size_t r : spec.suppress[t]) {
      if (r >= spec.rank) throw DomainError("generate_synthetic: suppressed column out of range");
      for (std::size_t i = offsets[t]; i < offsets[t + 1]; ++i) a(i, r) = 0.0;
    }
  }

  const std::uint64_t cells = static_cast<std::uint64_t>(d.i) * d.j * d.k;
  const std::uint64_t target = synthetic_target_nnz(spec);
  std::uniform_int_distribution<std::uint64_t> pick(0, cells - 1);
  std::normal_distribution<double> obs_noise(0.0, spec.noise_std > 0.0 ? spec.noise_std : 1.0);
  std::unordered_set<std::uint64_t> visited;
  std::vector<Entry> entries;
  entries.reserve(static_cast<std::size_t>(target));
  while (entries.size() < target) {
    if (visited.size() == cells) {
      throw DomainError("generate_synthetic: not enough non-zero cells for requested sparsity");
    }
    const std::uint64_t cell = pick(rng);
    if (!visited.insert(cell).second) continue;
    Entry e;
    e.i = static_cast<std::size_t>(cell / (static_cast<std::uint64_t>(d.j) * d.k));
    e.j = static_cast<std::size_t>((cell / d.k) % d.j);
    e.k = static_cast<std::size_t>(cell % d.k);
    e.value = reconstruct_entry(a, b, c, e.i, e.j, e.k);
    if (spec.noise_std > 0.0) e.value += obs_noise(rng);
    if (e.value == 0.0) continue;  // zero cells are implicit; draw another
    entries.push_back(e);
  }

  SyntheticData out;
  out.global = SparseTensorCOO(d, std::move(entries));
  out.shards = partition_rows(out.global, spec.sites);
  for (std::size_t t = 0; t < spec.sites; ++t) {
    FactorMatrix block(offsets[t + 1] - offsets[t], spec.rank);
    for (std::size_t i = offsets[t]; i < offsets[t + 1]; ++i) {
      const auto src = a.row(i);
      std::copy(src.begin(), src.end(), block.row(i - offsets[t]).begin());
    }
    out.truth.push_back(FactorizationResult::FromFactors(std::move(block), b, c));
  }
  return out;
}

// Applies a seeded permutation to the mode-1 indices. Used to build IID
// partitions before contiguous splitting.
inline SparseTensorCOO shuffle_patient_rows(const SparseTensorCOO& tensor,
                                            std::uint64_t seed) {
  std::vector<std::size_t> perm(tensor.dims().i);
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  Rng rng = make_stream(seed, 0, Stream::kSynthetic);
  std::shuffle(perm.begin(), perm.end(), rng);
  std::vector<Entry> entries(tensor.entries().begin(), tensor.entries().end());
  for (auto& e : entries) e.i = perm[e.i];
  return SparseTensorCOO(tensor.dims(), std::move(entries));
}

// ---------------------------------------------------------------------------
// Text formats

namespace detail {

inline std::string_view trim(std::string_view s) {
  const auto ws = " \t\r\n";
  const auto begin = s.find_first_not_of(ws);
  if (begin == std::string_view::npos) return {};
  const auto end = s.find_last_not_of(ws);
  return s.substr(begin, end - begin + 1);
}

inline std::vector<std::string_view> split_ws(std::string_view s) {
  std::vector<std::string_view> out;
  std::size_t pos = 0;
  while (pos < s.size()) {
    while (pos < s.size() && (s[pos] == ' ' || s[pos] == '\t')) ++pos;
    if (pos >= s.size()) break;
    std::size_t end = pos;
    while (end < s.size() && s[end] != ' ' && s[end] != '\t') ++end;
    out.push_back(s.substr(pos, end - pos));
    pos = end;
  }
  return out;
}

template <typename T>
bool parse_number(std::string_view s, T& out) {
  if constexpr (std::is_floating_point_v<T>) {
    if (s == "inf" || s == "+inf" || s == "infinity") {
      out = std::numeric_limits<T>::infinity();
      return true;
    }
  }
  const char* first = s.data();
  const char* last = s.data() + s.size();
  if (first != last && *first == '+') ++first;
  auto [ptr, ec] = std::from_chars(first, last, out);
  return ec == std::errc() && ptr == last;
}

inline std::string format_double(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

inline std::ofstream open_for_write(const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw Error("cannot open for writing: " + path.string());
  return out;
}

}  // namespace detail

// COO text: "# dims I J K" followed by "i j k value" lines (0-based).
inline void write_coo(const SparseTensorCOO& tensor, const std::filesystem::path& path) {
  auto out = detail::open_for_write(path);
  const Dims d = tensor.dims();
  out << "# dims " << d.i << ' ' << d.j << ' ' << d.k << '\n';
  for (const auto& e : tensor.entries()) {
    out << e.i << ' ' << e.j << ' ' << e.k << ' ' << detail::format_double(e.value) << '\n';
  }
  if (!out) throw Error("write failed: " + path.string());
}

inline SparseTensorCOO parse_coo(std::istream& in, const std::string& source) {
  std::string line;
  std::size_t lineno = 0;
  bool have_dims = false;
  Dims dims;
  std::vector<Entry> entries;
  std::map<std::tuple<std::size_t, std::size_t, std::size_t>, std::size_t> seen;
  while (std::getline(in, line)) {
    ++lineno;
    const auto text = detail::trim(line);
    if (text.empty()) continue;
    if (text.front() == '#') {
      const auto tok = detail::split_ws(text.substr(1));
      if (!tok.empty() && tok[0] == "dims") {
        if (have_dims) throw ParseError(source, lineno, "repeated dims header");
        if (tok.size() != 4 || !detail::parse_number(tok[1], dims.i) ||
            !detail::parse_number(tok[2], dims.j) ||
            !detail::parse_number(tok[3], dims.k) || dims.i == 0 || dims.j == 0 ||
            dims.k == 0) {
          throw ParseError(source, lineno, "malformed dims header");
        }
        have_dims = true;
      }
      continue;
    }
    if (!have_dims) throw ParseError(source, lineno, "entry before '# dims I J K' header");
    const auto tok = detail::split_ws(text);
    Entry e;
    if (tok.size() != 4 || !detail::parse_number(tok[0], e.i) ||
        !detail::parse_number(tok[1], e.j) || !detail::parse_number(tok[2], e.k) ||
        !detail::parse_number(tok[3], e.value)) {
      throw ParseError(source, lineno, "expected 'i j k value'");
    }
    if (e.i >= dims.i || e.j >= dims.j || e.k >= dims.k) {
      throw ParseError(source, lineno, "index out of range");
    }
    if (!std::isfinite(e.value)) throw ParseError(source, lineno, "non-finite value");
    if (e.value == 0.0) throw ParseError(source, lineno, "explicit zero value");
    auto [it, inserted] = seen.emplace(std::make_tuple(e.i, e.j, e.k), lineno);
    if (!inserted) {
      throw ValidationError(source + ":" + std::to_string(lineno) +
                            ": duplicate coordinate (first seen on line " +
                            std::to_string(it->second) + ")");
    }
    entries.push_back(e);
  }
  if (!have_dims) throw ParseError(source, lineno, "missing '# dims I J K' header");
  return SparseTensorCOO(dims, std::move(entries));
}

inline SparseTensorCOO read_coo(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open: " + path.string());
  return parse_coo(in, path.string());
}

// Factor matrix text: "# <rows> <R>" then one row of R values per line.
inline void write_factor_matrix(const FactorMatrix& m, const std::filesystem::path& path) {
  auto out = detail::open_for_write(path);
  out << "# " << m.rows() << ' ' << m.rank() << '\n';
  for (std::size_t i = 0; i < m.rows(); ++i) {
    const auto row = m.row(i);
    for (std::size_t r = 0; r < row.size(); ++r) {
      if (r) out << ' ';
      out << detail::format_double(row[r]);
    }
    out << '\n';
  }
  if (!out) throw Error("write failed: " + path.string());
}

inline FactorMatrix read_factor_matrix(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open: " + path.string());
  const std::string source = path.string();
  std::string line;
  std::size_t lineno = 0;
  bool have_header = false;
  FactorMatrix m;
  std::size_t next_row = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto text = detail::trim(line);
    if (text.empty()) continue;
    if (text.front() == '#') {
      if (have_header) continue;
      const auto tok = detail::split_ws(text.substr(1));
      std::size_t rows = 0;
      std::size_t rank = 0;
      if (tok.size() != 2 || !detail::parse_number(tok[0], rows) ||
          !detail::parse_number(tok[1], rank) || rank == 0) {
        throw ParseError(source, lineno, "expected '# <rows> <R>' header");
      }
      m = FactorMatrix(rows, rank);
      have_header = true;
      continue;
    }
    if (!have_header) throw ParseError(source, lineno, "row before '# <rows> <R>' header");
    if (next_row >= m.rows()) throw ParseError(source, lineno, "more rows than declared");
    const auto tok = detail::split_ws(text);
    if (tok.size() != m.rank()) {
      throw ParseError(source, lineno, "expected " + std::to_string(m.rank()) + " values");
    }
    auto row = m.row(next_row);
    for (std::size_t r = 0; r < tok.size(); ++r) {
      if (!detail::parse_number(tok[r], row[r]) || !std::isfinite(row[r])) {
        throw ParseError(source, lineno, "malformed value '" + std::string(tok[r]) + "'");
      }
    }
    ++next_row;
  }
  if (!have_header) throw ParseError(source, lineno, "missing '# <rows> <R>' header");
  if (next_row != m.rows()) {
    throw ParseError(source, lineno, "expected " + std::to_string(m.rows()) + " rows, got " +
                                         std::to_string(next_row));
  }
  return m;
}

// A factor set is a directory holding A.txt, B.txt and C.txt.
inline void write_factors(const FactorizationResult& f, const std::filesystem::path& dir) {
  write_factor_matrix(f.A, dir / "A.txt");
  write_factor_matrix(f.B, dir / "B.txt");
  write_factor_matrix(f.C, dir / "C.txt");
}

inline FactorizationResult read_factors(const std::filesystem::path& dir) {
  auto a = read_factor_matrix(dir / "A.txt");
  auto b = read_factor_matrix(dir / "B.txt");
  auto c = read_factor_matrix(dir / "C.txt");
  if (a.rank() != b.rank() || a.rank() != c.rank()) {
    throw DimensionError("factor set " + dir.string() + ": ranks differ across modes");
  }
  return FactorizationResult::FromFactors(std::move(a), std::move(b), std::move(c));
}

}  // namespace dpfact
