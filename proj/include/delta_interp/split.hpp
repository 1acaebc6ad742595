#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <string>
#include <vector>

#include "delta_interp/dataset.hpp"
#include "delta_interp/rng.hpp"

namespace delta_interp {

struct SplitSpec {
  enum class Kind { holdout, kfold, sequential };

  Kind kind = Kind::holdout;
  /// holdout: share of rows held out as the test partition.
  /// sequential: share of leading rows kept as the training partition.
  double fraction = 0.3;
  int folds = 5;
  std::uint64_t seed = 0;

  static SplitSpec holdout(double test_fraction, std::uint64_t seed) {
    return {Kind::holdout, test_fraction, 0, seed};
  }
  static SplitSpec sequential(double train_fraction) { return {Kind::sequential, train_fraction, 0, 0}; }
  static SplitSpec kfold(int k, std::uint64_t seed) { return {Kind::kfold, 0.0, k, seed}; }
};

struct Partition {
  Dataset train;
  Dataset test;
};

struct IndexPartition {
  std::vector<std::size_t> train;
  std::vector<std::size_t> test;
};

namespace detail {

inline std::size_t floor_count(double fraction, std::size_t n) {
  // The epsilon absorbs representation error (0.3 * 10 must give 3).
  return static_cast<std::size_t>(std::floor(fraction * static_cast<double>(n) + 1e-9));
}

inline std::vector<std::size_t> shuffled_indices(std::size_t n, std::uint64_t seed) {
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  Rng rng(seed);
  rng.shuffle(std::span<std::size_t>(idx));
  return idx;
}

}  // namespace detail

/// Two-way partition for holdout and sequential specs. Indices inside each
/// partition are in ascending row order.
inline IndexPartition split_indices(std::size_t n, const SplitSpec& spec) {
  if (n == 0) throw InvalidArgument("split: empty dataset");
  if (n < 2) throw InvalidArgument("split: need at least 2 rows");
  if (spec.kind == SplitSpec::Kind::kfold) throw InvalidArgument("split_indices: use kfold_indices for kfold specs");
  if (!(spec.fraction > 0.0 && spec.fraction < 1.0))
    throw InvalidArgument("split: fraction must lie in (0, 1), got " + std::to_string(spec.fraction));

  const std::size_t first = detail::floor_count(spec.fraction, n);
  if (first == 0 || first == n)
    throw InvalidArgument("split: fraction " + std::to_string(spec.fraction) + " of " + std::to_string(n) +
                          " rows leaves an empty partition");
  IndexPartition out;
  if (spec.kind == SplitSpec::Kind::sequential) {
    out.train.resize(first);
    std::iota(out.train.begin(), out.train.end(), std::size_t{0});
    out.test.resize(n - first);
    std::iota(out.test.begin(), out.test.end(), first);
    return out;
  }
  auto idx = detail::shuffled_indices(n, spec.seed);
  out.test.assign(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(first));
  out.train.assign(idx.begin() + static_cast<std::ptrdiff_t>(first), idx.end());
  std::sort(out.train.begin(), out.train.end());
  std::sort(out.test.begin(), out.test.end());
  return out;
}

/// K disjoint folds covering [0, n); fold sizes differ by at most one.
/// Returned partitions use fold i as test and the remaining folds as train.
inline std::vector<IndexPartition> kfold_indices(std::size_t n, int k, std::uint64_t seed) {
  if (n == 0) throw InvalidArgument("kfold: empty dataset");
  if (k < 2) throw InvalidArgument("kfold: K must be >= 2");
  if (n < static_cast<std::size_t>(k))
    throw InvalidArgument("kfold: " + std::to_string(n) + " rows cannot fill " + std::to_string(k) + " folds");
  const auto idx = detail::shuffled_indices(n, seed);
  const auto kk = static_cast<std::size_t>(k);
  std::vector<std::size_t> fold_of(n);
  for (std::size_t pos = 0; pos < n; ++pos) fold_of[idx[pos]] = pos % kk;
  std::vector<IndexPartition> out(kk);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t f = 0; f < kk; ++f) (fold_of[i] == f ? out[f].test : out[f].train).push_back(i);
  return out;
}

inline Partition split(const Dataset& data, const SplitSpec& spec) {
  auto p = split_indices(data.size(), spec);
  return {data.subset(p.train), data.subset(p.test)};
}

inline std::vector<Partition> kfold(const Dataset& data, int k, std::uint64_t seed) {
  std::vector<Partition> out;
  for (const auto& p : kfold_indices(data.size(), k, seed)) out.push_back({data.subset(p.train), data.subset(p.test)});
  return out;
}

}  // namespace delta_interp
