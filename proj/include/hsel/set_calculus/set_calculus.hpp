#pragma once

#include <algorithm>
#include <bit>
#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "hsel/common/error.hpp"

namespace hsel {

// Union cardinalities of n sets, indexed by nonempty bitmask (entry 0 unused).
struct SetFamily {
  int n = 0;
  std::vector<long long> union_card;

  long long at(std::uint32_t mask) const { return union_card.at(mask); }

  // Monotone and submodular; returns the first violation or an empty string.
  std::string check() const {
    if (n < 0 || n > 20) return "set count out of range";
    if (union_card.size() != (std::size_t{1} << n)) return "union table needs 2^n entries";
    const std::uint32_t full = (1u << n) - 1;
    if (union_card[0] != 0) return "empty union must have cardinality 0";
    for (std::uint32_t m = 0; m <= full; ++m) {
      if (union_card[m] < 0) return "negative union cardinality at mask " + std::to_string(m);
      for (int i = 0; i < n; ++i) {
        std::uint32_t b = 1u << i;
        if (m & b) continue;
        if (union_card[m | b] < union_card[m]) return "union cardinality not monotone at mask " + std::to_string(m);
        for (int k = i + 1; k < n; ++k) {
          std::uint32_t c = 1u << k;
          if (m & c) continue;
          // |U(m+b)| + |U(m+c)| >= |U(m+b+c)| + |U(m)|
          if (union_card[m | b] + union_card[m | c] < union_card[m | b | c] + union_card[m])
            return "union cardinality not submodular at mask " + std::to_string(m);
        }
      }
    }
    return {};
  }
};

inline SetFamily family_from_sets(const std::vector<std::set<int>>& sets) {
  SetFamily f;
  f.n = static_cast<int>(sets.size());
  if (f.n > 20) throw DomainError("at most 20 sets");
  f.union_card.assign(std::size_t{1} << f.n, 0);
  for (std::uint32_t m = 1; m < (1u << f.n); ++m) {
    std::set<int> u;
    for (int i = 0; i < f.n; ++i)
      if (m >> i & 1u) u.insert(sets[i].begin(), sets[i].end());
    f.union_card[m] = static_cast<long long>(u.size());
  }
  return f;
}

// |intersection over S| for every nonempty S, by induction on |S|:
//   |cap_S| = (-1)^{|S|+1} (|cup_S| - sum over nonempty proper T of (-1)^{|T|+1} |cap_T|)
// with the smaller intersections memoized.
inline std::vector<long long> intersections_from_unions(const SetFamily& f) {
  if (f.n < 0 || f.n > 20) throw DomainError("set count must lie in [0, 20]");
  if (f.union_card.size() != (std::size_t{1} << f.n)) throw DomainError("union table needs 2^n entries");
  const std::uint32_t full = (1u << f.n) - 1;
  std::vector<long long> inter(std::size_t{1} << f.n, 0);
  std::vector<std::uint32_t> order;
  for (std::uint32_t m = 1; m <= full; ++m) order.push_back(m);
  std::stable_sort(order.begin(), order.end(), [](std::uint32_t a, std::uint32_t b) { return std::popcount(a) < std::popcount(b); });
  for (std::uint32_t S : order) {
    long long proper = 0;
    for (std::uint32_t T = (S - 1) & S; T; T = (T - 1) & S) proper += (std::popcount(T) % 2 ? 1 : -1) * inter[T];
    long long v = f.union_card[S] - proper;
    if (std::popcount(S) % 2 == 0) v = -v;
    if (v < 0)
      throw UnrealizableError("unrealizable family: intersection over mask " + std::to_string(S) + " would be " +
                              std::to_string(v));
    inter[S] = v;
  }
  return inter;
}

inline std::map<std::uint32_t, long long> intersections_map(const SetFamily& f) {
  auto v = intersections_from_unions(f);
  std::map<std::uint32_t, long long> out;
  for (std::uint32_t m = 1; m < v.size(); ++m) out[m] = v[m];
  return out;
}

struct SignatureBlock {
  std::uint32_t signature = 0;  // bitmask of sources touching the block
  long long count = 0;
};

struct ParentSignaturePartition {
  std::vector<SignatureBlock> blocks;  // ascending signature
  long long total = 0;
};

// Components touched by exactly the sources in a signature, from the dimensions
// of the subspaces touched by each union of sources.
inline ParentSignaturePartition partition_by_signature(const SetFamily& union_dims) {
  auto inter = intersections_from_unions(union_dims);
  const int n = union_dims.n;
  const std::uint32_t full = (1u << n) - 1;
  ParentSignaturePartition p;
  p.total = n ? union_dims.at(full) : 0;
  long long sum = 0;
  for (std::uint32_t S = 1; S <= full; ++S) {
    // Exact-signature count by Moebius inversion over supersets.
    long long exact = 0;
    const std::uint32_t rest = full & ~S;
    for (std::uint32_t T = rest;; T = (T - 1) & rest) {
      exact += (std::popcount(T) % 2 ? -1 : 1) * inter[S | T];
      if (T == 0) break;
    }
    if (exact < 0)
      throw UnrealizableError("inconsistent dimensions: signature " + std::to_string(S) + " has count " + std::to_string(exact));
    if (exact > 0) p.blocks.push_back({S, exact});
    sum += exact;
  }
  if (sum != p.total) throw UnrealizableError("signature counts do not add up to the total dimension");
  return p;
}

}  // namespace hsel
