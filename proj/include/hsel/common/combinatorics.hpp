#pragma once

#include <cstdint>
#include <numeric>
#include <span>
#include <vector>

#include "hsel/common/error.hpp"

namespace hsel {

// Mixed-radix codec, first digit most significant.
class Radix {
 public:
  Radix() = default;
  explicit Radix(std::vector<int> radices) : radices_(std::move(radices)), strides_(radices_.size()) {
    std::uint64_t s = 1;
    for (std::size_t i = radices_.size(); i-- > 0;) {
      if (radices_[i] < 1) throw DomainError("radix must be positive");
      strides_[i] = s;
      if (s > UINT64_MAX / static_cast<std::uint64_t>(radices_[i]))
        throw SizeError("configuration space exceeds 64-bit codes", UINT64_MAX);
      s *= static_cast<std::uint64_t>(radices_[i]);
    }
    size_ = s;
  }

  std::size_t digits() const { return radices_.size(); }
  std::uint64_t size() const { return size_; }
  const std::vector<int>& radices() const { return radices_; }
  std::uint64_t stride(std::size_t i) const { return strides_[i]; }

  std::uint64_t encode(std::span<const int> v) const {
    std::uint64_t c = 0;
    for (std::size_t i = 0; i < radices_.size(); ++i) c += static_cast<std::uint64_t>(v[i]) * strides_[i];
    return c;
  }
  int digit(std::uint64_t code, std::size_t i) const {
    return static_cast<int>((code / strides_[i]) % static_cast<std::uint64_t>(radices_[i]));
  }
  std::vector<int> decode(std::uint64_t code) const {
    std::vector<int> v(radices_.size());
    for (std::size_t i = 0; i < radices_.size(); ++i) v[i] = digit(code, i);
    return v;
  }

 private:
  std::vector<int> radices_;
  std::vector<std::uint64_t> strides_;
  std::uint64_t size_ = 1;
};

// Calls fn(subset) for every k-subset of items in lexicographic order of positions.
template <class Fn>
bool for_each_combination(const std::vector<int>& items, std::size_t k, Fn&& fn) {
  const std::size_t n = items.size();
  if (k > n) return false;
  std::vector<std::size_t> idx(k);
  std::iota(idx.begin(), idx.end(), 0);
  std::vector<int> subset(k);
  while (true) {
    for (std::size_t i = 0; i < k; ++i) subset[i] = items[idx[i]];
    if (fn(static_cast<const std::vector<int>&>(subset))) return true;
    std::size_t i = k;
    while (i > 0 && idx[i - 1] == n - k + (i - 1)) --i;
    if (i == 0) return false;
    ++idx[i - 1];
    for (std::size_t j = i; j < k; ++j) idx[j] = idx[j - 1] + 1;
  }
}

inline int popcount(std::uint64_t m) { return __builtin_popcountll(m); }

}  // namespace hsel
