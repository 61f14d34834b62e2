#pragma once

#include <cstdint>
#include <random>
#include <vector>

namespace hsel {

using Rng = std::mt19937_64;

inline Rng make_rng(std::uint64_t seed, std::uint64_t stream = 0) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32)};
  return Rng(seq);
}

inline double uniform01(Rng& rng) { return std::uniform_real_distribution<double>(0.0, 1.0)(rng); }

inline double normal(Rng& rng, double mean = 0.0, double sd = 1.0) {
  return std::normal_distribution<double>(mean, sd)(rng);
}

inline int uniform_int(Rng& rng, int lo, int hi) {
  return std::uniform_int_distribution<int>(lo, hi)(rng);
}

inline std::vector<double> dirichlet(Rng& rng, std::size_t n, double alpha) {
  std::gamma_distribution<double> g(alpha, 1.0);
  std::vector<double> w(n);
  double s = 0.0;
  for (auto& v : w) {
    v = g(rng);
    s += v;
  }
  for (auto& v : w) v /= s;
  return w;
}

// Inverse-CDF draw; weights need not be normalized.
template <class Weights>
std::size_t draw_index(Rng& rng, const Weights& w) {
  double total = 0.0;
  for (double v : w) total += v;
  double u = uniform01(rng) * total;
  double acc = 0.0;
  std::size_t last = 0;
  for (std::size_t i = 0; i < w.size(); ++i) {
    if (w[i] <= 0.0) continue;
    acc += w[i];
    last = i;
    if (u < acc) return i;
  }
  return last;
}

}  // namespace hsel
