#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cstdint>
#include <numeric>
#include <string>
#include <vector>

#include "hsel/common/error.hpp"
#include "hsel/model/dataset.hpp"

namespace hsel {

struct FeatureColumn {
  int level = 0;
  int feature = 0;
};

// Column-major 0/1 matrix with (level, feature) column labels.
struct BinaryFeatureMatrix {
  int rows = 0;
  std::vector<FeatureColumn> columns;
  std::vector<std::vector<std::uint8_t>> data;  // one vector per column
  std::vector<std::string> provenance;

  int cols() const { return static_cast<int>(columns.size()); }
  std::uint8_t at(int r, int c) const { return data.at(c).at(r); }

  std::string label(int c) const { return "L" + std::to_string(columns[c].level) + "_f" + std::to_string(columns[c].feature); }

  void add_column(FeatureColumn fc, std::vector<std::uint8_t> values) {
    if (!columns.empty() && static_cast<int>(values.size()) != rows) throw DomainError("column length differs from row count");
    if (columns.empty()) rows = static_cast<int>(values.size());
    columns.push_back(fc);
    data.push_back(std::move(values));
  }
};

struct LevelCodes {
  int level = 0;
  Eigen::MatrixXd codes;  // samples x latent_dim
  std::string provenance;
};

namespace detail {

// Indices of the k largest positive entries; ties go to the lower index.
inline std::vector<int> top_k_indices(const Eigen::VectorXd& v, int k, bool positive_only) {
  std::vector<int> idx(v.size());
  std::iota(idx.begin(), idx.end(), 0);
  k = std::min<int>(k, static_cast<int>(v.size()));
  std::partial_sort(idx.begin(), idx.begin() + k, idx.end(), [&](int a, int b) { return v(a) > v(b) || (v(a) == v(b) && a < b); });
  std::vector<int> out;
  for (int i = 0; i < k; ++i)
    if (!positive_only || v(idx[i]) > 0.0) out.push_back(idx[i]);
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace detail

// Per level: keep the K features with the highest average activation, then mark
// a sample 1 for a kept feature iff it is among that sample's top-K activations.
inline BinaryFeatureMatrix binarize_topk(const std::vector<LevelCodes>& levels, const std::vector<int>& K) {
  if (K.size() != levels.size() && K.size() != 1) throw ConfigError("one K per level, or a single K");
  BinaryFeatureMatrix out;
  if (levels.empty()) return out;
  const Eigen::Index n = levels[0].codes.rows();
  std::vector<std::size_t> order(levels.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return levels[a].level < levels[b].level; });
  out.rows = static_cast<int>(n);
  for (std::size_t li : order) {
    const auto& L = levels[li];
    const int k = K.size() == 1 ? K[0] : K[li];
    if (L.codes.rows() != n) throw DomainError("levels differ in sample count");
    if (k < 1 || k > L.codes.cols()) throw ConfigError("K = " + std::to_string(k) + " exceeds latent dimension " + std::to_string(L.codes.cols()));
    Eigen::VectorXd mean = n ? Eigen::VectorXd(L.codes.colwise().mean().transpose()) : Eigen::VectorXd::Zero(L.codes.cols());
    auto kept = detail::top_k_indices(mean, k, false);
    std::vector<std::vector<std::uint8_t>> cols(kept.size(), std::vector<std::uint8_t>(n, 0));
    for (Eigen::Index r = 0; r < n; ++r) {
      auto act = detail::top_k_indices(L.codes.row(r).transpose(), k, true);
      for (std::size_t c = 0; c < kept.size(); ++c)
        if (std::binary_search(act.begin(), act.end(), kept[c])) cols[c][r] = 1;
    }
    for (std::size_t c = 0; c < kept.size(); ++c) out.add_column({L.level, kept[c]}, std::move(cols[c]));
    out.provenance.push_back(L.provenance);
  }
  return out;
}

inline BinaryFeatureMatrix binarize_topk(const std::vector<LevelCodes>& levels, int K) { return binarize_topk(levels, std::vector<int>{K}); }

inline Dataset to_dataset(const BinaryFeatureMatrix& b, std::uint64_t seed = 0) {
  Dataset d;
  d.seed = seed;
  d.discrete = true;
  d.values.resize(b.rows, b.cols());
  for (int c = 0; c < b.cols(); ++c) {
    d.labels.push_back(b.label(c));
    d.levels.push_back(b.columns[c].level);
    for (int r = 0; r < b.rows; ++r) d.values(r, c) = b.data[c][r];
  }
  return d;
}

}  // namespace hsel
