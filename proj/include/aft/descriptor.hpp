#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <stdexcept>
#include <vector>

namespace aft {

/// Per-point appearance descriptors at several receptive-field scales.
/// scales[s] is (dims_s x n_points); column k belongs to point k at every
/// scale.  Stored in double precision so long exponential-update chains keep
/// their accuracy.
struct DescriptorSet {
  std::vector<Eigen::MatrixXd> scales;

  int n_scales() const { return static_cast<int>(scales.size()); }

  int n_points() const { return scales.empty() ? 0 : static_cast<int>(scales.front().cols()); }

  bool consistent() const {
    for (const auto& m : scales) {
      if (m.cols() != (scales.empty() ? 0 : scales.front().cols())) return false;
    }
    return true;
  }

  /// Columns `indices` of every scale, in the given order.
  DescriptorSet select(const std::vector<int>& indices) const {
    DescriptorSet out;
    out.scales.reserve(scales.size());
    for (const auto& m : scales) {
      Eigen::MatrixXd sub(m.rows(), static_cast<Eigen::Index>(indices.size()));
      for (std::size_t k = 0; k < indices.size(); ++k) {
        sub.col(static_cast<Eigen::Index>(k)) = m.col(indices[k]);
      }
      out.scales.push_back(std::move(sub));
    }
    return out;
  }
};

/// Scale-stacked unit descriptors: each scale's columns normalized to unit
/// length (zero columns stay zero), scaled by 1/sqrt(S), and concatenated
/// vertically.  The Gram matrix of two such stacks is the mean per-scale
/// cosine similarity, so one matrix product scores all pairs.
inline Eigen::MatrixXd stacked_unit_descriptors(const DescriptorSet& d) {
  if (d.scales.empty()) throw std::invalid_argument("stacked_unit_descriptors: no scales");
  Eigen::Index total_rows = 0;
  for (const auto& m : d.scales) total_rows += m.rows();
  const Eigen::Index n = d.scales.front().cols();
  const double scale_weight = 1.0 / std::sqrt(static_cast<double>(d.scales.size()));

  Eigen::MatrixXd stacked(total_rows, n);
  Eigen::Index row = 0;
  for (const auto& m : d.scales) {
    for (Eigen::Index j = 0; j < n; ++j) {
      const double norm = m.col(j).norm();
      if (norm > 0.0) {
        stacked.block(row, j, m.rows(), 1) = m.col(j) * (scale_weight / norm);
      } else {
        stacked.block(row, j, m.rows(), 1).setZero();
      }
    }
    row += m.rows();
  }
  return stacked;
}

}  // namespace aft
