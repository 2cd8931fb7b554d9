#include "aft/matching.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace aft {

std::vector<int> visible_indices(const PinholeCamera& camera, const Eigen::Matrix3Xd& positions) {
  const int n = static_cast<int>(positions.cols());
  std::vector<int> owner(static_cast<std::size_t>(camera.width) * camera.height, -1);
  std::vector<double> depth(owner.size(), 0.0);

  for (int i = 0; i < n; ++i) {
    const auto px = camera.project(positions.col(i));
    if (!px) continue;
    const std::size_t cell = static_cast<std::size_t>(static_cast<int>(px->v)) * camera.width +
                             static_cast<int>(px->u);
    if (owner[cell] == -1 || px->depth < depth[cell]) {
      owner[cell] = i;
      depth[cell] = px->depth;
    }
  }

  std::vector<int> visible;
  for (int idx : owner) {
    if (idx >= 0) visible.push_back(idx);
  }
  std::sort(visible.begin(), visible.end());
  return visible;
}

namespace {

/// Scales stacked to one matrix of unit per-scale blocks weighted 1/sqrt(S),
/// in single precision: one product then yields the mean per-scale cosine.
/// The frame-rate path runs float throughout; scores are selection weights,
/// so ~1e-6 accumulation error is immaterial while the matrix product runs
/// twice as fast.
Eigen::MatrixXf stacked_unit_f(const DescriptorSet& set) {
  Eigen::Index total_rows = 0;
  for (const auto& scale : set.scales) total_rows += scale.rows();
  const Eigen::Index n = set.n_points();
  const float scale_weight = 1.0f / std::sqrt(static_cast<float>(set.scales.size()));

  Eigen::MatrixXf stacked(total_rows, n);
  Eigen::Index row0 = 0;
  for (const auto& scale : set.scales) {
    for (Eigen::Index c = 0; c < n; ++c) {
      const double norm = scale.col(c).norm();
      if (norm <= 0.0) throw std::invalid_argument("score_matrix: zero-norm descriptor");
      stacked.block(row0, c, scale.rows(), 1) =
          (scale.col(c) * (scale_weight / norm)).cast<float>();
    }
    row0 += scale.rows();
  }
  return stacked;
}

}  // namespace

Eigen::MatrixXd score_matrix(const DescriptorSet& observed_desc,
                             const Eigen::Matrix3Xd& observed_pos,
                             const DescriptorSet& reference_desc,
                             const Eigen::Matrix3Xd& reference_pos, const ScoreParams& params) {
  const Eigen::Index n_obs = observed_pos.cols();
  const Eigen::Index n_ref = reference_pos.cols();

  // Squared distances through one Gram product, centered first so the
  // cancellation a2 - 2ab + b2 stays accurate in single precision.
  Eigen::Vector3d center = Eigen::Vector3d::Zero();
  if (n_obs + n_ref > 0) {
    center = (observed_pos.rowwise().sum() + reference_pos.rowwise().sum()) / (n_obs + n_ref);
  }
  const Eigen::Matrix3Xf obs_c = (observed_pos.colwise() - center).cast<float>();
  const Eigen::Matrix3Xf ref_c = (reference_pos.colwise() - center).cast<float>();
  const Eigen::VectorXf obs_sq = obs_c.colwise().squaredNorm().transpose();
  const Eigen::VectorXf ref_sq = ref_c.colwise().squaredNorm().transpose();
  Eigen::MatrixXf d2 = -2.0f * (obs_c.transpose() * ref_c);
  d2.colwise() += obs_sq;
  d2.rowwise() += ref_sq.transpose();
  d2 = d2.cwiseMax(0.0f);

  const float inv_s2 = 1.0f / static_cast<float>(params.distance_sigma * params.distance_sigma);
  Eigen::MatrixXf scores = (-d2 * inv_s2).array().exp().matrix();

  if (params.use_descriptors) {
    if (observed_desc.n_points() != n_obs || reference_desc.n_points() != n_ref) {
      throw std::invalid_argument("score_matrix: descriptor and position counts differ");
    }
    if (observed_desc.n_scales() != reference_desc.n_scales()) {
      throw std::invalid_argument("score_matrix: scale count mismatch");
    }
    const Eigen::MatrixXf obs_unit = stacked_unit_f(observed_desc);
    const Eigen::MatrixXf ref_unit = stacked_unit_f(reference_desc);
    const Eigen::MatrixXf cos_ms =
        (obs_unit.transpose() * ref_unit).cwiseMin(1.0f).cwiseMax(-1.0f);
    scores.array() *= cos_ms.array();
  }
  return scores.cast<double>();
}

void update_descriptors(DescriptorSet& reference, const DescriptorSet& observed,
                        const std::vector<std::pair<int, int>>& pairs, double alpha, double dt,
                        bool renormalize) {
  if (dt < 0.0) throw std::invalid_argument("update_descriptors: negative time step");
  if (reference.n_scales() != observed.n_scales()) {
    throw std::invalid_argument("update_descriptors: scale count mismatch");
  }
  const double a = std::clamp(alpha * dt, 0.0, 1.0);
  if (a == 0.0 || pairs.empty()) return;

  for (int s = 0; s < reference.n_scales(); ++s) {
    auto& ref = reference.scales[static_cast<std::size_t>(s)];
    const auto& obs = observed.scales[static_cast<std::size_t>(s)];
    for (const auto& [ref_idx, obs_idx] : pairs) {
      ref.col(ref_idx) = (1.0 - a) * ref.col(ref_idx) + a * obs.col(obs_idx);
      if (renormalize) {
        const double n = ref.col(ref_idx).norm();
        if (n > 0.0) ref.col(ref_idx) /= n;
      }
    }
  }
}

}  // namespace aft
