#pragma once

#include <Eigen/Dense>

#include <utility>
#include <vector>

#include "aft/camera.hpp"
#include "aft/descriptor.hpp"

namespace aft {

/// Indices of points that survive projection into the camera: in front of
/// the camera, inside the image, and nearest in their pixel (earliest index
/// wins depth ties).  Sorted ascending.
std::vector<int> visible_indices(const PinholeCamera& camera, const Eigen::Matrix3Xd& positions);

struct ScoreParams {
  double distance_sigma{1.0};   // meters, width of the proximity kernel
  bool use_descriptors{true};   // false scores by proximity alone
};

/// Pairwise match scores, rows = observed points, cols = reference points:
/// mean per-scale cosine similarity damped by a Gaussian in Euclidean
/// distance.  Both factors come from single matrix products accumulated in
/// single precision, so entries carry ~1e-6 noise.  Throws
/// std::invalid_argument on zero-norm descriptors or mismatched shapes.
Eigen::MatrixXd score_matrix(const DescriptorSet& observed_desc,
                             const Eigen::Matrix3Xd& observed_pos,
                             const DescriptorSet& reference_desc,
                             const Eigen::Matrix3Xd& reference_pos,
                             const ScoreParams& params = {});

/// Exponential moving update of matched reference descriptors toward the
/// observation: f <- (1 - a) f + a f_obs with a = clamp(alpha * dt, 0, 1),
/// applied at every scale, optionally renormalized to unit length after.
/// `pairs` lists (reference index, observed index).
void update_descriptors(DescriptorSet& reference, const DescriptorSet& observed,
                        const std::vector<std::pair<int, int>>& pairs, double alpha, double dt,
                        bool renormalize = true);

}  // namespace aft
