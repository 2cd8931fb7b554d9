#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <vector>

#include "aft/descriptor.hpp"
#include "aft/types.hpp"

namespace aft {

/// Persistent appearance model of the robot surface: points captured in a
/// known rest configuration, each carrying an arc-length coordinate on the
/// backbone, a partition index along the body, and multi-scale descriptors.
/// The rest fields are fixed after construction; current_config,
/// current_positions, and descriptors track the robot between frames and are
/// rewritten by the tracking pipeline.
struct ReferenceModel {
  RobotConfigd rest_config;
  Eigen::Matrix3Xd rest_positions;      // world frame at capture time
  Eigen::VectorXd sigma;                // backbone arc length per point, rest coordinates
  std::vector<std::uint16_t> partition; // body section per point
  int n_partitions{0};
  std::vector<double> partition_upper;  // upper sigma boundary per section
  std::vector<double> partition_base;   // section midpoint sigma, used as fit targets
  DescriptorSet descriptors;

  RobotConfigd current_config;          // latest tracked configuration
  Eigen::Matrix3Xd current_positions;   // model points posed at current_config

  int n_points() const { return static_cast<int>(rest_positions.cols()); }
};

/// Synchronized multi-view capture of one surface point set: a fused cloud
/// plus per-view descriptors and visibility for the same columns.
struct MultiViewCapture {
  RobotConfigd rest_config;
  Eigen::Matrix3Xd positions;
  std::vector<DescriptorSet> view_descriptors;
  std::vector<std::vector<std::uint8_t>> view_visible;
};

struct BuildOptions {
  int target_point_count{0};  // 0 keeps every point seen in at least one view
  int n_partitions{4};
  int sigma_samples{1001};
  std::uint64_t sampling_seed{0};
};

/// Greedy farthest-point subsample of `points`, `count` indices.  The start
/// index is drawn from the seed; each step takes the point farthest from the
/// chosen set, lowest index on ties.  Returned indices are sorted.
std::vector<int> farthest_point_sample(const Eigen::Matrix3Xd& points, int count,
                                       std::uint64_t seed);

/// Representative multi-view descriptor per scale: the view whose descriptor
/// has the highest mean cosine similarity to all capturing views of the same
/// point, itself included.  Ties pick the lowest view index.
Eigen::VectorXd aggregate_descriptor(const std::vector<Eigen::VectorXd>& views);

/// Arc length of the backbone point nearest to p: dense scan refined by
/// golden-section search.
double nearest_arclength(const RobotConfigd& config, const Eigen::Vector3d& p, int samples = 1001);

/// Body section of a given arc length for `k` equal sections over [0, L].
int partition_index(double sigma, double total_length, int k);

/// Assembles the tracking model from a capture.  Throws
/// ModelConstructionError when no points are visible or a body section ends
/// up empty.
ReferenceModel build_reference_model(const MultiViewCapture& capture,
                                     const BuildOptions& options = {});

}  // namespace aft
