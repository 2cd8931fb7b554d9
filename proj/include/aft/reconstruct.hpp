#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <functional>
#include <utility>
#include <vector>

#include "aft/camera.hpp"
#include "aft/descriptor.hpp"
#include "aft/kinematics.hpp"
#include "aft/refmodel.hpp"
#include "aft/registration.hpp"
#include "aft/types.hpp"

namespace aft {

/// One tracked depth frame: a world-frame point cloud with per-point
/// descriptors, plus the time elapsed since the previous processed frame,
/// which scales the feature update.
struct Observation {
  Eigen::Matrix3Xd positions;
  DescriptorSet descriptors;
  double dt{0.0};  // seconds

  int n_points() const { return static_cast<int>(positions.cols()); }
};

/// One accepted match, as reported through TrackerParams::match_sink.
struct MatchRecord {
  int ref_index{0};  // column in the reference model
  int obs_index{0};  // column in the observed frame
  double score{0.0};
};

struct TrackerParams {
  double score_floor{0.05};          // pairs at or below never match
  double distance_sigma{1.0};        // proximity kernel width, m
  double alpha{0.1};                 // feature update rate, 1/s
  bool renormalize_features{true};
  int min_pairs_per_partition{3};    // floor of 3 enforced regardless
  double trim_ratio{3.0};            // drop pairs beyond this multiple of the
                                     // median section residual, then refit;
                                     // <= 0 disables trimming
  IkOptions ik{};
  ConfigBounds bounds{};             // empty: defaults for the rest config

  bool use_descriptors{true};        // false scores by proximity alone
  bool update_features{true};        // false freezes the stored descriptors
  bool hierarchical{true};           // false runs the pointwise baseline
  int direct_outer_iterations{12};   // baseline relinearization sweeps
  int direct_inner_iterations{30};   // solver iterations per sweep

  // Debug taps, invoked when set: the frame's score matrix (rows observed
  // points, cols visible model points) and the accepted matches.
  std::function<void(const Eigen::MatrixXd&)> score_sink;
  std::function<void(const std::vector<MatchRecord>&)> match_sink;
};

/// Wall-clock seconds spent in each stage of process_frame.
struct FrameTimings {
  double visibility{0.0};
  double score{0.0};
  double assign{0.0};
  double partition_fit{0.0};
  double backbone_fit{0.0};
  double surface_update{0.0};
  double feature_update{0.0};
  double total{0.0};
};

/// Outcome of one tracking step.  `transforms`, `resolved`, `pair_count`,
/// and `inlier_count` have one entry per body section; pair counts always
/// sum to n_matched, inlier counts tell how many pairs survived trimming.
/// When `lost` is set the model was left untouched and `config` repeats the
/// previous estimate.
struct FrameResult {
  RobotConfigd config;
  std::vector<RigidTransformd> transforms;
  std::vector<std::uint8_t> resolved;
  std::vector<int> pair_count;
  std::vector<int> inlier_count;
  int n_matched{0};
  double mean_score{0.0};
  double residual{0.0};  // backbone fit cost at the solution
  Eigen::Vector3d tip{Eigen::Vector3d::Zero()};
  FrameTimings timings{};
  bool lost{false};
};

/// Least-squares rigid motion taking one body section's reference points
/// onto their observed positions.  Inherits fit_rigid_transform's error
/// behavior for degenerate input.
RegistrationResult estimate_partition_transform(const Eigen::Matrix3Xd& reference_points,
                                                const Eigen::Matrix3Xd& observed_points);

/// Configuration whose backbone passes through the section base points as
/// moved by the given rigid motions.  Each (section index, T) pair
/// contributes the target T(X_j), where X_j is the backbone point at that
/// section's base coordinate under the model's current configuration.
/// Warm-started from the current configuration.  Throws TrackingLossError
/// with fewer than two sections.
IkResult global_backbone_fit(const ReferenceModel& model,
                             const std::vector<std::pair<int, RigidTransformd>>& transforms,
                             const ConfigBounds& bounds, const IkOptions& options = {});

/// One tracking step: predicts which model points the camera sees, scores
/// and matches them against the observation, fits a rigid motion per body
/// section, refines the configuration through the backbone fit, then
/// re-poses the model points and blends matched descriptors toward the
/// observation.  Tracking loss (too few usable sections) leaves the model
/// untouched and returns a flagged result instead of throwing.
FrameResult process_frame(ReferenceModel& model, const Observation& frame,
                          const PinholeCamera& camera, const TrackerParams& params = {});

/// Length-normalized errors against ground truth: tip distance over L, and
/// the mean backbone deviation sampled at n equally spaced arc-length
/// fractions (tip included, base excluded), also over L.
struct TrackingMetrics {
  double tip_error{0.0};
  double shape_error{0.0};
};

TrackingMetrics compute_metrics(const RobotConfigd& estimate, const RobotConfigd& truth,
                                int n_backbone_points = 8);

}  // namespace aft
