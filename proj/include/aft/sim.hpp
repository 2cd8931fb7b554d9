#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <string>
#include <vector>

#include "aft/camera.hpp"
#include "aft/descriptor.hpp"
#include "aft/kinematics.hpp"
#include "aft/refmodel.hpp"
#include "aft/rng.hpp"
#include "aft/types.hpp"

namespace aft::sim {

// ---------------------------------------------------------------------------
// Synthetic robot surface.

struct SurfaceGeometry {
  double rings_per_meter{550.0};
  int points_per_ring{26};
  double radius{0.02};
  double tip_fraction{0.12};  // trailing body fraction with cluster-like appearance
};

/// Surface point set with exact structural ground truth: every point knows
/// the arc length of the cross-section that carries it and its noise-free
/// appearance at every scale.
struct SyntheticSurface {
  RobotConfigd rest_config;
  Eigen::Matrix3Xd rest_positions;
  Eigen::VectorXd sigma;
  DescriptorSet true_descriptors;

  int n_points() const { return static_cast<int>(rest_positions.cols()); }
};

/// Rings of points around the backbone.  Appearance blends a smooth texture
/// field along the body (coarser at higher scales) with a per-point
/// component; tip points instead cluster around a shared appearance, like a
/// uniform end effector.
SyntheticSurface generate_surface(const RobotConfigd& rest_config, const SurfaceGeometry& geometry,
                                  const std::vector<int>& descriptor_dims, std::uint64_t seed);

// ---------------------------------------------------------------------------
// RGB-D frame rendering.

struct NoiseParams {
  double depth_sigma{0.001};       // meters, along the camera ray
  double descriptor_sigma{0.05};   // per component, renormalized afterwards
  double dropout{0.1};             // chance a visible point is dropped
  std::uint64_t seed{0};
};

/// Horizontal occluding bar in image space: rows within half the bar height
/// of position * H, columns within the centered width fraction.  Zero
/// position or width disables it.
struct OcclusionBar {
  double position{0.0};  // normalized image height of the bar center
  double width{0.0};     // covered fraction of image columns
  double height_fraction{0.06};

  bool active() const { return position != 0.0 && width != 0.0; }
  bool blocks(double u, double v, int image_width, int image_height) const;
};

struct ObservedFrame {
  Eigen::Matrix3Xd positions;
  DescriptorSet descriptors;
  std::vector<int> source_index;  // generating surface point, for evaluation only
  double time{0.0};
  RobotConfigd true_config;
};

/// Depth-camera view of the surface in the given configuration: hidden and
/// occluded points removed, per-point dropout, depth noise along each ray,
/// descriptor noise per component followed by renormalization.  All
/// randomness is keyed by (noise.seed, frame_index, point), so a point's
/// draws do not depend on which other points survive.
ObservedFrame render_frame(const SyntheticSurface& surface, const RobotConfigd& config,
                           const PinholeCamera& camera, const NoiseParams& noise,
                           const OcclusionBar& occlusion, std::uint64_t frame_index, double time);

/// Multi-view capture of the rest pose for reference building, one frame per
/// camera with the same noise model (no dropout or occlusion).
MultiViewCapture capture_reference(const SyntheticSurface& surface,
                                   const std::vector<PinholeCamera>& cameras,
                                   const NoiseParams& noise);

// ---------------------------------------------------------------------------
// Cameras.

struct Viewpoint {
  std::string name;
  double azimuth_deg;
};

/// front, front-right, front-left, side-left.
const std::vector<Viewpoint>& standard_viewpoints();

/// Camera on a horizontal circle around the robot axis, aimed at the body
/// center with the tip toward the top of the image.
PinholeCamera viewpoint_camera(double azimuth_deg, double distance = 0.6, double center_z = 0.2,
                               const PinholeCamera& intrinsics = {});

/// Same, looked up by standard viewpoint name; throws std::invalid_argument
/// for a name not in standard_viewpoints().
PinholeCamera viewpoint_camera(const std::string& name, double distance = 0.6,
                               double center_z = 0.2, const PinholeCamera& intrinsics = {});

// ---------------------------------------------------------------------------
// Pressure-driven plant.

struct PlantParams {
  double kappa_gain{0.08};    // curvature per kPa of directional imbalance
  double length_gain{1e-5};   // meters per kPa of total pressure
  double time_constant{0.4};  // seconds, first-order response
  double max_pressure{100.0};
};

/// Two-segment pneumatic body: three chambers per segment, 120 degrees
/// apart.  Chamber pressures bend the segment toward their resultant and
/// stretch it with total pressure; the configuration follows commands with a
/// first-order lag.
class PressurePlant {
 public:
  explicit PressurePlant(const RobotConfigd& rest, const PlantParams& params = {});

  /// Lag-free configuration for the given pressures (3 per segment, kPa).
  RobotConfigd static_config(const Eigen::VectorXd& pressures) const;

  /// Advances the internal state by dt seconds under the given pressures.
  const RobotConfigd& step(const Eigen::VectorXd& pressures, double dt);

  const RobotConfigd& config() const { return state_; }
  const PlantParams& params() const { return params_; }
  const RobotConfigd& rest() const { return rest_; }

 private:
  RobotConfigd rest_;
  PlantParams params_;
  RobotConfigd state_;
};

// ---------------------------------------------------------------------------
// Motion sequences.

enum class TrajectoryKind { step, ramp, random_pressures };

struct TrajectoryParams {
  TrajectoryKind kind{TrajectoryKind::random_pressures};
  RobotConfigd target;       // step and ramp
  int n_frames{15};
  double dt{1.0};
  std::uint64_t seed{0};     // random_pressures
  double zero_chance{0.3};   // chance each chamber is left unpressurized
  ConfigBounds bounds;       // empty: defaults for the rest config
};

/// Per-chamber draw used by random_pressures trajectories: Uniform(0, max)
/// kPa, independently zeroed with the given chance.
Eigen::VectorXd random_chamber_pressures(int n_chambers, double max_pressure, double zero_chance,
                                         rng::Stream& rs);

/// Per-frame configurations, starting at rest.  step jumps to the target
/// after the first frame, ramp interpolates to it, random_pressures draws a
/// chamber pressure vector, maps it through the lag-free plant, and ramps
/// there.  Interpolation runs in bending-vector coordinates, so paths through
/// the straight shape stay smooth.  Frames are clamped to the bounds.
std::vector<RobotConfigd> make_trajectory(const RobotConfigd& rest, const TrajectoryParams& params,
                                          const PlantParams& plant = {});

}  // namespace aft::sim
