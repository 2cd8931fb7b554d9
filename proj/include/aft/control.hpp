#pragma once

#include <Eigen/Dense>

#include <utility>
#include <vector>

#include "aft/camera.hpp"
#include "aft/kinematics.hpp"
#include "aft/reconstruct.hpp"
#include "aft/refmodel.hpp"
#include "aft/sim.hpp"
#include "aft/types.hpp"

namespace aft {

// ---------------------------------------------------------------------------
// Targets.

/// Desired bend of one segment.
struct ShapeTarget {
  double kappa{0.0};
  double phi{0.0};
};

/// Either a per-segment shape or a 3D tip position; tip targets are
/// converted to a shape on every step through inverse kinematics.
struct ControlTarget {
  enum class Kind { shape, tip };

  Kind kind{Kind::shape};
  std::vector<ShapeTarget> shape;
  Eigen::Vector3d tip{Eigen::Vector3d::Zero()};

  static ControlTarget for_shape(std::vector<ShapeTarget> per_segment);
  static ControlTarget for_tip(const Eigen::Vector3d& position);

  /// Bends of an existing configuration as a shape target.
  static ControlTarget for_config(const RobotConfigd& config);
};

// ---------------------------------------------------------------------------
// PI controller with angular chamber weighting.

struct ControllerGains {
  double kp{8.0};              // kPa per unit curvature error
  double ki{6.0};              // kPa per unit curvature error-second
  double direction_gain{0.4};  // rad/s of weighting correction per rad of phi error
  double max_command{100.0};   // kPa
  double pressure_slew{50.0};  // kPa/s per chamber; <= 0 disables rate limiting
  double min_bend{0.05};       // curvature below which phi feedback is ignored

  IkOptions tip_ik;        // solver settings for tip-target conversion
  ConfigBounds tip_bounds; // empty: defaults for the current estimate
};

/// Evolving controller memory.  `direction` holds the per-segment correction
/// added to the target bending direction before chamber weighting; it is
/// what lets integral action cancel the direction bias of the weighting law.
struct ControllerState {
  ControllerGains gains;
  Eigen::VectorXd integrator;      // per segment, curvature error integral
  Eigen::VectorXd direction;       // per segment, rad
  Eigen::VectorXd last_pressures;  // 3 per segment, kPa
  bool saturated{false};

  static ControllerState initial(int n_segments, const ControllerGains& gains = {});
};

/// Rectified-cosine distribution of a segment command over its three
/// chambers at 0, 120, and 240 degrees; at most two entries are positive.
Eigen::Vector3d chamber_weights(double psi);

/// One feedback step: per segment, a PI command on the curvature error sets
/// the magnitude and the weighting direction tracks the target bending
/// plane.  Returns the chamber pressures (3 per segment, clamped to
/// [0, max_command]) and the advanced state.
std::pair<Eigen::VectorXd, ControllerState> control_step(const ControllerState& state,
                                                         const RobotConfigd& estimate,
                                                         const ControlTarget& target,
                                                         double dt = 1.0);

// ---------------------------------------------------------------------------
// Closed loop against the simulated plant.

struct ClosedLoopParams {
  int n_steps{50};
  double dt{1.0};
  sim::NoiseParams noise;  // sensing noise; seed also keys per-frame rendering
  TrackerParams tracker;
  ControllerGains gains;
  int metric_tail{5};     // steps averaged into the steady-state errors
  int shape_samples{8};   // backbone points in the shape error
};

/// One sense-estimate-act record.  `truth` is the plant configuration at
/// sensing time, so it is the configuration `estimate` was computed from;
/// errors compare `truth` against the target.
struct ControlStepRecord {
  Eigen::VectorXd pressures;
  RobotConfigd estimate;
  RobotConfigd truth;
  double shape_error{0.0};  // mean backbone sample distance / total length
  double tip_error{0.0};    // tip distance / total length
  bool lost{false};
  bool saturated{false};
};

struct ControlTrace {
  std::vector<ControlStepRecord> steps;
  double steady_shape_error{0.0};
  double steady_tip_error{0.0};
};

/// Mean distance between backbone samples of `config` and the target shape
/// (target bends, nominal lengths), divided by total length.
double shape_error(const RobotConfigd& config, const std::vector<ShapeTarget>& target,
                   const RobotConfigd& nominal, int n_samples = 8);

/// Runs the sense-estimate-act loop: render the plant through the camera,
/// track with `model`, command the plant.  On tracking loss the previous
/// pressures are held and the controller state is left unchanged.  Steady
/// errors average the last `metric_tail` records.
ControlTrace run_closed_loop(sim::PressurePlant& plant, ReferenceModel& model,
                             const sim::SyntheticSurface& surface, const PinholeCamera& camera,
                             const ControlTarget& target, const ClosedLoopParams& params = {});

}  // namespace aft
