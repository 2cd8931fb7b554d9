#pragma once

#include <Eigen/Dense>
#include <Eigen/Geometry>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "aft/errors.hpp"
#include "aft/types.hpp"

namespace aft {

/// sin(x)/x, series-evaluated near zero so the straight-segment limit is
/// smooth instead of a branch on kappa == 0.
template <typename Scalar> inline Scalar sinc(Scalar x) {
  if (std::abs(x) < Scalar(1e-4)) {
    const Scalar x2 = x * x;
    return Scalar(1) - x2 / Scalar(6) + x2 * x2 / Scalar(120);
  }
  return std::sin(x) / x;
}

/// Pose at local arc length s along one constant-curvature arc, in the
/// segment base frame (tangent along +z, bending plane rotated by phi
/// about z).  Translation uses (1 - cos u)/kappa = kappa s^2/2 sinc^2(u/2),
/// which has no cancellation for small curvature.
template <typename Scalar>
BackbonePose<Scalar> segment_pose(const SegmentConfig<Scalar>& seg, Scalar s) {
  const Scalar u = seg.kappa * s;
  const Scalar half_sinc = sinc(u / Scalar(2));
  const Scalar x_plane = seg.kappa * s * s / Scalar(2) * half_sinc * half_sinc;
  const Scalar z_plane = s * sinc(u);

  const Scalar c = std::cos(seg.phi);
  const Scalar sn = std::sin(seg.phi);
  BackbonePose<Scalar> pose;
  pose.position = Vector3<Scalar>(c * x_plane, sn * x_plane, z_plane);

  using AA = Eigen::AngleAxis<Scalar>;
  pose.rotation = (AA(seg.phi, Vector3<Scalar>::UnitZ()) * AA(u, Vector3<Scalar>::UnitY()) *
                   AA(-seg.phi, Vector3<Scalar>::UnitZ()))
                      .toRotationMatrix();
  return pose;
}

template <typename Scalar>
BackbonePose<Scalar> compose(const BackbonePose<Scalar>& a, const BackbonePose<Scalar>& b) {
  BackbonePose<Scalar> out;
  out.position = a.position + a.rotation * b.position;
  out.rotation = a.rotation * b.rotation;
  return out;
}

/// Pose of the backbone point at arc length sigma in [0, L].
template <typename Scalar>
BackbonePose<Scalar> forward_kinematics(const RobotConfig<Scalar>& config, Scalar sigma) {
  const Scalar L = config.total_length();
  const Scalar slack = Scalar(1e-9) * std::max(Scalar(1), L);
  if (!(sigma >= -slack && sigma <= L + slack)) {
    throw std::domain_error("forward_kinematics: sigma " + std::to_string(double(sigma)) +
                            " outside [0, " + std::to_string(double(L)) + "]");
  }
  Scalar remaining = std::clamp(sigma, Scalar(0), L);

  BackbonePose<Scalar> pose;
  for (const auto& seg : config.segments) {
    if (remaining <= seg.length) return compose(pose, segment_pose(seg, remaining));
    pose = compose(pose, segment_pose(seg, seg.length));
    remaining -= seg.length;
  }
  return pose;
}

template <typename Scalar> Vector3<Scalar> tip_position(const RobotConfig<Scalar>& config) {
  return forward_kinematics(config, config.total_length()).position;
}

/// Converts an arc-length coordinate between two configurations of the same
/// segment chain, keeping the per-segment fraction fixed.  This is what ties
/// a surface point to the same material cross-section when segment lengths
/// change under actuation.
template <typename Scalar>
Scalar map_sigma(Scalar sigma, const RobotConfig<Scalar>& from, const RobotConfig<Scalar>& to) {
  if (from.segments.size() != to.segments.size()) {
    throw std::invalid_argument("map_sigma: segment count mismatch");
  }
  const Scalar L = from.total_length();
  const Scalar slack = Scalar(1e-9) * std::max(Scalar(1), L);
  if (!(sigma >= -slack && sigma <= L + slack)) {
    throw std::domain_error("map_sigma: sigma outside source configuration");
  }
  Scalar remaining = std::clamp(sigma, Scalar(0), L);
  Scalar start_to = 0;
  for (std::size_t i = 0; i < from.segments.size(); ++i) {
    const Scalar li = from.segments[i].length;
    if (remaining <= li || i + 1 == from.segments.size()) {
      const Scalar fraction = std::min(remaining, li) / li;
      return start_to + fraction * to.segments[i].length;
    }
    remaining -= li;
    start_to += to.segments[i].length;
  }
  return start_to;
}

/// Position of a surface point under configuration `config`, given its rest
/// position and the arc-length coordinate (in rest coordinates) of its
/// nearest backbone point.  The rest offset is carried in the local backbone
/// frame, so config == rest_config is the identity map for any rest shape.
template <typename Scalar>
Vector3<Scalar> surface_point_position(const RobotConfig<Scalar>& config,
                                       const RobotConfig<Scalar>& rest_config,
                                       const Vector3<Scalar>& rest_point, Scalar sigma_rest) {
  const BackbonePose<Scalar> rest_pose = forward_kinematics(rest_config, sigma_rest);
  const Scalar sigma = map_sigma(sigma_rest, rest_config, config);
  const BackbonePose<Scalar> pose = forward_kinematics(config, sigma);
  const Vector3<Scalar> offset_local = rest_pose.rotation.transpose() * (rest_point - rest_pose.position);
  return pose.position + pose.rotation * offset_local;
}

// ---------------------------------------------------------------------------
// Backbone-driven inverse kinematics (double precision).

/// Box constraints of the feasible domain W.  phi is periodic and only
/// wrapped, never clamped.
struct SegmentBounds {
  double kappa_min{0.0};
  double kappa_max{20.0};
  double length_min{0.0};
  double length_max{0.0};
};

struct ConfigBounds {
  std::vector<SegmentBounds> segments;

  /// kappa in [0, 20] 1/m, length in [0.9, 1.3] x nominal.
  static ConfigBounds defaults_for(const RobotConfigd& nominal, double kappa_max = 20.0);

  void clamp(RobotConfigd& config) const;
  bool contains(const RobotConfigd& config, double tol = 1e-12) const;
};

/// Target backbone position at a known structural coordinate.  sigma is
/// expressed in the arc length of the reference configuration passed to the
/// solver and remapped per candidate, so targets stay attached to material
/// cross-sections while segment lengths vary.
struct IkTarget {
  double sigma{0.0};
  Eigen::Vector3d position{Eigen::Vector3d::Zero()};
};

struct IkOptions {
  int max_iterations{200};
  double cost_change_tolerance{1e-10};
  double fd_step{1e-6};
  double initial_lambda{1e-3};
};

struct IkResult {
  RobotConfigd config;
  double residual{0.0};  // sum of squared target deviations at the solution
  int iterations{0};
  bool converged{false};
};

/// Bounded damped least squares over the configuration vector.  Returns the
/// best configuration found; `converged` is false when the iteration cap was
/// hit before the cost change dropped below tolerance.
IkResult inverse_kinematics(std::span<const IkTarget> targets, const RobotConfigd& initial,
                            const ConfigBounds& bounds,
                            const RobotConfigd* sigma_reference = nullptr,
                            const IkOptions& options = {});

// ---------------------------------------------------------------------------
// Pressure -> arc length regression.

/// Per-segment linear map l = k . P + l0 over that segment's chambers.
struct PressureSegmentModel {
  Eigen::Vector3d k{Eigen::Vector3d::Zero()};  // m/kPa
  double l0{0.0};                              // m
};

struct PressureModel {
  std::vector<PressureSegmentModel> segments;
};

struct PressureSample {
  Eigen::VectorXd pressures;  // 3 per segment, kPa
  Eigen::VectorXd lengths;    // one per segment, m
};

struct SegmentLengths {
  std::vector<double> lengths;
  bool clamped{false};  // set when an input pressure was outside [0, 100] kPa
};

SegmentLengths pressures_to_lengths(const PressureModel& model, const Eigen::VectorXd& pressures);

/// Ordinary least squares per segment; needs >= 4 samples and a full-rank
/// pressure design.  Throws RankDeficientError naming the deficient segment.
PressureModel fit_pressure_model(const std::vector<PressureSample>& samples);

}  // namespace aft
