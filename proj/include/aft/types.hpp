#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstddef>
#include <numbers>
#include <stdexcept>
#include <vector>

namespace aft {

template <typename Scalar> using Vector3 = Eigen::Matrix<Scalar, 3, 1>;
template <typename Scalar> using Matrix3 = Eigen::Matrix<Scalar, 3, 3>;

/// Wraps an angle to (-pi, pi].
template <typename Scalar> inline Scalar wrap_angle(Scalar a) {
  constexpr Scalar pi = std::numbers::pi_v<Scalar>;
  Scalar r = std::fmod(a + pi, Scalar(2) * pi);
  if (r <= Scalar(0)) r += Scalar(2) * pi;
  return r - pi;
}

/// One constant-curvature arc: curvature (1/m), bending direction (rad),
/// arc length (m, > 0).
template <typename Scalar> struct SegmentConfig {
  Scalar kappa{0};
  Scalar phi{0};
  Scalar length{0};
};

/// Chain of constant-curvature segments, base at the origin with the
/// backbone tangent along +z.
template <typename Scalar> struct RobotConfig {
  std::vector<SegmentConfig<Scalar>> segments;

  RobotConfig() = default;
  explicit RobotConfig(std::vector<SegmentConfig<Scalar>> segs) : segments(std::move(segs)) {}

  Scalar total_length() const {
    Scalar l = 0;
    for (const auto& s : segments) l += s.length;
    return l;
  }

  static RobotConfig straight(Scalar segment_length, std::size_t n_segments = 2) {
    RobotConfig c;
    c.segments.assign(n_segments, SegmentConfig<Scalar>{Scalar(0), Scalar(0), segment_length});
    return c;
  }
};

/// Position and orientation of a backbone cross-section.
template <typename Scalar> struct BackbonePose {
  Vector3<Scalar> position{Vector3<Scalar>::Zero()};
  Matrix3<Scalar> rotation{Matrix3<Scalar>::Identity()};

  static BackbonePose identity() { return {}; }
};

/// Proper rigid motion p -> R p + t.
template <typename Scalar> struct RigidTransform {
  Matrix3<Scalar> rotation{Matrix3<Scalar>::Identity()};
  Vector3<Scalar> translation{Vector3<Scalar>::Zero()};

  Vector3<Scalar> apply(const Vector3<Scalar>& p) const { return rotation * p + translation; }

  static RigidTransform identity() { return {}; }
};

using SegmentConfigd = SegmentConfig<double>;
using RobotConfigd = RobotConfig<double>;
using BackbonePosed = BackbonePose<double>;
using RigidTransformd = RigidTransform<double>;

/// Throws std::invalid_argument on non-finite or non-positive segment
/// lengths, or an empty segment list.
template <typename Scalar> inline void validate(const RobotConfig<Scalar>& config) {
  if (config.segments.empty()) throw std::invalid_argument("RobotConfig: no segments");
  for (std::size_t i = 0; i < config.segments.size(); ++i) {
    const auto& s = config.segments[i];
    if (!(s.length > Scalar(0)) || !std::isfinite(s.length) || !std::isfinite(s.kappa) ||
        !std::isfinite(s.phi)) {
      throw std::invalid_argument("RobotConfig: invalid segment " + std::to_string(i));
    }
  }
}

}  // namespace aft
