#pragma once

#include <Eigen/Dense>

#include "aft/types.hpp"

namespace aft {

struct RegistrationResult {
  RigidTransformd transform;  // maps `from` points onto `to`
  double rms{0.0};            // root mean square residual after alignment
};

/// Least-squares rigid alignment of paired point sets (Kabsch).  Throws
/// InsufficientDataError for fewer than 3 pairs and DegenerateGeometryError
/// when the pairs are collinear, which leaves a rotation unobservable.
RegistrationResult fit_rigid_transform(const Eigen::Matrix3Xd& from, const Eigen::Matrix3Xd& to);

}  // namespace aft
