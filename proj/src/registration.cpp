#include "aft/registration.hpp"

#include <Eigen/SVD>

#include <string>

#include "aft/errors.hpp"

namespace aft {

RegistrationResult fit_rigid_transform(const Eigen::Matrix3Xd& from, const Eigen::Matrix3Xd& to) {
  if (from.cols() != to.cols()) {
    throw std::invalid_argument("fit_rigid_transform: point count mismatch");
  }
  const Eigen::Index n = from.cols();
  if (n < 3) {
    throw InsufficientDataError("fit_rigid_transform: need at least 3 pairs, got " +
                                std::to_string(n));
  }

  const Eigen::Vector3d centroid_from = from.rowwise().mean();
  const Eigen::Vector3d centroid_to = to.rowwise().mean();
  const Eigen::Matrix3Xd a = from.colwise() - centroid_from;
  const Eigen::Matrix3Xd b = to.colwise() - centroid_to;

  const Eigen::Matrix3d h = a * b.transpose();
  Eigen::JacobiSVD<Eigen::Matrix3d> svd(h, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const Eigen::Vector3d s = svd.singularValues();
  if (s[1] < 1e-9 * s[0] + 1e-15) {
    throw DegenerateGeometryError(
        "fit_rigid_transform: point pairs are collinear, rotation is unobservable");
  }

  const Eigen::Matrix3d u = svd.matrixU();
  const Eigen::Matrix3d v = svd.matrixV();
  Eigen::Matrix3d d = Eigen::Matrix3d::Identity();
  d(2, 2) = (v * u.transpose()).determinant() < 0 ? -1.0 : 1.0;

  RegistrationResult result;
  result.transform.rotation = v * d * u.transpose();
  result.transform.translation = centroid_to - result.transform.rotation * centroid_from;
  result.rms = std::sqrt((result.transform.rotation * a - b).squaredNorm() / double(n));
  return result;
}

}  // namespace aft
