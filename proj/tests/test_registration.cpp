#include <doctest.h>

#include <Eigen/Dense>
#include <Eigen/Geometry>

#include "aft/errors.hpp"
#include "aft/registration.hpp"
#include "aft/rng.hpp"

using namespace aft;

namespace {

Eigen::Matrix3d random_rotation(rng::Stream& rs) {
  Eigen::Quaterniond q(rs.normal(), rs.normal(), rs.normal(), rs.normal());
  return q.normalized().toRotationMatrix();
}

Eigen::Matrix3Xd random_cloud(rng::Stream& rs, int n) {
  Eigen::Matrix3Xd p(3, n);
  for (int i = 0; i < n; ++i) {
    p.col(i) = Eigen::Vector3d(rs.uniform(-1, 1), rs.uniform(-1, 1), rs.uniform(-1, 1));
  }
  return p;
}

// Closed-form reference: unit quaternion maximizing alignment, found as the
// dominant eigenvector of the 4x4 profile matrix built from the cross
// covariance (Horn's method).  Entirely independent of the SVD route.
RigidTransformd horn_fit(const Eigen::Matrix3Xd& from, const Eigen::Matrix3Xd& to) {
  const Eigen::Vector3d cf = from.rowwise().mean();
  const Eigen::Vector3d ct = to.rowwise().mean();
  const Eigen::Matrix3d s = (from.colwise() - cf) * (to.colwise() - ct).transpose();

  Eigen::Matrix4d n;
  const double sxx = s(0, 0), sxy = s(0, 1), sxz = s(0, 2);
  const double syx = s(1, 0), syy = s(1, 1), syz = s(1, 2);
  const double szx = s(2, 0), szy = s(2, 1), szz = s(2, 2);
  n << sxx + syy + szz, syz - szy, szx - sxz, sxy - syx,  //
      syz - szy, sxx - syy - szz, sxy + syx, szx + sxz,   //
      szx - sxz, sxy + syx, -sxx + syy - szz, syz + szy,  //
      sxy - syx, szx + sxz, syz + szy, -sxx - syy + szz;

  Eigen::SelfAdjointEigenSolver<Eigen::Matrix4d> es(n);
  const Eigen::Vector4d q = es.eigenvectors().col(3);  // largest eigenvalue
  RigidTransformd t;
  t.rotation = Eigen::Quaterniond(q[0], q[1], q[2], q[3]).normalized().toRotationMatrix();
  t.translation = ct - t.rotation * cf;
  return t;
}

}  // namespace

TEST_CASE("exact rigid motions are recovered to machine precision") {
  rng::Stream rs(31);
  for (int trial = 0; trial < 100; ++trial) {
    const int n = 3 + int(rs.index(40));
    const Eigen::Matrix3Xd a = random_cloud(rs, n);
    const Eigen::Matrix3d r_true = random_rotation(rs);
    const Eigen::Vector3d t_true(rs.uniform(-2, 2), rs.uniform(-2, 2), rs.uniform(-2, 2));
    const Eigen::Matrix3Xd b = (r_true * a).colwise() + t_true;

    const auto fit = fit_rigid_transform(a, b);
    CHECK((fit.transform.rotation - r_true).norm() < 1e-12);
    CHECK((fit.transform.translation - t_true).norm() < 1e-12);
    CHECK(fit.rms < 1e-13);
    CHECK(fit.transform.rotation.determinant() == doctest::Approx(1.0).epsilon(1e-12));
  }
}

TEST_CASE("noisy alignment agrees with the quaternion reference") {
  rng::Stream rs(32);
  for (int trial = 0; trial < 100; ++trial) {
    const int n = 4 + int(rs.index(60));
    const Eigen::Matrix3Xd a = random_cloud(rs, n);
    const Eigen::Matrix3d r_true = random_rotation(rs);
    const Eigen::Vector3d t_true(rs.uniform(-1, 1), rs.uniform(-1, 1), rs.uniform(-1, 1));
    Eigen::Matrix3Xd b = (r_true * a).colwise() + t_true;
    for (int i = 0; i < n; ++i) {
      b.col(i) += Eigen::Vector3d(rs.normal(0, 0.01), rs.normal(0, 0.01), rs.normal(0, 0.01));
    }

    const auto fit = fit_rigid_transform(a, b);
    const auto oracle = horn_fit(a, b);
    // Quaternion sign flips map to the same rotation; matrices must agree.
    CHECK((fit.transform.rotation - oracle.rotation).norm() < 1e-9);
    CHECK((fit.transform.translation - oracle.translation).norm() < 1e-9);

    // Both are least-squares optima, so residuals must coincide.
    const double rms_oracle =
        std::sqrt((((oracle.rotation * a).colwise() + oracle.translation) - b).squaredNorm() /
                  double(n));
    CHECK(fit.rms == doctest::Approx(rms_oracle).epsilon(1e-9));
  }
}

TEST_CASE("mirrored data still yields a proper rotation") {
  rng::Stream rs(33);
  Eigen::Matrix3Xd a = random_cloud(rs, 20);
  Eigen::Matrix3Xd b = a;
  b.row(2) *= -1.0;  // reflection, the unconstrained optimum is improper
  const auto fit = fit_rigid_transform(a, b);
  CHECK(fit.transform.rotation.determinant() == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("too few pairs are rejected") {
  Eigen::Matrix3Xd a(3, 2), b(3, 2);
  a.setRandom();
  b.setRandom();
  CHECK_THROWS_AS((void)fit_rigid_transform(a, b), InsufficientDataError);
}

TEST_CASE("mismatched pair counts are rejected") {
  Eigen::Matrix3Xd a(3, 5), b(3, 4);
  a.setRandom();
  b.setRandom();
  CHECK_THROWS_AS((void)fit_rigid_transform(a, b), std::invalid_argument);
}

TEST_CASE("collinear points are reported as degenerate") {
  const int n = 10;
  Eigen::Matrix3Xd a(3, n), b(3, n);
  for (int i = 0; i < n; ++i) {
    a.col(i) = Eigen::Vector3d(0.1 * i, 0.2 * i, -0.05 * i);
    b.col(i) = Eigen::Vector3d(0.2 * i, -0.1 * i, 0.05 * i);
  }
  CHECK_THROWS_AS((void)fit_rigid_transform(a, b), DegenerateGeometryError);
}

TEST_CASE("planar but non-collinear points are accepted") {
  rng::Stream rs(34);
  const int n = 15;
  Eigen::Matrix3Xd a(3, n);
  for (int i = 0; i < n; ++i) a.col(i) = Eigen::Vector3d(rs.uniform(-1, 1), rs.uniform(-1, 1), 0);
  const Eigen::Matrix3d r_true = random_rotation(rs);
  const Eigen::Matrix3Xd b = (r_true * a).colwise() + Eigen::Vector3d(0.3, -0.2, 0.9);
  const auto fit = fit_rigid_transform(a, b);
  CHECK((fit.transform.rotation - r_true).norm() < 1e-10);
}
