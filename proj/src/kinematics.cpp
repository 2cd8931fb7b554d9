#include "aft/kinematics.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <limits>

namespace aft {

ConfigBounds ConfigBounds::defaults_for(const RobotConfigd& nominal, double kappa_max) {
  ConfigBounds b;
  b.segments.reserve(nominal.segments.size());
  for (const auto& seg : nominal.segments) {
    b.segments.push_back({0.0, kappa_max, 0.9 * seg.length, 1.3 * seg.length});
  }
  return b;
}

void ConfigBounds::clamp(RobotConfigd& config) const {
  for (std::size_t i = 0; i < config.segments.size(); ++i) {
    auto& seg = config.segments[i];
    const auto& sb = segments[i];
    seg.kappa = std::clamp(seg.kappa, sb.kappa_min, sb.kappa_max);
    seg.length = std::clamp(seg.length, sb.length_min, sb.length_max);
    seg.phi = wrap_angle(seg.phi);
  }
}

bool ConfigBounds::contains(const RobotConfigd& config, double tol) const {
  if (config.segments.size() != segments.size()) return false;
  for (std::size_t i = 0; i < config.segments.size(); ++i) {
    const auto& seg = config.segments[i];
    const auto& sb = segments[i];
    if (seg.kappa < sb.kappa_min - tol || seg.kappa > sb.kappa_max + tol) return false;
    if (seg.length < sb.length_min - tol || seg.length > sb.length_max + tol) return false;
  }
  return true;
}

namespace {

// The solver works in (kappa_x, kappa_y, length) per segment.  The polar
// (kappa, phi) chart is singular at kappa = 0, where phi has no effect and a
// finite-difference Jacobian only sees bending in the current phi plane;
// Cartesian curvature makes the straight configuration a regular point.
Eigen::VectorXd pack(const RobotConfigd& config) {
  Eigen::VectorXd x(3 * config.segments.size());
  for (std::size_t i = 0; i < config.segments.size(); ++i) {
    const auto& seg = config.segments[i];
    x[3 * i + 0] = seg.kappa * std::cos(seg.phi);
    x[3 * i + 1] = seg.kappa * std::sin(seg.phi);
    x[3 * i + 2] = seg.length;
  }
  return x;
}

RobotConfigd unpack(const Eigen::VectorXd& x, const RobotConfigd& like) {
  RobotConfigd config = like;
  for (std::size_t i = 0; i < config.segments.size(); ++i) {
    const double kx = x[3 * i + 0];
    const double ky = x[3 * i + 1];
    config.segments[i].kappa = std::hypot(kx, ky);
    config.segments[i].phi = config.segments[i].kappa > 0.0 ? std::atan2(ky, kx) : 0.0;
    config.segments[i].length = x[3 * i + 2];
  }
  return config;
}

// Projection onto the feasible box, expressed in solver coordinates: radial
// clamp on curvature magnitude, interval clamp on length.
void project(Eigen::VectorXd& x, const ConfigBounds& bounds) {
  for (std::size_t i = 0; i < bounds.segments.size(); ++i) {
    const auto& sb = bounds.segments[i];
    double& kx = x[3 * i + 0];
    double& ky = x[3 * i + 1];
    const double n = std::hypot(kx, ky);
    if (n > sb.kappa_max) {
      kx *= sb.kappa_max / n;
      ky *= sb.kappa_max / n;
    } else if (n < sb.kappa_min) {
      if (n == 0.0) {
        kx = sb.kappa_min;
      } else {
        kx *= sb.kappa_min / n;
        ky *= sb.kappa_min / n;
      }
    }
    x[3 * i + 2] = std::clamp(x[3 * i + 2], sb.length_min, sb.length_max);
  }
}

Eigen::VectorXd residual_vector(const RobotConfigd& config, std::span<const IkTarget> targets,
                                const RobotConfigd& sigma_ref) {
  Eigen::VectorXd r(3 * targets.size());
  for (std::size_t t = 0; t < targets.size(); ++t) {
    const double sigma = map_sigma(targets[t].sigma, sigma_ref, config);
    const Eigen::Vector3d p = forward_kinematics(config, sigma).position;
    r.segment<3>(3 * static_cast<Eigen::Index>(t)) = p - targets[t].position;
  }
  return r;
}

}  // namespace

IkResult inverse_kinematics(std::span<const IkTarget> targets, const RobotConfigd& initial,
                            const ConfigBounds& bounds, const RobotConfigd* sigma_reference,
                            const IkOptions& options) {
  if (targets.empty()) throw InsufficientDataError("inverse_kinematics: no targets");
  if (bounds.segments.size() != initial.segments.size()) {
    throw std::invalid_argument("inverse_kinematics: bounds/config segment count mismatch");
  }
  const RobotConfigd sigma_ref = sigma_reference ? *sigma_reference : initial;

  RobotConfigd current = initial;
  bounds.clamp(current);
  Eigen::VectorXd x = pack(current);
  project(x, bounds);
  current = unpack(x, current);
  Eigen::VectorXd r = residual_vector(current, targets, sigma_ref);
  double cost = r.squaredNorm();

  IkResult best;
  best.config = current;
  best.residual = cost;

  const Eigen::Index n = x.size();
  const Eigen::Index m = r.size();
  double lambda = options.initial_lambda;
  Eigen::MatrixXd J(m, n);

  int iter = 0;
  for (; iter < options.max_iterations; ++iter) {
    for (Eigen::Index j = 0; j < n; ++j) {
      Eigen::VectorXd xp = x;
      xp[j] += options.fd_step;
      RobotConfigd probe = unpack(xp, current);
      J.col(j) = (residual_vector(probe, targets, sigma_ref) - r) / options.fd_step;
    }

    const Eigen::MatrixXd JtJ = J.transpose() * J;
    const Eigen::VectorXd Jtr = J.transpose() * r;

    bool accepted = false;
    for (int attempt = 0; attempt < 12 && !accepted; ++attempt) {
      Eigen::MatrixXd A = JtJ;
      A.diagonal() += lambda * JtJ.diagonal();
      A.diagonal().array() += 1e-12;
      const Eigen::VectorXd delta = A.ldlt().solve(-Jtr);

      Eigen::VectorXd xc = x + delta;
      project(xc, bounds);
      RobotConfigd candidate = unpack(xc, current);
      const Eigen::VectorXd rc = residual_vector(candidate, targets, sigma_ref);
      const double cc = rc.squaredNorm();
      if (cc < cost) {
        const double improvement = cost - cc;
        current = candidate;
        x = xc;
        r = rc;
        cost = cc;
        lambda = std::max(lambda / 3.0, 1e-12);
        accepted = true;
        if (cost < best.residual) {
          best.config = current;
          best.residual = cost;
        }
        // Tiny improvement only counts as convergence once damping is back
        // down; a large lambda makes every step tiny regardless of distance
        // to the optimum.
        if (improvement < options.cost_change_tolerance && lambda <= options.initial_lambda) {
          best.converged = true;
        }
      } else {
        lambda *= 10.0;
        if (lambda > 1e12) break;
      }
    }
    if (!accepted || best.converged) {
      best.converged = best.converged || !accepted;  // stalled: local minimum within bounds
      ++iter;
      break;
    }
  }

  // A straight segment has no preferred bending plane.
  for (auto& seg : best.config.segments) {
    seg.phi = seg.kappa < 1e-6 ? 0.0 : wrap_angle(seg.phi);
  }
  best.iterations = iter;
  return best;
}

SegmentLengths pressures_to_lengths(const PressureModel& model, const Eigen::VectorXd& pressures) {
  const Eigen::Index n = static_cast<Eigen::Index>(model.segments.size());
  if (pressures.size() != 3 * n) {
    throw std::invalid_argument("pressures_to_lengths: expected 3 pressures per segment");
  }
  SegmentLengths out;
  out.lengths.resize(model.segments.size());
  for (Eigen::Index i = 0; i < n; ++i) {
    Eigen::Vector3d p = pressures.segment<3>(3 * i);
    for (int c = 0; c < 3; ++c) {
      if (p[c] < 0.0 || p[c] > 100.0) {
        out.clamped = true;
        p[c] = std::clamp(p[c], 0.0, 100.0);
      }
    }
    out.lengths[static_cast<std::size_t>(i)] = model.segments[static_cast<std::size_t>(i)].k.dot(p) +
                                               model.segments[static_cast<std::size_t>(i)].l0;
  }
  return out;
}

PressureModel fit_pressure_model(const std::vector<PressureSample>& samples) {
  if (samples.empty()) throw InsufficientDataError("fit_pressure_model: no samples");
  const Eigen::Index n_seg = samples.front().lengths.size();
  for (const auto& s : samples) {
    if (s.lengths.size() != n_seg || s.pressures.size() != 3 * n_seg) {
      throw std::invalid_argument("fit_pressure_model: inconsistent sample sizes");
    }
  }
  if (static_cast<Eigen::Index>(samples.size()) < 4) {
    throw InsufficientDataError("fit_pressure_model: need at least 4 samples");
  }

  PressureModel model;
  model.segments.resize(static_cast<std::size_t>(n_seg));
  const Eigen::Index m = static_cast<Eigen::Index>(samples.size());
  for (Eigen::Index i = 0; i < n_seg; ++i) {
    Eigen::MatrixXd A(m, 4);
    Eigen::VectorXd b(m);
    for (Eigen::Index s = 0; s < m; ++s) {
      A.block<1, 3>(s, 0) = samples[static_cast<std::size_t>(s)].pressures.segment<3>(3 * i).transpose();
      A(s, 3) = 1.0;
      b[s] = samples[static_cast<std::size_t>(s)].lengths[i];
    }
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(A);
    qr.setThreshold(1e-10);
    if (qr.rank() < 4) {
      throw RankDeficientError("fit_pressure_model: pressure design for segment " +
                               std::to_string(i) + " is rank deficient");
    }
    const Eigen::Vector4d coef = qr.solve(b);
    model.segments[static_cast<std::size_t>(i)].k = coef.head<3>();
    model.segments[static_cast<std::size_t>(i)].l0 = coef[3];
  }
  return model;
}

}  // namespace aft
