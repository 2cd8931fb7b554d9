#include "aft/control.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <span>
#include <stdexcept>
#include <utility>

namespace aft {

ControlTarget ControlTarget::for_shape(std::vector<ShapeTarget> per_segment) {
  ControlTarget t;
  t.kind = Kind::shape;
  t.shape = std::move(per_segment);
  return t;
}

ControlTarget ControlTarget::for_tip(const Eigen::Vector3d& position) {
  ControlTarget t;
  t.kind = Kind::tip;
  t.tip = position;
  return t;
}

ControlTarget ControlTarget::for_config(const RobotConfigd& config) {
  std::vector<ShapeTarget> shape;
  shape.reserve(config.segments.size());
  for (const auto& seg : config.segments) shape.push_back({seg.kappa, seg.phi});
  return for_shape(std::move(shape));
}

ControllerState ControllerState::initial(int n_segments, const ControllerGains& gains) {
  if (n_segments <= 0) throw std::invalid_argument("controller: need at least one segment");
  ControllerState s;
  s.gains = gains;
  s.integrator = Eigen::VectorXd::Zero(n_segments);
  s.direction = Eigen::VectorXd::Zero(n_segments);
  s.last_pressures = Eigen::VectorXd::Zero(3 * n_segments);
  return s;
}

Eigen::Vector3d chamber_weights(double psi) {
  Eigen::Vector3d w;
  for (int c = 0; c < 3; ++c) {
    w[c] = std::max(0.0, std::cos(psi - 2.0 * std::numbers::pi * c / 3.0));
  }
  return w;
}

namespace {

std::vector<ShapeTarget> resolve_shape(const ControllerState& state, const RobotConfigd& estimate,
                                       const ControlTarget& target) {
  std::vector<ShapeTarget> shape;
  if (target.kind == ControlTarget::Kind::tip) {
    ConfigBounds bounds = state.gains.tip_bounds;
    if (bounds.segments.empty()) bounds = ConfigBounds::defaults_for(estimate);
    const IkTarget ik_target{estimate.total_length(), target.tip};
    const auto ik = inverse_kinematics(std::span<const IkTarget>(&ik_target, 1), estimate, bounds,
                                       &estimate, state.gains.tip_ik);
    shape.reserve(ik.config.segments.size());
    for (const auto& seg : ik.config.segments) shape.push_back({seg.kappa, seg.phi});
  } else {
    shape = target.shape;
  }
  for (auto& s : shape) {
    if (s.kappa < 0.0) {
      s.kappa = -s.kappa;
      s.phi += std::numbers::pi;
    }
    s.phi = wrap_angle(s.phi);
  }
  return shape;
}

}  // namespace

std::pair<Eigen::VectorXd, ControllerState> control_step(const ControllerState& state,
                                                         const RobotConfigd& estimate,
                                                         const ControlTarget& target, double dt) {
  const int n = static_cast<int>(estimate.segments.size());
  if (state.integrator.size() != n) {
    throw std::invalid_argument("control_step: state sized for a different segment count");
  }
  if (dt <= 0.0) throw std::invalid_argument("control_step: dt must be positive");

  const auto shape = resolve_shape(state, estimate, target);
  if (static_cast<int>(shape.size()) != n) {
    throw std::invalid_argument("control_step: target segment count mismatch");
  }
  const ControllerGains& g = state.gains;

  ControllerState next = state;
  next.saturated = false;
  Eigen::VectorXd pressures(3 * n);
  for (int i = 0; i < n; ++i) {
    const auto& seg = estimate.segments[static_cast<std::size_t>(i)];
    const double error = shape[static_cast<std::size_t>(i)].kappa - seg.kappa;

    // Conditional integration: freeze the integral while it would only push
    // the command deeper into saturation.
    const double unsat = g.kp * error + g.ki * state.integrator[i];
    const bool windup = (unsat > g.max_command && error > 0.0) || (unsat < 0.0 && error < 0.0);
    if (!windup) next.integrator[i] = state.integrator[i] + error * dt;
    const double raw = g.kp * error + g.ki * next.integrator[i];
    const double u = std::clamp(raw, 0.0, g.max_command);
    if (raw != u) next.saturated = true;

    // The rectified-cosine weighting bends up to 30 degrees away from the
    // commanded plane, so the command direction carries its own integral
    // correction driven by the measured bending plane.
    const double phi_target = shape[static_cast<std::size_t>(i)].phi;
    if (seg.kappa >= g.min_bend && shape[static_cast<std::size_t>(i)].kappa >= g.min_bend) {
      const double dir_error = wrap_angle(phi_target - seg.phi);
      next.direction[i] = std::clamp(state.direction[i] + g.direction_gain * dir_error * dt,
                                     -std::numbers::pi / 3.0, std::numbers::pi / 3.0);
    }
    pressures.segment<3>(3 * i) = u * chamber_weights(phi_target + next.direction[i]);
  }
  pressures = pressures.cwiseMax(0.0).cwiseMin(g.max_command);

  if (g.pressure_slew > 0.0) {
    const double step_limit = g.pressure_slew * dt;
    const Eigen::VectorXd delta = (pressures - state.last_pressures)
                                      .cwiseMax(-step_limit)
                                      .cwiseMin(step_limit);
    pressures = state.last_pressures + delta;
  }
  next.last_pressures = pressures;
  return {pressures, next};
}

double shape_error(const RobotConfigd& config, const std::vector<ShapeTarget>& target,
                   const RobotConfigd& nominal, int n_samples) {
  if (n_samples <= 0) throw std::invalid_argument("shape_error: need at least one sample");
  if (target.size() != nominal.segments.size()) {
    throw std::invalid_argument("shape_error: target segment count mismatch");
  }
  RobotConfigd desired = nominal;
  for (std::size_t i = 0; i < target.size(); ++i) {
    desired.segments[i].kappa = target[i].kappa;
    desired.segments[i].phi = target[i].phi;
  }
  const double L_c = config.total_length();
  const double L_d = desired.total_length();
  double sum = 0.0;
  for (int i = 0; i < n_samples; ++i) {
    const double f = static_cast<double>(i + 1) / n_samples;
    sum += (forward_kinematics(config, f * L_c).position -
            forward_kinematics(desired, f * L_d).position)
               .norm();
  }
  return sum / (n_samples * L_d);
}

ControlTrace run_closed_loop(sim::PressurePlant& plant, ReferenceModel& model,
                             const sim::SyntheticSurface& surface, const PinholeCamera& camera,
                             const ControlTarget& target, const ClosedLoopParams& params) {
  if (params.n_steps <= 0) throw std::invalid_argument("closed loop: need at least one step");
  const int n = static_cast<int>(plant.rest().segments.size());

  // Fixed shape used for the trace metrics; tip targets are resolved once
  // from the rest configuration so the reported error has a stable meaning.
  std::vector<ShapeTarget> desired_shape;
  Eigen::Vector3d desired_tip;
  if (target.kind == ControlTarget::Kind::shape) {
    desired_shape = target.shape;
    RobotConfigd desired = plant.rest();
    for (std::size_t i = 0; i < desired_shape.size(); ++i) {
      desired.segments[i].kappa = desired_shape[i].kappa;
      desired.segments[i].phi = desired_shape[i].phi;
    }
    desired_tip = tip_position(desired);
  } else {
    desired_tip = target.tip;
    ConfigBounds bounds = params.gains.tip_bounds;
    if (bounds.segments.empty()) bounds = ConfigBounds::defaults_for(plant.rest());
    const IkTarget ik_target{plant.rest().total_length(), target.tip};
    const auto ik = inverse_kinematics(std::span<const IkTarget>(&ik_target, 1), plant.rest(),
                                       bounds, &plant.rest(), params.gains.tip_ik);
    desired_shape.reserve(ik.config.segments.size());
    for (const auto& seg : ik.config.segments) desired_shape.push_back({seg.kappa, seg.phi});
  }

  ControlTrace trace;
  trace.steps.reserve(static_cast<std::size_t>(params.n_steps));
  auto state = ControllerState::initial(n, params.gains);
  Eigen::VectorXd pressures = Eigen::VectorXd::Zero(3 * n);

  for (int step = 0; step < params.n_steps; ++step) {
    const RobotConfigd truth = plant.config();
    const auto frame =
        sim::render_frame(surface, truth, camera, params.noise, {},
                          static_cast<std::uint64_t>(step), step * params.dt);
    Observation obs{frame.positions, frame.descriptors, params.dt};
    const auto result = process_frame(model, obs, camera, params.tracker);

    ControlStepRecord rec;
    rec.lost = result.lost;
    rec.estimate = result.config;
    rec.truth = truth;
    if (!result.lost) {
      std::tie(pressures, state) = control_step(state, result.config, target, params.dt);
    }
    rec.pressures = pressures;
    rec.saturated = state.saturated;
    rec.shape_error = shape_error(truth, desired_shape, plant.rest(), params.shape_samples);
    rec.tip_error = (tip_position(truth) - desired_tip).norm() / truth.total_length();
    trace.steps.push_back(std::move(rec));

    plant.step(pressures, params.dt);
  }

  const int tail = std::min<int>(params.metric_tail, static_cast<int>(trace.steps.size()));
  for (std::size_t i = trace.steps.size() - static_cast<std::size_t>(tail); i < trace.steps.size();
       ++i) {
    trace.steady_shape_error += trace.steps[i].shape_error / tail;
    trace.steady_tip_error += trace.steps[i].tip_error / tail;
  }
  return trace;
}

}  // namespace aft
