#include "aft/sim.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

#include "aft/kinematics.hpp"
#include "aft/matching.hpp"
#include "aft/rng.hpp"

namespace aft::sim {

namespace {

Eigen::VectorXd random_unit(rng::Stream& rs, int dims) {
  Eigen::VectorXd v(dims);
  for (int i = 0; i < dims; ++i) v[i] = rs.normal();
  const double n = v.norm();
  return n > 0 ? Eigen::VectorXd(v / n) : v;
}

}  // namespace

SyntheticSurface generate_surface(const RobotConfigd& rest_config,
                                  const SurfaceGeometry& geometry,
                                  const std::vector<int>& descriptor_dims, std::uint64_t seed) {
  validate(rest_config);
  if (geometry.rings_per_meter <= 0.0 || geometry.points_per_ring < 1 || geometry.radius <= 0.0) {
    throw std::invalid_argument("generate_surface: empty geometry");
  }
  const double L = rest_config.total_length();
  const int n_rings =
      std::max(1, static_cast<int>(std::lround(geometry.rings_per_meter * L)));
  const int n = n_rings * geometry.points_per_ring;

  SyntheticSurface surface;
  surface.rest_config = rest_config;
  surface.rest_positions.resize(3, n);
  surface.sigma.resize(n);

  for (int ring = 0; ring < n_rings; ++ring) {
    const double sigma = L * (ring + 0.5) / n_rings;
    const auto pose = forward_kinematics(rest_config, sigma);
    for (int k = 0; k < geometry.points_per_ring; ++k) {
      const double ang = 2.0 * std::numbers::pi * k / geometry.points_per_ring;
      const Eigen::Vector3d offset(geometry.radius * std::cos(ang),
                                   geometry.radius * std::sin(ang), 0.0);
      const int i = ring * geometry.points_per_ring + k;
      surface.rest_positions.col(i) = pose.position + pose.rotation * offset;
      surface.sigma[i] = sigma;
    }
  }

  // Appearance per scale: smooth texture anchors along the body, blended
  // with a per-point component; within the tip fraction, a tight cluster
  // around one shared appearance.
  const double tip_start = L * (1.0 - geometry.tip_fraction);
  for (std::size_t s = 0; s < descriptor_dims.size(); ++s) {
    const int dims = descriptor_dims[s];
    if (dims < 1) throw std::invalid_argument("generate_surface: descriptor dims must be positive");
    const int n_anchors = std::max(6, 48 >> static_cast<int>(s));

    rng::Stream anchor_rs(rng::derive(seed, 1000 + static_cast<std::uint64_t>(s)));
    std::vector<Eigen::VectorXd> anchors;
    anchors.reserve(static_cast<std::size_t>(n_anchors));
    for (int a = 0; a < n_anchors; ++a) anchors.push_back(random_unit(anchor_rs, dims));
    const Eigen::VectorXd tip_center = random_unit(anchor_rs, dims);

    Eigen::MatrixXd mat(dims, n);
    for (int i = 0; i < n; ++i) {
      rng::Stream point_rs(
          rng::derive(rng::derive(seed, 2000 + static_cast<std::uint64_t>(s)),
                      static_cast<std::uint64_t>(i)));
      Eigen::VectorXd f;
      if (surface.sigma[i] > tip_start) {
        f = tip_center + 0.15 * random_unit(point_rs, dims);
      } else {
        const double pos = surface.sigma[i] / L * (n_anchors - 1);
        const int a0 = std::min(static_cast<int>(pos), n_anchors - 2);
        const double w = pos - a0;
        f = (1.0 - w) * anchors[static_cast<std::size_t>(a0)] +
            w * anchors[static_cast<std::size_t>(a0 + 1)] + 0.8 * random_unit(point_rs, dims);
      }
      mat.col(i) = f / f.norm();
    }
    surface.true_descriptors.scales.push_back(std::move(mat));
  }
  return surface;
}

bool OcclusionBar::blocks(double u, double v, int image_width, int image_height) const {
  if (!active()) return false;
  const double vc = position * image_height;
  const double half_h = 0.5 * height_fraction * image_height;
  if (v < vc - half_h || v > vc + half_h) return false;
  const double half_w = 0.5 * width * image_width;
  const double uc = 0.5 * image_width;
  return u >= uc - half_w && u <= uc + half_w;
}

ObservedFrame render_frame(const SyntheticSurface& surface, const RobotConfigd& config,
                           const PinholeCamera& camera, const NoiseParams& noise,
                           const OcclusionBar& occlusion, std::uint64_t frame_index, double time) {
  const int n = surface.n_points();
  Eigen::Matrix3Xd positions(3, n);
  for (int i = 0; i < n; ++i) {
    positions.col(i) = surface_point_position(config, surface.rest_config,
                                              Eigen::Vector3d(surface.rest_positions.col(i)),
                                              surface.sigma[i]);
  }

  const std::vector<int> visible = visible_indices(camera, positions);
  const std::uint64_t frame_seed = rng::derive(noise.seed, frame_index);

  std::vector<int> kept;
  std::vector<Eigen::Vector3d> observed_pos;
  for (int i : visible) {
    rng::Stream point_rs(rng::derive(frame_seed, static_cast<std::uint64_t>(i)));
    if (noise.dropout > 0.0 && point_rs.bernoulli(noise.dropout)) continue;

    const auto px = camera.project(positions.col(i));
    if (occlusion.blocks(px->u, px->v, camera.width, camera.height)) continue;

    double depth = px->depth;
    if (noise.depth_sigma > 0.0) depth += point_rs.normal(0.0, noise.depth_sigma);
    if (depth <= 0.0) continue;
    observed_pos.push_back(noise.depth_sigma > 0.0 ? camera.backproject(px->u, px->v, depth)
                                                   : Eigen::Vector3d(positions.col(i)));
    kept.push_back(i);
  }

  ObservedFrame frame;
  frame.time = time;
  frame.true_config = config;
  frame.source_index = kept;
  const int m = static_cast<int>(kept.size());
  frame.positions.resize(3, m);
  for (int k = 0; k < m; ++k) frame.positions.col(k) = observed_pos[static_cast<std::size_t>(k)];

  frame.descriptors.scales.reserve(surface.true_descriptors.scales.size());
  for (std::size_t s = 0; s < surface.true_descriptors.scales.size(); ++s) {
    const auto& truth = surface.true_descriptors.scales[s];
    Eigen::MatrixXd mat(truth.rows(), m);
    for (int k = 0; k < m; ++k) {
      mat.col(k) = truth.col(kept[static_cast<std::size_t>(k)]);
      if (noise.descriptor_sigma > 0.0) {
        rng::Stream desc_rs(rng::derive(
            rng::derive(frame_seed, 7000 + static_cast<std::uint64_t>(s)),
            static_cast<std::uint64_t>(kept[static_cast<std::size_t>(k)])));
        for (Eigen::Index r = 0; r < mat.rows(); ++r) {
          mat(r, k) += desc_rs.normal(0.0, noise.descriptor_sigma);
        }
        const double norm = mat.col(k).norm();
        if (norm > 0.0) mat.col(k) /= norm;
      }
    }
    frame.descriptors.scales.push_back(std::move(mat));
  }
  return frame;
}

MultiViewCapture capture_reference(const SyntheticSurface& surface,
                                   const std::vector<PinholeCamera>& cameras,
                                   const NoiseParams& noise) {
  MultiViewCapture capture;
  capture.rest_config = surface.rest_config;
  capture.positions = surface.rest_positions;

  NoiseParams view_noise = noise;
  view_noise.dropout = 0.0;
  view_noise.depth_sigma = 0.0;  // the fused cloud is the surface itself

  for (std::size_t v = 0; v < cameras.size(); ++v) {
    view_noise.seed = rng::derive(noise.seed, 500 + v);
    const auto frame =
        render_frame(surface, surface.rest_config, cameras[v], view_noise, {}, 0, 0.0);
    std::vector<std::uint8_t> mask(static_cast<std::size_t>(surface.n_points()), 0);
    DescriptorSet full;
    for (const auto& scale : surface.true_descriptors.scales) {
      full.scales.emplace_back(Eigen::MatrixXd::Zero(scale.rows(), surface.n_points()));
    }
    for (std::size_t k = 0; k < frame.source_index.size(); ++k) {
      const int i = frame.source_index[k];
      mask[static_cast<std::size_t>(i)] = 1;
      for (std::size_t s = 0; s < full.scales.size(); ++s) {
        full.scales[s].col(i) = frame.descriptors.scales[s].col(static_cast<Eigen::Index>(k));
      }
    }
    capture.view_visible.push_back(std::move(mask));
    capture.view_descriptors.push_back(std::move(full));
  }
  return capture;
}

const std::vector<Viewpoint>& standard_viewpoints() {
  static const std::vector<Viewpoint> views = {
      {"front", 0.0}, {"front-right", -35.0}, {"front-left", 35.0}, {"side-left", 80.0}};
  return views;
}

PinholeCamera viewpoint_camera(double azimuth_deg, double distance, double center_z,
                               const PinholeCamera& intrinsics) {
  const double az = azimuth_deg * std::numbers::pi / 180.0;
  const Eigen::Vector3d eye(distance * std::cos(az), distance * std::sin(az), center_z);
  const Eigen::Vector3d target(0.0, 0.0, center_z);
  return look_at_camera(eye, target, Eigen::Vector3d::UnitZ(), intrinsics);
}

PinholeCamera viewpoint_camera(const std::string& name, double distance, double center_z,
                               const PinholeCamera& intrinsics) {
  for (const auto& view : standard_viewpoints()) {
    if (view.name == name) {
      return viewpoint_camera(view.azimuth_deg, distance, center_z, intrinsics);
    }
  }
  throw std::invalid_argument("viewpoint_camera: unknown viewpoint '" + name + "'");
}

// ---------------------------------------------------------------------------

namespace {

struct BendState {
  double kx, ky, l;
};

BendState to_bend(const SegmentConfigd& seg) {
  return {seg.kappa * std::cos(seg.phi), seg.kappa * std::sin(seg.phi), seg.length};
}

SegmentConfigd from_bend(const BendState& b) {
  SegmentConfigd seg;
  seg.kappa = std::hypot(b.kx, b.ky);
  seg.phi = seg.kappa > 0.0 ? std::atan2(b.ky, b.kx) : 0.0;
  seg.length = b.l;
  return seg;
}

}  // namespace

PressurePlant::PressurePlant(const RobotConfigd& rest, const PlantParams& params)
    : rest_(rest), params_(params), state_(rest) {
  validate(rest);
}

RobotConfigd PressurePlant::static_config(const Eigen::VectorXd& pressures) const {
  const int n_seg = static_cast<int>(rest_.segments.size());
  if (pressures.size() != 3 * n_seg) {
    throw std::invalid_argument("plant: expected 3 chamber pressures per segment");
  }
  RobotConfigd out = rest_;
  for (int i = 0; i < n_seg; ++i) {
    double bx = 0.0, by = 0.0, total = 0.0;
    for (int c = 0; c < 3; ++c) {
      const double p = std::clamp(pressures[3 * i + c], 0.0, params_.max_pressure);
      const double theta = 2.0 * std::numbers::pi * c / 3.0;
      bx += p * std::cos(theta);
      by += p * std::sin(theta);
      total += p;
    }
    BendState b;
    b.kx = params_.kappa_gain * bx;
    b.ky = params_.kappa_gain * by;
    b.l = rest_.segments[static_cast<std::size_t>(i)].length + params_.length_gain * total;
    out.segments[static_cast<std::size_t>(i)] = from_bend(b);
  }
  return out;
}

const RobotConfigd& PressurePlant::step(const Eigen::VectorXd& pressures, double dt) {
  if (dt < 0.0) throw std::invalid_argument("plant: negative time step");
  const RobotConfigd target = static_config(pressures);
  const double a = 1.0 - std::exp(-dt / params_.time_constant);
  for (std::size_t i = 0; i < state_.segments.size(); ++i) {
    const BendState cur = to_bend(state_.segments[i]);
    const BendState tgt = to_bend(target.segments[i]);
    BendState next;
    next.kx = cur.kx + a * (tgt.kx - cur.kx);
    next.ky = cur.ky + a * (tgt.ky - cur.ky);
    next.l = cur.l + a * (tgt.l - cur.l);
    state_.segments[i] = from_bend(next);
  }
  return state_;
}

Eigen::VectorXd random_chamber_pressures(int n_chambers, double max_pressure, double zero_chance,
                                         rng::Stream& rs) {
  Eigen::VectorXd pressures(n_chambers);
  for (int c = 0; c < n_chambers; ++c) {
    const double p = rs.uniform(0.0, max_pressure);
    pressures[c] = rs.bernoulli(zero_chance) ? 0.0 : p;
  }
  return pressures;
}

std::vector<RobotConfigd> make_trajectory(const RobotConfigd& rest,
                                          const TrajectoryParams& params,
                                          const PlantParams& plant) {
  validate(rest);
  if (params.n_frames < 1) throw std::invalid_argument("trajectory: need at least one frame");
  const ConfigBounds bounds =
      params.bounds.segments.empty() ? ConfigBounds::defaults_for(rest) : params.bounds;

  RobotConfigd target;
  switch (params.kind) {
    case TrajectoryKind::step:
    case TrajectoryKind::ramp:
      target = params.target;
      validate(target);
      break;
    case TrajectoryKind::random_pressures: {
      rng::Stream rs(params.seed);
      const Eigen::VectorXd pressures = random_chamber_pressures(
          3 * static_cast<int>(rest.segments.size()), plant.max_pressure, params.zero_chance, rs);
      target = PressurePlant(rest, plant).static_config(pressures);
      break;
    }
  }
  bounds.clamp(target);

  std::vector<RobotConfigd> frames;
  frames.reserve(static_cast<std::size_t>(params.n_frames));
  for (int k = 0; k < params.n_frames; ++k) {
    if (params.kind == TrajectoryKind::step) {
      frames.push_back(k == 0 ? rest : target);
      continue;
    }
    const double w = params.n_frames == 1 ? 1.0 : static_cast<double>(k) / (params.n_frames - 1);
    RobotConfigd config = rest;
    for (std::size_t i = 0; i < rest.segments.size(); ++i) {
      const BendState a = to_bend(rest.segments[i]);
      const BendState b = to_bend(target.segments[i]);
      config.segments[i] = from_bend(
          {a.kx + w * (b.kx - a.kx), a.ky + w * (b.ky - a.ky), a.l + w * (b.l - a.l)});
    }
    frames.push_back(config);
  }
  return frames;
}

}  // namespace aft::sim
