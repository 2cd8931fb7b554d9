#include "aft/reconstruct.hpp"

#include <Eigen/Geometry>

#include <cmath>
#include <utility>
#include <vector>

#include "aft/errors.hpp"
#include "aft/matching.hpp"
#include "aft/refmodel.hpp"
#include "aft/rng.hpp"
#include "aft/sim.hpp"
#include "doctest.h"

using namespace aft;
using namespace aft::sim;

namespace {

Eigen::Matrix3d random_rotation(rng::Stream& rs) {
  const Eigen::Quaterniond q(rs.normal(), rs.normal(), rs.normal(), rs.normal());
  return q.normalized().toRotationMatrix();
}

Eigen::Matrix3Xd random_points(int n, rng::Stream& rs, double spread = 0.1) {
  Eigen::Matrix3Xd pts(3, n);
  for (int i = 0; i < n; ++i) {
    pts.col(i) = Eigen::Vector3d(rs.normal(), rs.normal(), rs.normal()) * spread;
  }
  return pts;
}

/// Model built from a small zero-noise multi-view capture of a rest surface.
ReferenceModel small_model(int target_points = 400, std::uint64_t seed = 3) {
  const auto rest = RobotConfigd::straight(0.2, 2);
  SurfaceGeometry geometry;
  geometry.rings_per_meter = 250.0;
  geometry.points_per_ring = 16;
  const auto surface = generate_surface(rest, geometry, {8, 32}, seed);

  std::vector<PinholeCamera> cameras;
  for (const auto& view : standard_viewpoints()) {
    cameras.push_back(viewpoint_camera(view.azimuth_deg));
  }
  NoiseParams clean;
  clean.depth_sigma = 0.0;
  clean.descriptor_sigma = 0.0;
  clean.dropout = 0.0;
  clean.seed = seed;
  const auto capture = capture_reference(surface, cameras, clean);

  BuildOptions options;
  options.target_point_count = target_points;
  return build_reference_model(capture, options);
}

/// Poses every model point at `config` the same way the tracker does.
void pose_model(ReferenceModel& model, const RobotConfigd& config) {
  model.current_config = config;
  for (int i = 0; i < model.n_points(); ++i) {
    model.current_positions.col(i) =
        surface_point_position(config, model.rest_config,
                               Eigen::Vector3d(model.rest_positions.col(i)), model.sigma[i]);
  }
}

}  // namespace

TEST_CASE("section transform recovers a known rigid motion") {
  rng::Stream rs(7);
  for (int trial = 0; trial < 20; ++trial) {
    const Eigen::Matrix3d R = random_rotation(rs);
    const Eigen::Vector3d t(rs.normal(), rs.normal(), rs.normal());
    const Eigen::Matrix3Xd ref = random_points(12, rs);
    const Eigen::Matrix3Xd obs = (R * ref).colwise() + t;

    const auto fit = estimate_partition_transform(ref, obs);
    CHECK((fit.transform.rotation - R).norm() < 1e-9);
    CHECK((fit.transform.translation - t).norm() < 1e-9);
    CHECK(fit.rms < 1e-9);
  }
}

TEST_CASE("section transform beats random rotation candidates") {
  rng::Stream rs(19);
  for (int trial = 0; trial < 3; ++trial) {
    const int n = 5;
    const Eigen::Matrix3Xd ref = random_points(n, rs);
    Eigen::Matrix3Xd obs = (random_rotation(rs) * ref).colwise() +
                           Eigen::Vector3d(rs.normal(), rs.normal(), rs.normal());
    for (int i = 0; i < n; ++i) {
      obs.col(i) += Eigen::Vector3d(rs.normal(), rs.normal(), rs.normal()) * 0.02;
    }

    const auto fit = estimate_partition_transform(ref, obs);
    double best_fit = 0.0;
    for (int i = 0; i < n; ++i) {
      best_fit += (fit.transform.apply(ref.col(i)) - obs.col(i)).squaredNorm();
    }

    // Optimal translation for a fixed rotation aligns the centroids, so each
    // candidate only needs its rotation drawn at random.
    const Eigen::Vector3d ref_mean = ref.rowwise().mean();
    const Eigen::Vector3d obs_mean = obs.rowwise().mean();
    const Eigen::Matrix3Xd ref_c = ref.colwise() - ref_mean;
    const Eigen::Matrix3Xd obs_c = obs.colwise() - obs_mean;
    for (int candidate = 0; candidate < 100000; ++candidate) {
      const Eigen::Matrix3d R = random_rotation(rs);
      const double residual = (R * ref_c - obs_c).squaredNorm();
      CHECK(best_fit <= residual + 1e-12);
    }
  }
}

TEST_CASE("section transforms are equivariant under a shared motion") {
  rng::Stream rs(23);
  const Eigen::Matrix3Xd ref = random_points(15, rs);
  Eigen::Matrix3Xd obs = random_points(15, rs);
  obs = 0.3 * obs + ref;  // correlated but not rigid

  const auto base = estimate_partition_transform(ref, obs);

  const Eigen::Matrix3d G_rot = random_rotation(rs);
  const Eigen::Vector3d G_t(0.2, -0.1, 0.4);
  const Eigen::Matrix3Xd moved = (G_rot * obs).colwise() + G_t;
  const auto shifted = estimate_partition_transform(ref, moved);

  CHECK((shifted.transform.rotation - G_rot * base.transform.rotation).norm() < 1e-9);
  CHECK((shifted.transform.translation - (G_rot * base.transform.translation + G_t)).norm() <
        1e-9);
}

TEST_CASE("backbone fit with identity motions returns the rest shape") {
  const auto model = small_model();
  std::vector<std::pair<int, RigidTransformd>> transforms;
  for (int j = 0; j < model.n_partitions; ++j) {
    transforms.emplace_back(j, RigidTransformd::identity());
  }
  const auto bounds = ConfigBounds::defaults_for(model.rest_config);
  const auto fit = global_backbone_fit(model, transforms, bounds);

  CHECK(fit.residual < 1e-10);
  const double L = model.rest_config.total_length();
  for (double f : {0.25, 0.5, 0.75, 1.0}) {
    const auto est = forward_kinematics(fit.config, f * fit.config.total_length()).position;
    const auto want = forward_kinematics(model.rest_config, f * L).position;
    CHECK((est - want).norm() < 1e-6);
  }
}

TEST_CASE("backbone fit recovers a bend from exact section motions") {
  // Section motions are rigid only between nearby shapes, so the oracle
  // deforms from a posed state by a frame-sized increment, the regime the
  // fit actually runs in.
  auto model = small_model();
  RobotConfigd posed = model.rest_config;
  posed.segments[0] = {3.0, 0.4, 0.2};
  posed.segments[1] = {4.0, -0.9, 0.205};
  pose_model(model, posed);

  RobotConfigd bent = posed;
  bent.segments[0].kappa += 0.4;
  bent.segments[0].phi += 0.1;
  bent.segments[1].kappa -= 0.3;
  bent.segments[1].phi -= 0.15;
  bent.segments[1].length += 0.003;

  std::vector<std::pair<int, RigidTransformd>> transforms;
  for (int j = 0; j < model.n_partitions; ++j) {
    std::vector<int> members;
    for (int i = 0; i < model.n_points(); ++i) {
      if (model.partition[static_cast<std::size_t>(i)] == j) members.push_back(i);
    }
    Eigen::Matrix3Xd from(3, static_cast<Eigen::Index>(members.size()));
    Eigen::Matrix3Xd to(3, static_cast<Eigen::Index>(members.size()));
    for (std::size_t m = 0; m < members.size(); ++m) {
      const int i = members[m];
      from.col(static_cast<Eigen::Index>(m)) = model.current_positions.col(i);
      to.col(static_cast<Eigen::Index>(m)) =
          surface_point_position(bent, model.rest_config,
                                 Eigen::Vector3d(model.rest_positions.col(i)), model.sigma[i]);
    }
    transforms.emplace_back(j, estimate_partition_transform(from, to).transform);
  }

  const auto bounds = ConfigBounds::defaults_for(model.rest_config);
  const double L = bent.total_length();

  SUBCASE("all sections") {
    const auto fit = global_backbone_fit(model, transforms, bounds);
    CHECK((tip_position(fit.config) - tip_position(bent)).norm() < 1e-3 * L);
  }

  SUBCASE("one interior section dropped") {
    std::vector<std::pair<int, RigidTransformd>> reduced = {transforms[0], transforms[2],
                                                            transforms[3]};
    const auto fit = global_backbone_fit(model, reduced, bounds);
    CHECK((tip_position(fit.config) - tip_position(bent)).norm() < 2e-3 * L);
  }

  SUBCASE("fewer than two sections throws") {
    std::vector<std::pair<int, RigidTransformd>> one(transforms.begin(), transforms.begin() + 1);
    CHECK_THROWS_AS(global_backbone_fit(model, one, bounds), TrackingLossError);
    CHECK_THROWS_AS(global_backbone_fit(model, {}, bounds), TrackingLossError);
  }
}

TEST_CASE("tracking step is a fixed point on the model's own points") {
  auto model = small_model();
  RobotConfigd posed = model.rest_config;
  posed.segments[0] = {2.0, 0.4, 0.2};
  posed.segments[1] = {3.0, -0.9, 0.2};
  pose_model(model, posed);

  const auto camera = viewpoint_camera("front");
  const auto vis = visible_indices(camera, model.current_positions);
  REQUIRE(vis.size() > 100);

  Observation frame;
  frame.positions.resize(3, static_cast<Eigen::Index>(vis.size()));
  for (std::size_t j = 0; j < vis.size(); ++j) {
    frame.positions.col(static_cast<Eigen::Index>(j)) = model.current_positions.col(vis[j]);
  }
  frame.descriptors = model.descriptors.select(vis);
  frame.dt = 0.0;

  const Eigen::Matrix3Xd positions_before = model.current_positions;
  const auto result = process_frame(model, frame, camera);

  CHECK_FALSE(result.lost);
  // The tracker culls rear-facing points from the frame's pixel-visible set,
  // so it matches a camera-facing subset, each point to its exact twin.
  CHECK(result.n_matched > 100);
  CHECK(result.n_matched <= static_cast<int>(vis.size()));
  int counted = 0;
  for (int j = 0; j < model.n_partitions; ++j) {
    counted += result.pair_count[static_cast<std::size_t>(j)];
    if (result.resolved[static_cast<std::size_t>(j)]) {
      CHECK((result.transforms[static_cast<std::size_t>(j)].rotation -
             Eigen::Matrix3d::Identity())
                .norm() < 1e-6);
      CHECK(result.transforms[static_cast<std::size_t>(j)].translation.norm() < 1e-6);
    }
  }
  CHECK(counted == result.n_matched);
  CHECK(result.mean_score == doctest::Approx(1.0).epsilon(1e-4));

  for (std::size_t s = 0; s < posed.segments.size(); ++s) {
    CHECK(result.config.segments[s].kappa ==
          doctest::Approx(posed.segments[s].kappa).epsilon(1e-6));
    CHECK(result.config.segments[s].length ==
          doctest::Approx(posed.segments[s].length).epsilon(1e-6));
    CHECK(wrap_angle(result.config.segments[s].phi - posed.segments[s].phi) ==
          doctest::Approx(0.0).epsilon(1e-6));
  }
  CHECK((model.current_positions - positions_before).cwiseAbs().maxCoeff() < 1e-6);
}

TEST_CASE("tracking stays put on a rendered rest frame") {
  auto model = small_model();
  const auto rest = model.rest_config;
  SurfaceGeometry geometry;
  geometry.rings_per_meter = 250.0;
  geometry.points_per_ring = 16;
  const auto surface = generate_surface(rest, geometry, {8, 32}, 3);

  NoiseParams clean;
  clean.depth_sigma = 0.0;
  clean.descriptor_sigma = 0.0;
  clean.dropout = 0.0;
  const auto camera = viewpoint_camera("front");
  const auto rendered = render_frame(surface, rest, camera, clean, {}, 0, 0.0);

  const auto result =
      process_frame(model, {rendered.positions, rendered.descriptors, 1.0}, camera);

  CHECK_FALSE(result.lost);
  const double L = rest.total_length();
  CHECK((result.tip - tip_position(rest)).norm() < 1e-4 * L);
}

TEST_CASE("tracking follows a ramped bend under noise") {
  auto model = small_model();
  const auto rest = model.rest_config;
  SurfaceGeometry geometry;
  geometry.rings_per_meter = 250.0;
  geometry.points_per_ring = 16;
  const auto surface = generate_surface(rest, geometry, {8, 32}, 3);

  RobotConfigd target = rest;
  target.segments[0] = {3.5, 0.5, 0.2};
  target.segments[1] = {5.0, -0.8, 0.2};

  TrajectoryParams traj;
  traj.kind = TrajectoryKind::ramp;
  traj.target = target;
  traj.n_frames = 15;
  const auto configs = make_trajectory(rest, traj);

  NoiseParams noise;
  noise.depth_sigma = 0.001;
  noise.descriptor_sigma = 0.05;
  noise.dropout = 0.1;
  noise.seed = 5;
  const auto camera = viewpoint_camera("front");

  FrameResult last;
  double prev_time = 0.0;
  for (std::size_t k = 0; k < configs.size(); ++k) {
    const double time = static_cast<double>(k) * traj.dt;
    const auto rendered =
        render_frame(surface, configs[k], camera, noise, {}, static_cast<int>(k), time);
    last = process_frame(model, {rendered.positions, rendered.descriptors, time - prev_time},
                         camera);
    prev_time = time;
    REQUIRE_FALSE(last.lost);
  }

  const auto metrics = compute_metrics(last.config, target);
  CHECK(metrics.tip_error < 0.01);
  CHECK(last.timings.total > 0.0);
  int counted = 0;
  for (int c : last.pair_count) counted += c;
  CHECK(counted == last.n_matched);
}

TEST_CASE("residual agrees with its own recomputation") {
  auto model = small_model();
  const auto rest = model.rest_config;
  SurfaceGeometry geometry;
  geometry.rings_per_meter = 250.0;
  geometry.points_per_ring = 16;
  const auto surface = generate_surface(rest, geometry, {8, 32}, 3);

  RobotConfigd bent = rest;
  bent.segments[0] = {1.5, 0.3, 0.2};
  bent.segments[1] = {2.0, -0.4, 0.2};

  NoiseParams clean;
  clean.depth_sigma = 0.0;
  clean.descriptor_sigma = 0.0;
  clean.dropout = 0.0;
  const auto camera = viewpoint_camera("front");
  const auto rendered = render_frame(surface, bent, camera, clean, {}, 0, 0.0);

  const RobotConfigd before = model.current_config;
  const auto result =
      process_frame(model, {rendered.positions, rendered.descriptors, 1.0}, camera);
  REQUIRE_FALSE(result.lost);

  double recomputed = 0.0;
  for (int j = 0; j < model.n_partitions; ++j) {
    if (!result.resolved[static_cast<std::size_t>(j)]) continue;
    const double sigma_rest = model.partition_base[static_cast<std::size_t>(j)];
    const Eigen::Vector3d base =
        forward_kinematics(before, map_sigma(sigma_rest, rest, before)).position;
    const Eigen::Vector3d target = result.transforms[static_cast<std::size_t>(j)].apply(base);
    const Eigen::Vector3d reached =
        forward_kinematics(result.config, map_sigma(sigma_rest, rest, result.config)).position;
    recomputed += (target - reached).squaredNorm();
  }
  CHECK(std::abs(recomputed - result.residual) < 1e-10);
}

TEST_CASE("empty frame flags loss and leaves the model alone") {
  auto model = small_model();
  const auto config_before = model.current_config;
  const Eigen::Matrix3Xd positions_before = model.current_positions;
  const auto desc_before = model.descriptors;

  Observation frame;
  frame.positions.resize(3, 0);
  for (const auto& scale : model.descriptors.scales) {
    frame.descriptors.scales.emplace_back(scale.rows(), 0);
  }
  frame.dt = 1.0;

  const auto result = process_frame(model, frame, viewpoint_camera("front"));
  CHECK(result.lost);
  CHECK(result.n_matched == 0);
  for (std::size_t s = 0; s < config_before.segments.size(); ++s) {
    CHECK(result.config.segments[s].kappa == config_before.segments[s].kappa);
    CHECK(result.config.segments[s].phi == config_before.segments[s].phi);
    CHECK(result.config.segments[s].length == config_before.segments[s].length);
  }
  CHECK((model.current_positions - positions_before).cwiseAbs().maxCoeff() == 0.0);
  for (int s = 0; s < desc_before.n_scales(); ++s) {
    CHECK((model.descriptors.scales[static_cast<std::size_t>(s)] -
           desc_before.scales[static_cast<std::size_t>(s)])
              .cwiseAbs()
              .maxCoeff() == 0.0);
  }
}

TEST_CASE("a frame covering one section flags loss") {
  auto model = small_model();
  const auto camera = viewpoint_camera("front");
  const auto vis = visible_indices(camera, model.current_positions);

  // Front-facing points of the first section only; rear-surface points would
  // otherwise cross-match into neighboring sections.
  const Eigen::Vector3d eye = -(camera.world_to_camera.rotation.transpose() *
                                camera.world_to_camera.translation);
  std::vector<int> subset;
  for (int idx : vis) {
    if (model.partition[static_cast<std::size_t>(idx)] != 0) continue;
    const Eigen::Vector3d pos = model.current_positions.col(idx);
    const Eigen::Vector3d spine =
        forward_kinematics(model.rest_config, model.sigma[static_cast<std::size_t>(idx)]).position;
    if ((pos - spine).dot(eye - pos) > 0.0) subset.push_back(idx);
  }
  REQUIRE(subset.size() >= 5);

  Observation frame;
  frame.positions.resize(3, static_cast<Eigen::Index>(subset.size()));
  for (std::size_t j = 0; j < subset.size(); ++j) {
    frame.positions.col(static_cast<Eigen::Index>(j)) = model.current_positions.col(subset[j]);
  }
  frame.descriptors = model.descriptors.select(subset);
  frame.dt = 1.0;

  const Eigen::Matrix3Xd positions_before = model.current_positions;
  const auto result = process_frame(model, frame, camera);
  CHECK(result.lost);
  CHECK((model.current_positions - positions_before).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("pointwise baseline fit tracks a single bend") {
  auto model = small_model();
  const auto rest = model.rest_config;
  SurfaceGeometry geometry;
  geometry.rings_per_meter = 250.0;
  geometry.points_per_ring = 16;
  const auto surface = generate_surface(rest, geometry, {8, 32}, 3);

  RobotConfigd bent = rest;
  bent.segments[0] = {1.0, 0.2, 0.2};
  bent.segments[1] = {1.5, -0.3, 0.2};

  NoiseParams clean;
  clean.depth_sigma = 0.0;
  clean.descriptor_sigma = 0.0;
  clean.dropout = 0.0;
  const auto camera = viewpoint_camera("front");
  const auto rendered = render_frame(surface, bent, camera, clean, {}, 0, 0.0);

  TrackerParams params;
  params.hierarchical = false;
  params.direct_outer_iterations = 4;
  params.direct_inner_iterations = 15;
  const auto result =
      process_frame(model, {rendered.positions, rendered.descriptors, 1.0}, camera, params);

  REQUIRE_FALSE(result.lost);
  const auto metrics = compute_metrics(result.config, bent);
  CHECK(metrics.tip_error < 0.01);
}

TEST_CASE("metrics are exact on closed-form shapes") {
  const auto straight = RobotConfigd::straight(0.2, 2);
  const double L = straight.total_length();

  SUBCASE("estimate equal to truth") {
    const auto m = compute_metrics(straight, straight);
    CHECK(m.tip_error == 0.0);
    CHECK(m.shape_error == 0.0);
  }

  SUBCASE("straight estimate against a quarter arc") {
    const double kappa = std::numbers::pi / (2.0 * L);
    RobotConfigd arc = straight;
    arc.segments[0].kappa = kappa;
    arc.segments[1].kappa = kappa;

    auto arc_point = [&](double f) {
      const double theta = f * std::numbers::pi / 2.0;
      return Eigen::Vector3d((1.0 - std::cos(theta)) / kappa, 0.0, std::sin(theta) / kappa);
    };

    const auto m = compute_metrics(straight, arc, 8);
    const double tip_expected = (Eigen::Vector3d(0, 0, L) - arc_point(1.0)).norm() / L;
    CHECK(m.tip_error == doctest::Approx(tip_expected).epsilon(1e-12));

    double sum = 0.0;
    for (int i = 0; i < 8; ++i) {
      const double f = (i + 1) / 8.0;
      sum += (Eigen::Vector3d(0, 0, f * L) - arc_point(f)).norm();
    }
    CHECK(m.shape_error == doctest::Approx(sum / (8 * L)).epsilon(1e-12));

    // With a single sample the shape error collapses to the tip error.
    const auto single = compute_metrics(straight, arc, 1);
    CHECK(single.shape_error == doctest::Approx(single.tip_error).epsilon(1e-15));
  }

  SUBCASE("sample count must be positive") {
    CHECK_THROWS_AS(compute_metrics(straight, straight, 0), std::invalid_argument);
  }
}
