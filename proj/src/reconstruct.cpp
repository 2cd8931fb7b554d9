#include "aft/reconstruct.hpp"

#include <algorithm>
#include <chrono>
#include <cstddef>
#include <stdexcept>
#include <string>

#include "aft/assignment.hpp"
#include "aft/errors.hpp"
#include "aft/matching.hpp"

namespace aft {

RegistrationResult estimate_partition_transform(const Eigen::Matrix3Xd& reference_points,
                                                const Eigen::Matrix3Xd& observed_points) {
  return fit_rigid_transform(reference_points, observed_points);
}

IkResult global_backbone_fit(const ReferenceModel& model,
                             const std::vector<std::pair<int, RigidTransformd>>& transforms,
                             const ConfigBounds& bounds, const IkOptions& options) {
  if (transforms.size() < 2) {
    throw TrackingLossError("backbone fit: " + std::to_string(transforms.size()) +
                            " usable body sections, need at least 2");
  }
  std::vector<IkTarget> targets;
  targets.reserve(transforms.size());
  for (const auto& [section, transform] : transforms) {
    const double sigma_rest = model.partition_base.at(static_cast<std::size_t>(section));
    const double sigma_cur = map_sigma(sigma_rest, model.rest_config, model.current_config);
    const Eigen::Vector3d base = forward_kinematics(model.current_config, sigma_cur).position;
    targets.push_back({sigma_rest, transform.apply(base)});
  }
  return inverse_kinematics(targets, model.current_config, bounds, &model.rest_config, options);
}

namespace {

/// Direct pointwise baseline: every matched pair becomes its own backbone
/// target, with the surface offset peeled off using the orientation of the
/// current estimate, relinearized over several outer sweeps.
IkResult direct_pointwise_fit(const ReferenceModel& model,
                              const std::vector<std::pair<int, int>>& pairs,
                              const Eigen::Matrix3Xd& observed, const ConfigBounds& bounds,
                              const TrackerParams& params) {
  const std::size_t n = pairs.size();
  std::vector<double> sigma_rest(n);
  std::vector<Eigen::Vector3d> offset_local(n), obs_pos(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto [ref_idx, obs_idx] = pairs[i];
    sigma_rest[i] = model.sigma[ref_idx];
    const BackbonePosed rest_pose = forward_kinematics(model.rest_config, sigma_rest[i]);
    offset_local[i] = rest_pose.rotation.transpose() *
                      (model.rest_positions.col(ref_idx) - rest_pose.position);
    obs_pos[i] = observed.col(obs_idx);
  }

  IkOptions inner = params.ik;
  inner.max_iterations = params.direct_inner_iterations;

  IkResult fit;
  fit.config = model.current_config;
  std::vector<IkTarget> targets(n);
  for (int sweep = 0; sweep < params.direct_outer_iterations; ++sweep) {
    for (std::size_t i = 0; i < n; ++i) {
      const double sigma = map_sigma(sigma_rest[i], model.rest_config, fit.config);
      const BackbonePosed pose = forward_kinematics(fit.config, sigma);
      targets[i] = {sigma_rest[i], obs_pos[i] - pose.rotation * offset_local[i]};
    }
    fit = inverse_kinematics(targets, fit.config, bounds, &model.rest_config, inner);
  }
  return fit;
}

}  // namespace

FrameResult process_frame(ReferenceModel& model, const Observation& frame,
                          const PinholeCamera& camera, const TrackerParams& params) {
  using clock = std::chrono::steady_clock;
  const auto t_start = clock::now();
  auto mark = t_start;
  auto lap = [&mark] {
    const auto now = clock::now();
    const double s = std::chrono::duration<double>(now - mark).count();
    mark = now;
    return s;
  };

  const int k = model.n_partitions;
  FrameResult result;
  result.config = model.current_config;
  result.transforms.assign(static_cast<std::size_t>(k), RigidTransformd::identity());
  result.resolved.assign(static_cast<std::size_t>(k), 0);
  result.pair_count.assign(static_cast<std::size_t>(k), 0);
  result.inlier_count.assign(static_cast<std::size_t>(k), 0);
  result.tip = tip_position(model.current_config);

  // Pixel-level visibility alone leaks rear-surface points (the sparse model
  // rarely collides with itself in the depth buffer), and those would soak
  // up unmatched foreground observations.  The model knows its own tube
  // geometry, so points whose outward radial direction faces away from the
  // camera are culled as well.
  const Eigen::Vector3d eye = -(camera.world_to_camera.rotation.transpose() *
                                camera.world_to_camera.translation);
  std::vector<int> vis;
  for (int idx : visible_indices(camera, model.current_positions)) {
    const double sigma_cur =
        map_sigma(model.sigma[idx], model.rest_config, model.current_config);
    const Eigen::Vector3d spine = forward_kinematics(model.current_config, sigma_cur).position;
    const Eigen::Vector3d outward = model.current_positions.col(idx) - spine;
    if (outward.dot(eye - model.current_positions.col(idx)) > 0.0) vis.push_back(idx);
  }
  result.timings.visibility = lap();

  Eigen::Matrix3Xd ref_pos(3, static_cast<Eigen::Index>(vis.size()));
  for (std::size_t j = 0; j < vis.size(); ++j) {
    ref_pos.col(static_cast<Eigen::Index>(j)) = model.current_positions.col(vis[j]);
  }
  const DescriptorSet ref_desc =
      params.use_descriptors ? model.descriptors.select(vis) : DescriptorSet{};
  const Eigen::MatrixXd scores =
      score_matrix(frame.descriptors, frame.positions, ref_desc, ref_pos,
                   {params.distance_sigma, params.use_descriptors});
  if (params.score_sink) params.score_sink(scores);
  result.timings.score = lap();

  const AssignmentResult assignment = max_score_assignment(scores, params.score_floor);
  result.timings.assign = lap();

  std::vector<std::pair<int, int>> pairs;  // (model point, observed point)
  pairs.reserve(static_cast<std::size_t>(assignment.n_matched));
  for (int obs = 0; obs < frame.n_points(); ++obs) {
    const int j = assignment.row_to_col[static_cast<std::size_t>(obs)];
    if (j >= 0) pairs.emplace_back(vis[static_cast<std::size_t>(j)], obs);
  }
  if (params.match_sink) {
    std::vector<MatchRecord> records;
    records.reserve(pairs.size());
    for (int obs = 0; obs < frame.n_points(); ++obs) {
      const int j = assignment.row_to_col[static_cast<std::size_t>(obs)];
      if (j >= 0) {
        records.push_back({vis[static_cast<std::size_t>(j)], obs, scores(obs, j)});
      }
    }
    params.match_sink(records);
  }
  result.n_matched = assignment.n_matched;
  result.mean_score =
      assignment.n_matched > 0 ? assignment.total_score / assignment.n_matched : 0.0;
  for (const auto& [ref_idx, obs_idx] : pairs) {
    ++result.pair_count[model.partition[static_cast<std::size_t>(ref_idx)]];
  }

  const ConfigBounds bounds = params.bounds.segments.empty()
                                  ? ConfigBounds::defaults_for(model.rest_config)
                                  : params.bounds;

  std::vector<std::pair<int, int>> update_pairs = pairs;
  if (params.hierarchical) {
    const int min_pairs = std::max(3, params.min_pairs_per_partition);
    std::vector<std::pair<int, RigidTransformd>> usable;
    update_pairs.clear();

    auto gather = [&](const std::vector<std::pair<int, int>>& list, Eigen::Matrix3Xd& from,
                      Eigen::Matrix3Xd& to) {
      from.resize(3, static_cast<Eigen::Index>(list.size()));
      to.resize(3, static_cast<Eigen::Index>(list.size()));
      for (std::size_t m = 0; m < list.size(); ++m) {
        from.col(static_cast<Eigen::Index>(m)) = model.current_positions.col(list[m].first);
        to.col(static_cast<Eigen::Index>(m)) = frame.positions.col(list[m].second);
      }
    };

    for (int j = 0; j < k; ++j) {
      std::vector<std::pair<int, int>> section;
      for (const auto& pair : pairs) {
        if (model.partition[static_cast<std::size_t>(pair.first)] == j) section.push_back(pair);
      }
      if (static_cast<int>(section.size()) < min_pairs) continue;

      Eigen::Matrix3Xd from, to;
      gather(section, from, to);
      try {
        RegistrationResult reg = estimate_partition_transform(from, to);

        // Wrong correspondences (a dropped twin grabbing a neighbor) sit far
        // above the depth-noise residual band; one trimmed refit removes
        // them without disturbing clean sections.
        if (params.trim_ratio > 0.0) {
          std::vector<double> residuals(section.size());
          for (std::size_t m = 0; m < section.size(); ++m) {
            residuals[m] = (reg.transform.apply(from.col(static_cast<Eigen::Index>(m))) -
                            to.col(static_cast<Eigen::Index>(m)))
                               .norm();
          }
          std::vector<double> sorted = residuals;
          std::nth_element(sorted.begin(), sorted.begin() + sorted.size() / 2, sorted.end());
          const double median = sorted[sorted.size() / 2];
          const double threshold = std::max(params.trim_ratio * median, 1e-4);

          std::vector<std::pair<int, int>> inliers;
          for (std::size_t m = 0; m < section.size(); ++m) {
            if (residuals[m] <= threshold) inliers.push_back(section[m]);
          }
          if (static_cast<int>(inliers.size()) < min_pairs) continue;
          if (inliers.size() < section.size()) {
            gather(inliers, from, to);
            reg = estimate_partition_transform(from, to);
            section = std::move(inliers);
          }
        }

        result.transforms[static_cast<std::size_t>(j)] = reg.transform;
        result.resolved[static_cast<std::size_t>(j)] = 1;
        result.inlier_count[static_cast<std::size_t>(j)] = static_cast<int>(section.size());
        usable.emplace_back(j, reg.transform);
        update_pairs.insert(update_pairs.end(), section.begin(), section.end());
      } catch (const DegenerateGeometryError&) {
      } catch (const InsufficientDataError&) {
      }
    }
    result.timings.partition_fit = lap();

    if (usable.size() < 2) {
      result.lost = true;
      result.timings.total = std::chrono::duration<double>(clock::now() - t_start).count();
      return result;
    }
    const IkResult fit = global_backbone_fit(model, usable, bounds, params.ik);
    result.config = fit.config;
    result.residual = fit.residual;
    result.timings.backbone_fit = lap();
  } else {
    result.timings.partition_fit = lap();
    if (pairs.size() < 3) {
      result.lost = true;
      result.timings.total = std::chrono::duration<double>(clock::now() - t_start).count();
      return result;
    }
    const IkResult fit = direct_pointwise_fit(model, pairs, frame.positions, bounds, params);
    result.config = fit.config;
    result.residual = fit.residual;
    result.timings.backbone_fit = lap();
  }

  model.current_config = result.config;
  for (int i = 0; i < model.n_points(); ++i) {
    model.current_positions.col(i) =
        surface_point_position(model.current_config, model.rest_config,
                               Eigen::Vector3d(model.rest_positions.col(i)), model.sigma[i]);
  }
  result.timings.surface_update = lap();

  if (params.update_features && !update_pairs.empty()) {
    update_descriptors(model.descriptors, frame.descriptors, update_pairs, params.alpha,
                       frame.dt, params.renormalize_features);
  }
  result.timings.feature_update = lap();

  result.tip = tip_position(result.config);
  result.timings.total = std::chrono::duration<double>(clock::now() - t_start).count();
  return result;
}

TrackingMetrics compute_metrics(const RobotConfigd& estimate, const RobotConfigd& truth,
                                int n_backbone_points) {
  if (n_backbone_points <= 0) {
    throw std::invalid_argument("compute_metrics: need at least one backbone point");
  }
  const double L = truth.total_length();
  const double L_est = estimate.total_length();
  TrackingMetrics m;
  m.tip_error = (tip_position(estimate) - tip_position(truth)).norm() / L;
  double sum = 0.0;
  for (int i = 0; i < n_backbone_points; ++i) {
    const double f = static_cast<double>(i + 1) / n_backbone_points;
    sum += (forward_kinematics(estimate, f * L_est).position -
            forward_kinematics(truth, f * L).position)
               .norm();
  }
  m.shape_error = sum / (n_backbone_points * L);
  return m;
}

}  // namespace aft
