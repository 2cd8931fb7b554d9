#include "aft/refmodel.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "aft/errors.hpp"
#include "aft/kinematics.hpp"
#include "aft/rng.hpp"

namespace aft {

std::vector<int> farthest_point_sample(const Eigen::Matrix3Xd& points, int count,
                                       std::uint64_t seed) {
  const int n = static_cast<int>(points.cols());
  if (count >= n) {
    std::vector<int> all(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) all[static_cast<std::size_t>(i)] = i;
    return all;
  }
  if (count <= 0) return {};

  std::uint64_t state = seed;
  const int first = static_cast<int>(rng::splitmix64(state) % static_cast<std::uint64_t>(n));

  std::vector<int> chosen;
  chosen.reserve(static_cast<std::size_t>(count));
  chosen.push_back(first);
  Eigen::VectorXd dist2 =
      (points.colwise() - points.col(first)).colwise().squaredNorm().transpose();

  while (static_cast<int>(chosen.size()) < count) {
    int best = 0;
    double best_d = -1.0;
    for (int i = 0; i < n; ++i) {
      if (dist2[i] > best_d) {  // strict: lowest index wins ties
        best_d = dist2[i];
        best = i;
      }
    }
    chosen.push_back(best);
    dist2 = dist2.cwiseMin(
        (points.colwise() - points.col(best)).colwise().squaredNorm().transpose());
  }
  std::sort(chosen.begin(), chosen.end());
  return chosen;
}

Eigen::VectorXd aggregate_descriptor(const std::vector<Eigen::VectorXd>& views) {
  if (views.empty()) throw InsufficientDataError("aggregate_descriptor: no views");
  const int v = static_cast<int>(views.size());
  if (v == 1) return views.front();

  std::vector<Eigen::VectorXd> unit(views.begin(), views.end());
  for (auto& f : unit) {
    const double n = f.norm();
    if (n > 0.0) f /= n;
  }
  int best = 0;
  double best_mean = -std::numeric_limits<double>::infinity();
  for (int i = 0; i < v; ++i) {
    double acc = 0.0;
    for (int j = 0; j < v; ++j) acc += unit[static_cast<std::size_t>(i)].dot(unit[static_cast<std::size_t>(j)]);
    const double mean = acc / v;
    if (mean > best_mean) {  // strict: lowest view index wins ties
      best_mean = mean;
      best = i;
    }
  }
  return views[static_cast<std::size_t>(best)];
}

double nearest_arclength(const RobotConfigd& config, const Eigen::Vector3d& p, int samples) {
  const double L = config.total_length();
  if (samples < 2) throw std::invalid_argument("nearest_arclength: need at least 2 samples");

  auto dist2 = [&](double sigma) {
    return (forward_kinematics(config, sigma).position - p).squaredNorm();
  };

  int best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (int i = 0; i < samples; ++i) {
    const double d = dist2(L * i / (samples - 1));
    if (d < best_d) {
      best_d = d;
      best = i;
    }
  }

  double lo = L * std::max(best - 1, 0) / (samples - 1);
  double hi = L * std::min(best + 1, samples - 1) / (samples - 1);
  const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
  double x1 = hi - inv_phi * (hi - lo);
  double x2 = lo + inv_phi * (hi - lo);
  double f1 = dist2(x1);
  double f2 = dist2(x2);
  while (hi - lo > 1e-10 * std::max(1.0, L)) {
    if (f1 < f2) {
      hi = x2;
      x2 = x1;
      f2 = f1;
      x1 = hi - inv_phi * (hi - lo);
      f1 = dist2(x1);
    } else {
      lo = x1;
      x1 = x2;
      f1 = f2;
      x2 = lo + inv_phi * (hi - lo);
      f2 = dist2(x2);
    }
  }
  return 0.5 * (lo + hi);
}

int partition_index(double sigma, double total_length, int k) {
  const int raw = static_cast<int>(std::floor(sigma * k / total_length));
  return std::clamp(raw, 0, k - 1);
}

ReferenceModel build_reference_model(const MultiViewCapture& capture,
                                     const BuildOptions& options) {
  const int n = static_cast<int>(capture.positions.cols());
  const int n_views = static_cast<int>(capture.view_descriptors.size());
  if (n_views == 0) throw ModelConstructionError("reference build: no views");
  if (static_cast<int>(capture.view_visible.size()) != n_views) {
    throw std::invalid_argument("reference build: visibility/descriptor view count mismatch");
  }
  for (int v = 0; v < n_views; ++v) {
    if (capture.view_descriptors[static_cast<std::size_t>(v)].n_points() != n ||
        static_cast<int>(capture.view_visible[static_cast<std::size_t>(v)].size()) != n) {
      throw std::invalid_argument("reference build: view " + std::to_string(v) +
                                  " does not cover the fused cloud");
    }
  }
  validate(capture.rest_config);

  std::vector<int> seen;
  for (int i = 0; i < n; ++i) {
    for (int v = 0; v < n_views; ++v) {
      if (capture.view_visible[static_cast<std::size_t>(v)][static_cast<std::size_t>(i)]) {
        seen.push_back(i);
        break;
      }
    }
  }
  if (seen.empty()) throw ModelConstructionError("reference build: no point visible in any view");

  std::vector<int> kept;
  if (options.target_point_count > 0 &&
      options.target_point_count < static_cast<int>(seen.size())) {
    Eigen::Matrix3Xd seen_pos(3, static_cast<Eigen::Index>(seen.size()));
    for (std::size_t k = 0; k < seen.size(); ++k) seen_pos.col(static_cast<Eigen::Index>(k)) = capture.positions.col(seen[k]);
    for (int local : farthest_point_sample(seen_pos, options.target_point_count,
                                           options.sampling_seed)) {
      kept.push_back(seen[static_cast<std::size_t>(local)]);
    }
  } else {
    kept = seen;
  }

  const int m = static_cast<int>(kept.size());
  const int n_scales = capture.view_descriptors.front().n_scales();

  ReferenceModel model;
  model.rest_config = capture.rest_config;
  model.rest_positions.resize(3, m);
  model.sigma.resize(m);
  model.partition.resize(static_cast<std::size_t>(m));
  model.descriptors.scales.reserve(static_cast<std::size_t>(n_scales));
  for (int s = 0; s < n_scales; ++s) {
    model.descriptors.scales.emplace_back(
        capture.view_descriptors.front().scales[static_cast<std::size_t>(s)].rows(), m);
  }

  const double L = capture.rest_config.total_length();
  const int k = options.n_partitions;
  if (k <= 0) throw std::invalid_argument("reference build: need at least one partition");

  std::vector<Eigen::VectorXd> views_of_point;
  for (int out = 0; out < m; ++out) {
    const int i = kept[static_cast<std::size_t>(out)];
    model.rest_positions.col(out) = capture.positions.col(i);
    const double sigma =
        nearest_arclength(capture.rest_config, capture.positions.col(i), options.sigma_samples);
    model.sigma[out] = sigma;
    model.partition[static_cast<std::size_t>(out)] =
        static_cast<std::uint16_t>(partition_index(sigma, L, k));

    for (int s = 0; s < n_scales; ++s) {
      views_of_point.clear();
      for (int v = 0; v < n_views; ++v) {
        if (capture.view_visible[static_cast<std::size_t>(v)][static_cast<std::size_t>(i)]) {
          views_of_point.push_back(
              capture.view_descriptors[static_cast<std::size_t>(v)].scales[static_cast<std::size_t>(s)].col(i));
        }
      }
      model.descriptors.scales[static_cast<std::size_t>(s)].col(out) =
          aggregate_descriptor(views_of_point);
    }
  }

  model.n_partitions = k;
  model.partition_upper.resize(static_cast<std::size_t>(k));
  model.partition_base.resize(static_cast<std::size_t>(k));
  std::vector<int> counts(static_cast<std::size_t>(k), 0);
  for (auto p : model.partition) ++counts[p];
  for (int j = 0; j < k; ++j) {
    model.partition_upper[static_cast<std::size_t>(j)] = L * (j + 1) / k;
    model.partition_base[static_cast<std::size_t>(j)] = L * (j + 0.5) / k;
    if (counts[static_cast<std::size_t>(j)] == 0) {
      throw ModelConstructionError("reference build: body section " + std::to_string(j) +
                                   " of " + std::to_string(k) + " captured no points");
    }
  }
  model.current_config = model.rest_config;
  model.current_positions = model.rest_positions;
  return model;
}

}  // namespace aft
