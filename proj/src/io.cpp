#include "aft/io.hpp"

#include <algorithm>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <initializer_list>
#include <sstream>
#include <string>
#include <type_traits>

#include "aft/errors.hpp"

namespace aft::io {

namespace {

// ---------------------------------------------------------------------------
// Raw little-endian binary primitives.

template <typename T> void put(std::ostream& os, const T& v) {
  static_assert(std::is_trivially_copyable_v<T>);
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T> T take(std::istream& is, const char* what) {
  T v;
  is.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!is) throw FileError(std::string("truncated file while reading ") + what);
  return v;
}

void put_block(std::ostream& os, const double* data, std::size_t count) {
  os.write(reinterpret_cast<const char*>(data),
           static_cast<std::streamsize>(count * sizeof(double)));
}

void take_block(std::istream& is, double* data, std::size_t count, const char* what) {
  is.read(reinterpret_cast<char*>(data), static_cast<std::streamsize>(count * sizeof(double)));
  if (!is) throw FileError(std::string("truncated file while reading ") + what);
}

void put_config(std::ostream& os, const RobotConfigd& config) {
  put<std::uint32_t>(os, static_cast<std::uint32_t>(config.segments.size()));
  for (const auto& seg : config.segments) {
    put(os, seg.kappa);
    put(os, seg.phi);
    put(os, seg.length);
  }
}

RobotConfigd take_config(std::istream& is, const char* what) {
  const auto n = take<std::uint32_t>(is, what);
  if (n == 0 || n > 10000) throw FileError(std::string(what) + ": implausible segment count");
  RobotConfigd config;
  config.segments.resize(n);
  for (auto& seg : config.segments) {
    seg.kappa = take<double>(is, what);
    seg.phi = take<double>(is, what);
    seg.length = take<double>(is, what);
  }
  return config;
}

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw FileError("cannot open for writing: " + path.string());
  return os;
}

std::ifstream open_in(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw FileError("cannot open: " + path.string());
  return is;
}

void check_magic(std::istream& is, const char* magic, const char* kind) {
  char buf[4];
  is.read(buf, 4);
  if (!is || std::memcmp(buf, magic, 4) != 0) {
    throw FileError(std::string("not a ") + kind + " file");
  }
}

// ---------------------------------------------------------------------------
// Strict JSON field access.

void expect_object(const Json& j, const char* context) {
  if (!j.is_object()) throw std::invalid_argument(std::string(context) + ": expected an object");
}

void expect_keys(const Json& j, const char* context,
                 std::initializer_list<const char*> known) {
  expect_object(j, context);
  for (const auto& item : j.items()) {
    const bool ok = std::any_of(known.begin(), known.end(),
                                [&](const char* k) { return item.key() == k; });
    if (!ok) {
      throw std::invalid_argument(std::string(context) + ": unknown key '" + item.key() + "'");
    }
  }
}

double num_or(const Json& j, const char* key, double fallback) {
  if (!j.contains(key)) return fallback;
  const auto& v = j.at(key);
  if (!v.is_number()) throw std::invalid_argument(std::string("'") + key + "' must be a number");
  return v.get<double>();
}

int int_or(const Json& j, const char* key, int fallback) {
  if (!j.contains(key)) return fallback;
  const auto& v = j.at(key);
  if (!v.is_number_integer()) {
    throw std::invalid_argument(std::string("'") + key + "' must be an integer");
  }
  return v.get<int>();
}

std::uint64_t u64_or(const Json& j, const char* key, std::uint64_t fallback) {
  if (!j.contains(key)) return fallback;
  const auto& v = j.at(key);
  if (!(v.is_number_unsigned() || (v.is_number_integer() && v.get<std::int64_t>() >= 0))) {
    throw std::invalid_argument(std::string("'") + key +
                                "' must be a non-negative integer");
  }
  return v.get<std::uint64_t>();
}

bool bool_or(const Json& j, const char* key, bool fallback) {
  if (!j.contains(key)) return fallback;
  const auto& v = j.at(key);
  if (!v.is_boolean()) throw std::invalid_argument(std::string("'") + key + "' must be a bool");
  return v.get<bool>();
}

std::string str_or(const Json& j, const char* key, const std::string& fallback) {
  if (!j.contains(key)) return fallback;
  const auto& v = j.at(key);
  if (!v.is_string()) throw std::invalid_argument(std::string("'") + key + "' must be a string");
  return v.get<std::string>();
}

void require(bool ok, const std::string& message) {
  if (!ok) throw std::invalid_argument("scenario: " + message);
}

}  // namespace

// ---------------------------------------------------------------------------
// Configuration JSON.

Json to_json(const RobotConfigd& config) {
  Json segments = Json::array();
  for (const auto& seg : config.segments) {
    segments.push_back(Json{{"kappa", seg.kappa}, {"phi", seg.phi}, {"length", seg.length}});
  }
  return Json{{"segments", segments}};
}

RobotConfigd config_from_json(const Json& j) {
  expect_keys(j, "config", {"segments"});
  if (!j.contains("segments") || !j.at("segments").is_array() || j.at("segments").empty()) {
    throw std::invalid_argument("config: 'segments' must be a non-empty array");
  }
  RobotConfigd config;
  for (const auto& seg_json : j.at("segments")) {
    expect_keys(seg_json, "segment", {"kappa", "phi", "length"});
    SegmentConfigd seg;
    seg.kappa = num_or(seg_json, "kappa", 0.0);
    seg.phi = num_or(seg_json, "phi", 0.0);
    seg.length = num_or(seg_json, "length", 0.0);
    if (!(seg.length > 0.0)) throw std::invalid_argument("segment: 'length' must be positive");
    config.segments.push_back(seg);
  }
  return config;
}

Json to_json(const PressureModel& model) {
  Json segments = Json::array();
  for (const auto& seg : model.segments) {
    segments.push_back(
        Json{{"k", Json::array({seg.k[0], seg.k[1], seg.k[2]})}, {"l0", seg.l0}});
  }
  return Json{{"pressure_model", segments}};
}

PressureModel pressure_model_from_json(const Json& j) {
  expect_keys(j, "pressure model", {"pressure_model"});
  if (!j.contains("pressure_model") || !j.at("pressure_model").is_array() ||
      j.at("pressure_model").empty()) {
    throw std::invalid_argument("pressure model: 'pressure_model' must be a non-empty array");
  }
  PressureModel model;
  for (const auto& seg_json : j.at("pressure_model")) {
    expect_keys(seg_json, "pressure segment", {"k", "l0"});
    if (!seg_json.contains("k") || !seg_json.at("k").is_array() ||
        seg_json.at("k").size() != 3) {
      throw std::invalid_argument("pressure segment: 'k' must be an array of 3 numbers");
    }
    PressureSegmentModel seg;
    for (int c = 0; c < 3; ++c) {
      const auto& v = seg_json.at("k").at(static_cast<std::size_t>(c));
      if (!v.is_number()) throw std::invalid_argument("pressure segment: 'k' entries must be numbers");
      seg.k[c] = v.get<double>();
    }
    seg.l0 = num_or(seg_json, "l0", 0.0);
    model.segments.push_back(seg);
  }
  return model;
}

Json to_json(const FrameResult& result, bool with_timings) {
  Json j;
  j["lost"] = result.lost;
  j["config"] = to_json(result.config);
  j["tip"] = Json::array({result.tip.x(), result.tip.y(), result.tip.z()});
  j["n_matched"] = result.n_matched;
  j["mean_score"] = result.mean_score;
  j["residual"] = result.residual;
  j["pair_count"] = result.pair_count;
  j["inlier_count"] = result.inlier_count;
  Json resolved = Json::array();
  for (const auto flag : result.resolved) resolved.push_back(static_cast<int>(flag));
  j["resolved"] = resolved;
  if (with_timings) {
    const auto& t = result.timings;
    j["timings"] = Json{{"visibility", t.visibility},   {"score", t.score},
                        {"assign", t.assign},           {"partition_fit", t.partition_fit},
                        {"backbone_fit", t.backbone_fit}, {"surface_update", t.surface_update},
                        {"feature_update", t.feature_update}, {"total", t.total}};
  }
  return j;
}

// ---------------------------------------------------------------------------
// Reference model file.

void save_model(const ReferenceModel& model, const std::filesystem::path& path) {
  const int n = model.n_points();
  if (model.descriptors.n_points() != n || static_cast<int>(model.partition.size()) != n ||
      static_cast<int>(model.sigma.size()) != n) {
    throw std::invalid_argument("save_model: inconsistent model field sizes");
  }
  if (static_cast<int>(model.partition_upper.size()) != model.n_partitions ||
      static_cast<int>(model.partition_base.size()) != model.n_partitions) {
    throw std::invalid_argument("save_model: inconsistent section tables");
  }

  auto os = open_out(path);
  os.write("AFTM", 4);
  put<std::uint32_t>(os, 1);
  put<std::uint64_t>(os, static_cast<std::uint64_t>(n));
  put<std::uint32_t>(os, static_cast<std::uint32_t>(model.n_partitions));
  put<std::uint32_t>(os, static_cast<std::uint32_t>(model.descriptors.n_scales()));
  for (const auto& scale : model.descriptors.scales) {
    put<std::uint32_t>(os, static_cast<std::uint32_t>(scale.rows()));
  }
  put_config(os, model.rest_config);
  put_config(os, model.current_config);
  put_block(os, model.partition_upper.data(), model.partition_upper.size());
  put_block(os, model.partition_base.data(), model.partition_base.size());

  for (int i = 0; i < n; ++i) {
    put_block(os, model.rest_positions.col(i).data(), 3);
    put(os, model.sigma[i]);
    put(os, model.partition[static_cast<std::size_t>(i)]);
    for (const auto& scale : model.descriptors.scales) {
      for (Eigen::Index r = 0; r < scale.rows(); ++r) {
        put(os, static_cast<float>(scale(r, i)));
      }
    }
  }
  os.flush();
  if (!os) throw FileError("write failed: " + path.string());
}

ReferenceModel load_model(const std::filesystem::path& path) {
  auto is = open_in(path);
  check_magic(is, "AFTM", "reference model");
  const auto version = take<std::uint32_t>(is, "version");
  if (version != 1) throw FileError("unsupported reference model version");

  const auto n64 = take<std::uint64_t>(is, "point count");
  if (n64 > 100000000ull) throw FileError("implausible point count");
  const int n = static_cast<int>(n64);
  const auto k = take<std::uint32_t>(is, "section count");
  if (k == 0 || k > 100000) throw FileError("implausible section count");
  const auto n_scales = take<std::uint32_t>(is, "scale count");
  if (n_scales > 64) throw FileError("implausible scale count");
  std::vector<int> dims(n_scales);
  for (auto& d : dims) {
    const auto dim = take<std::uint32_t>(is, "scale dims");
    if (dim == 0 || dim > 1000000) throw FileError("implausible descriptor dims");
    d = static_cast<int>(dim);
  }

  ReferenceModel model;
  model.rest_config = take_config(is, "rest configuration");
  model.current_config = take_config(is, "current configuration");
  model.n_partitions = static_cast<int>(k);
  model.partition_upper.resize(k);
  take_block(is, model.partition_upper.data(), k, "section bounds");
  model.partition_base.resize(k);
  take_block(is, model.partition_base.data(), k, "section bases");

  model.rest_positions.resize(3, n);
  model.sigma.resize(n);
  model.partition.resize(static_cast<std::size_t>(n));
  model.descriptors.scales.reserve(dims.size());
  for (const int d : dims) model.descriptors.scales.emplace_back(d, n);

  for (int i = 0; i < n; ++i) {
    take_block(is, model.rest_positions.col(i).data(), 3, "point position");
    model.sigma[i] = take<double>(is, "point sigma");
    model.partition[static_cast<std::size_t>(i)] = take<std::uint16_t>(is, "point partition");
    for (auto& scale : model.descriptors.scales) {
      for (Eigen::Index r = 0; r < scale.rows(); ++r) {
        scale(r, i) = static_cast<double>(take<float>(is, "point descriptor"));
      }
    }
  }

  const bool at_rest = [&] {
    if (model.current_config.segments.size() != model.rest_config.segments.size()) return false;
    for (std::size_t s = 0; s < model.rest_config.segments.size(); ++s) {
      const auto& a = model.rest_config.segments[s];
      const auto& b = model.current_config.segments[s];
      if (a.kappa != b.kappa || a.phi != b.phi || a.length != b.length) return false;
    }
    return true;
  }();
  if (at_rest) {
    model.current_positions = model.rest_positions;
  } else {
    model.current_positions.resize(3, n);
    for (int i = 0; i < n; ++i) {
      model.current_positions.col(i) =
          surface_point_position(model.current_config, model.rest_config,
                                 Eigen::Vector3d(model.rest_positions.col(i)), model.sigma[i]);
    }
  }
  return model;
}

// ---------------------------------------------------------------------------
// Frame sequence file.

void save_frames(const std::vector<sim::ObservedFrame>& frames,
                 const std::filesystem::path& path) {
  std::vector<int> dims;
  if (!frames.empty()) {
    for (const auto& scale : frames.front().descriptors.scales) {
      dims.push_back(static_cast<int>(scale.rows()));
    }
    for (const auto& frame : frames) {
      if (frame.descriptors.n_scales() != static_cast<int>(dims.size())) {
        throw std::invalid_argument("save_frames: frames disagree on descriptor scales");
      }
      for (std::size_t s = 0; s < dims.size(); ++s) {
        if (frame.descriptors.scales[s].rows() != dims[s]) {
          throw std::invalid_argument("save_frames: frames disagree on descriptor dims");
        }
      }
      if (static_cast<int>(frame.source_index.size()) != frame.positions.cols()) {
        throw std::invalid_argument("save_frames: source index size mismatch");
      }
    }
  }

  auto os = open_out(path);
  os.write("AFTF", 4);
  put<std::uint32_t>(os, 1);
  put<std::uint64_t>(os, frames.size());
  put<std::uint32_t>(os, static_cast<std::uint32_t>(dims.size()));
  for (const int d : dims) put<std::uint32_t>(os, static_cast<std::uint32_t>(d));

  for (const auto& frame : frames) {
    put(os, frame.time);
    put_config(os, frame.true_config);
    const auto n = static_cast<std::uint64_t>(frame.positions.cols());
    put(os, n);
    put_block(os, frame.positions.data(), 3 * n);
    for (const auto& scale : frame.descriptors.scales) {
      put_block(os, scale.data(), static_cast<std::size_t>(scale.size()));
    }
    for (const int src : frame.source_index) put<std::int32_t>(os, src);
  }
  os.flush();
  if (!os) throw FileError("write failed: " + path.string());
}

std::vector<sim::ObservedFrame> load_frames(const std::filesystem::path& path) {
  auto is = open_in(path);
  check_magic(is, "AFTF", "frame sequence");
  const auto version = take<std::uint32_t>(is, "version");
  if (version != 1) throw FileError("unsupported frame sequence version");
  const auto n_frames = take<std::uint64_t>(is, "frame count");
  if (n_frames > 10000000ull) throw FileError("implausible frame count");
  const auto n_scales = take<std::uint32_t>(is, "scale count");
  if (n_scales > 64) throw FileError("implausible scale count");
  std::vector<int> dims(n_scales);
  for (auto& d : dims) {
    const auto dim = take<std::uint32_t>(is, "scale dims");
    if (dim == 0 || dim > 1000000) throw FileError("implausible descriptor dims");
    d = static_cast<int>(dim);
  }

  std::vector<sim::ObservedFrame> frames;
  frames.reserve(n_frames);
  for (std::uint64_t f = 0; f < n_frames; ++f) {
    sim::ObservedFrame frame;
    frame.time = take<double>(is, "frame time");
    frame.true_config = take_config(is, "frame configuration");
    const auto n64 = take<std::uint64_t>(is, "frame point count");
    if (n64 > 100000000ull) throw FileError("implausible frame point count");
    const auto n = static_cast<Eigen::Index>(n64);
    frame.positions.resize(3, n);
    take_block(is, frame.positions.data(), static_cast<std::size_t>(3 * n), "frame positions");
    for (const int d : dims) {
      Eigen::MatrixXd scale(d, n);
      take_block(is, scale.data(), static_cast<std::size_t>(scale.size()), "frame descriptors");
      frame.descriptors.scales.push_back(std::move(scale));
    }
    frame.source_index.resize(static_cast<std::size_t>(n));
    for (auto& src : frame.source_index) src = take<std::int32_t>(is, "frame source index");
    frames.push_back(std::move(frame));
  }
  return frames;
}

// ---------------------------------------------------------------------------
// Matching exports.

void write_matches_header(std::ostream& os) { os << "frame_id,ref_index,obs_index,score\n"; }

void append_matches_csv(std::ostream& os, std::uint64_t frame_id,
                        const std::vector<MatchRecord>& records) {
  char buf[40];
  for (const auto& r : records) {
    std::snprintf(buf, sizeof buf, "%.17g", r.score);
    os << frame_id << ',' << r.ref_index << ',' << r.obs_index << ',' << buf << '\n';
  }
}

void write_score_matrix(std::ostream& os, const Eigen::MatrixXf& scores) {
  put<std::uint32_t>(os, static_cast<std::uint32_t>(scores.rows()));
  put<std::uint32_t>(os, static_cast<std::uint32_t>(scores.cols()));
  const Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> row_major = scores;
  os.write(reinterpret_cast<const char*>(row_major.data()),
           static_cast<std::streamsize>(sizeof(float) * row_major.size()));
}

Eigen::MatrixXf read_score_matrix(std::istream& is) {
  const auto rows = take<std::uint32_t>(is, "score matrix rows");
  const auto cols = take<std::uint32_t>(is, "score matrix cols");
  if (rows > 10000000u || cols > 10000000u ||
      static_cast<std::uint64_t>(rows) * cols > 1000000000ull) {
    throw FileError("implausible score matrix shape");
  }
  Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> row_major(rows, cols);
  is.read(reinterpret_cast<char*>(row_major.data()),
          static_cast<std::streamsize>(sizeof(float) * row_major.size()));
  if (!is) throw FileError("truncated score matrix");
  return row_major;
}

// ---------------------------------------------------------------------------
// Scenario.

namespace {

sim::SurfaceGeometry geometry_from_json(const Json& j, sim::SurfaceGeometry g) {
  expect_keys(j, "geometry", {"rings_per_meter", "points_per_ring", "radius", "tip_fraction"});
  g.rings_per_meter = num_or(j, "rings_per_meter", g.rings_per_meter);
  g.points_per_ring = int_or(j, "points_per_ring", g.points_per_ring);
  g.radius = num_or(j, "radius", g.radius);
  g.tip_fraction = num_or(j, "tip_fraction", g.tip_fraction);
  require(g.rings_per_meter > 0.0, "geometry rings_per_meter must be positive");
  require(g.points_per_ring >= 3, "geometry points_per_ring must be at least 3");
  require(g.radius > 0.0, "geometry radius must be positive");
  require(g.tip_fraction >= 0.0 && g.tip_fraction <= 1.0, "geometry tip_fraction must be in [0, 1]");
  return g;
}

BuildOptions build_from_json(const Json& j, BuildOptions b) {
  expect_keys(j, "build", {"target_point_count", "n_partitions", "sigma_samples", "sampling_seed"});
  b.target_point_count = int_or(j, "target_point_count", b.target_point_count);
  b.n_partitions = int_or(j, "n_partitions", b.n_partitions);
  b.sigma_samples = int_or(j, "sigma_samples", b.sigma_samples);
  b.sampling_seed = u64_or(j, "sampling_seed", b.sampling_seed);
  require(b.target_point_count >= 0, "build target_point_count must be non-negative");
  require(b.n_partitions >= 2, "build n_partitions must be at least 2");
  require(b.sigma_samples >= 2, "build sigma_samples must be at least 2");
  return b;
}

sim::NoiseParams noise_from_json(const Json& j, sim::NoiseParams n, const char* context) {
  expect_keys(j, context, {"depth_sigma", "descriptor_sigma", "dropout", "seed"});
  n.depth_sigma = num_or(j, "depth_sigma", n.depth_sigma);
  n.descriptor_sigma = num_or(j, "descriptor_sigma", n.descriptor_sigma);
  n.dropout = num_or(j, "dropout", n.dropout);
  n.seed = u64_or(j, "seed", n.seed);
  require(n.depth_sigma >= 0.0 && n.descriptor_sigma >= 0.0, "noise sigmas must be non-negative");
  require(n.dropout >= 0.0 && n.dropout < 1.0, "noise dropout must be in [0, 1)");
  return n;
}

sim::PlantParams plant_from_json(const Json& j, sim::PlantParams p) {
  expect_keys(j, "plant", {"kappa_gain", "length_gain", "time_constant", "max_pressure"});
  p.kappa_gain = num_or(j, "kappa_gain", p.kappa_gain);
  p.length_gain = num_or(j, "length_gain", p.length_gain);
  p.time_constant = num_or(j, "time_constant", p.time_constant);
  p.max_pressure = num_or(j, "max_pressure", p.max_pressure);
  require(p.time_constant > 0.0, "plant time_constant must be positive");
  require(p.max_pressure > 0.0, "plant max_pressure must be positive");
  return p;
}

sim::OcclusionBar occlusion_from_json(const Json& j, sim::OcclusionBar o) {
  expect_keys(j, "occlusion", {"position", "width", "height_fraction"});
  o.position = num_or(j, "position", o.position);
  o.width = num_or(j, "width", o.width);
  o.height_fraction = num_or(j, "height_fraction", o.height_fraction);
  require(o.position >= 0.0 && o.position <= 1.0, "occlusion position must be in [0, 1]");
  require(o.width >= 0.0 && o.width <= 1.0, "occlusion width must be in [0, 1]");
  require(o.height_fraction > 0.0 && o.height_fraction <= 1.0,
          "occlusion height_fraction must be in (0, 1]");
  return o;
}

sim::TrajectoryParams trajectory_from_json(const Json& j, sim::TrajectoryParams t) {
  expect_keys(j, "trajectory", {"kind", "target", "n_frames", "dt", "seed", "zero_chance"});
  const std::string kind = str_or(j, "kind", "");
  if (!kind.empty()) {
    if (kind == "step") {
      t.kind = sim::TrajectoryKind::step;
    } else if (kind == "ramp") {
      t.kind = sim::TrajectoryKind::ramp;
    } else if (kind == "random_pressures") {
      t.kind = sim::TrajectoryKind::random_pressures;
    } else {
      throw std::invalid_argument("trajectory: unknown kind '" + kind + "'");
    }
  }
  if (j.contains("target")) t.target = config_from_json(j.at("target"));
  t.n_frames = int_or(j, "n_frames", t.n_frames);
  t.dt = num_or(j, "dt", t.dt);
  t.seed = u64_or(j, "seed", t.seed);
  t.zero_chance = num_or(j, "zero_chance", t.zero_chance);
  require(t.n_frames >= 1, "trajectory n_frames must be at least 1");
  require(t.dt > 0.0, "trajectory dt must be positive");
  require(t.zero_chance >= 0.0 && t.zero_chance <= 1.0,
          "trajectory zero_chance must be in [0, 1]");
  return t;
}

TrackerParams tracker_from_json(const Json& j, TrackerParams t) {
  expect_keys(j, "tracker",
              {"score_floor", "distance_sigma", "alpha", "renormalize_features",
               "min_pairs_per_partition", "trim_ratio", "use_descriptors", "update_features",
               "hierarchical", "direct_outer_iterations", "direct_inner_iterations"});
  t.score_floor = num_or(j, "score_floor", t.score_floor);
  t.distance_sigma = num_or(j, "distance_sigma", t.distance_sigma);
  t.alpha = num_or(j, "alpha", t.alpha);
  t.renormalize_features = bool_or(j, "renormalize_features", t.renormalize_features);
  t.min_pairs_per_partition = int_or(j, "min_pairs_per_partition", t.min_pairs_per_partition);
  t.trim_ratio = num_or(j, "trim_ratio", t.trim_ratio);
  t.use_descriptors = bool_or(j, "use_descriptors", t.use_descriptors);
  t.update_features = bool_or(j, "update_features", t.update_features);
  t.hierarchical = bool_or(j, "hierarchical", t.hierarchical);
  t.direct_outer_iterations = int_or(j, "direct_outer_iterations", t.direct_outer_iterations);
  t.direct_inner_iterations = int_or(j, "direct_inner_iterations", t.direct_inner_iterations);
  require(t.score_floor >= 0.0, "tracker score_floor must be non-negative");
  require(t.distance_sigma > 0.0, "tracker distance_sigma must be positive");
  require(t.alpha >= 0.0, "tracker alpha must be non-negative");
  require(t.direct_outer_iterations >= 1 && t.direct_inner_iterations >= 1,
          "tracker baseline iteration counts must be at least 1");
  return t;
}

ControllerGains gains_from_json(const Json& j, ControllerGains g) {
  expect_keys(j, "gains",
              {"kp", "ki", "direction_gain", "max_command", "pressure_slew", "min_bend"});
  g.kp = num_or(j, "kp", g.kp);
  g.ki = num_or(j, "ki", g.ki);
  g.direction_gain = num_or(j, "direction_gain", g.direction_gain);
  g.max_command = num_or(j, "max_command", g.max_command);
  g.pressure_slew = num_or(j, "pressure_slew", g.pressure_slew);
  g.min_bend = num_or(j, "min_bend", g.min_bend);
  require(g.kp >= 0.0 && g.ki >= 0.0, "gains kp and ki must be non-negative");
  require(g.max_command > 0.0, "gains max_command must be positive");
  return g;
}

ControlTarget target_from_json(const Json& j, ControlTarget fallback) {
  expect_keys(j, "control target", {"kind", "shape", "tip"});
  const std::string kind = str_or(j, "kind", "");
  if (kind.empty()) return fallback;
  if (kind == "shape") {
    if (!j.contains("shape") || !j.at("shape").is_array() || j.at("shape").empty()) {
      throw std::invalid_argument("control target: 'shape' must be a non-empty array");
    }
    std::vector<ShapeTarget> shape;
    for (const auto& seg : j.at("shape")) {
      expect_keys(seg, "shape target", {"kappa", "phi"});
      shape.push_back({num_or(seg, "kappa", 0.0), num_or(seg, "phi", 0.0)});
    }
    return ControlTarget::for_shape(std::move(shape));
  }
  if (kind == "tip") {
    if (!j.contains("tip") || !j.at("tip").is_array() || j.at("tip").size() != 3) {
      throw std::invalid_argument("control target: 'tip' must be an array of 3 numbers");
    }
    Eigen::Vector3d tip;
    for (int c = 0; c < 3; ++c) {
      const auto& v = j.at("tip").at(static_cast<std::size_t>(c));
      if (!v.is_number()) throw std::invalid_argument("control target: 'tip' entries must be numbers");
      tip[c] = v.get<double>();
    }
    return ControlTarget::for_tip(tip);
  }
  throw std::invalid_argument("control target: unknown kind '" + kind + "'");
}

ControlScenario control_from_json(const Json& j, ControlScenario c) {
  expect_keys(j, "control", {"target", "gains", "steps", "dt"});
  if (j.contains("target")) c.target = target_from_json(j.at("target"), c.target);
  if (j.contains("gains")) c.gains = gains_from_json(j.at("gains"), c.gains);
  c.steps = int_or(j, "steps", c.steps);
  c.dt = num_or(j, "dt", c.dt);
  require(c.steps >= 1, "control steps must be at least 1");
  require(c.dt > 0.0, "control dt must be positive");
  return c;
}

std::vector<double> grid_from_json(const Json& j, const char* key, std::vector<double> fallback) {
  if (!j.contains(key)) return fallback;
  const auto& v = j.at(key);
  if (!v.is_array() || v.empty()) {
    throw std::invalid_argument(std::string("'") + key + "' must be a non-empty array");
  }
  std::vector<double> grid;
  for (const auto& e : v) {
    if (!e.is_number()) {
      throw std::invalid_argument(std::string("'") + key + "' entries must be numbers");
    }
    grid.push_back(e.get<double>());
    require(grid.back() >= 0.0 && grid.back() <= 1.0,
            std::string(key) + " entries must be in [0, 1]");
  }
  return grid;
}

}  // namespace

Scenario scenario_from_json(const Json& j) {
  expect_keys(j, "scenario",
              {"rest", "geometry", "descriptor_dims", "surface_seed", "build", "reference_noise",
               "plant", "viewpoint", "viewpoints", "noise", "occlusion", "occlusion_positions",
               "occlusion_widths", "sweep_seeds", "trajectory", "sequences", "tracker", "model",
               "frames", "control", "seed"});

  Scenario s;
  if (j.contains("rest")) s.rest = config_from_json(j.at("rest"));
  s.trajectory.target = s.rest;

  if (j.contains("geometry")) s.geometry = geometry_from_json(j.at("geometry"), s.geometry);
  if (j.contains("descriptor_dims")) {
    const auto& dims = j.at("descriptor_dims");
    if (!dims.is_array() || dims.empty()) {
      throw std::invalid_argument("scenario: 'descriptor_dims' must be a non-empty array");
    }
    s.descriptor_dims.clear();
    for (const auto& d : dims) {
      if (!d.is_number_integer() || d.get<int>() < 1 || d.get<int>() > 4096) {
        throw std::invalid_argument("scenario: descriptor dims must be integers in [1, 4096]");
      }
      s.descriptor_dims.push_back(d.get<int>());
    }
  }
  s.surface_seed = u64_or(j, "surface_seed", s.surface_seed);
  if (j.contains("build")) s.build = build_from_json(j.at("build"), s.build);
  require(s.build.n_partitions >= 2, "build n_partitions must be at least 2");
  if (j.contains("reference_noise")) {
    s.reference_noise = noise_from_json(j.at("reference_noise"), s.reference_noise,
                                        "reference_noise");
  }
  if (j.contains("plant")) s.plant = plant_from_json(j.at("plant"), s.plant);

  s.viewpoint = str_or(j, "viewpoint", s.viewpoint);
  if (j.contains("viewpoints")) {
    const auto& v = j.at("viewpoints");
    if (!v.is_array() || v.empty()) {
      throw std::invalid_argument("scenario: 'viewpoints' must be a non-empty array");
    }
    s.viewpoints.clear();
    for (const auto& name : v) {
      if (!name.is_string()) {
        throw std::invalid_argument("scenario: 'viewpoints' entries must be strings");
      }
      s.viewpoints.push_back(name.get<std::string>());
    }
  }
  if (s.viewpoints.empty()) {
    for (const auto& vp : sim::standard_viewpoints()) s.viewpoints.push_back(vp.name);
  }
  const auto known_viewpoint = [](const std::string& name) {
    const auto& all = sim::standard_viewpoints();
    return std::any_of(all.begin(), all.end(),
                       [&](const sim::Viewpoint& vp) { return vp.name == name; });
  };
  require(known_viewpoint(s.viewpoint), "unknown viewpoint '" + s.viewpoint + "'");
  for (const auto& name : s.viewpoints) {
    require(known_viewpoint(name), "unknown viewpoint '" + name + "'");
  }

  if (j.contains("noise")) s.noise = noise_from_json(j.at("noise"), s.noise, "noise");
  if (j.contains("occlusion")) s.occlusion = occlusion_from_json(j.at("occlusion"), s.occlusion);
  s.occlusion_positions = grid_from_json(j, "occlusion_positions", s.occlusion_positions);
  s.occlusion_widths = grid_from_json(j, "occlusion_widths", s.occlusion_widths);
  s.sweep_seeds = int_or(j, "sweep_seeds", s.sweep_seeds);
  require(s.sweep_seeds >= 1, "sweep_seeds must be at least 1");

  if (j.contains("trajectory")) s.trajectory = trajectory_from_json(j.at("trajectory"), s.trajectory);
  require(s.trajectory.target.segments.size() == s.rest.segments.size(),
          "trajectory target segment count must match the rest configuration");
  s.sequences = int_or(j, "sequences", s.sequences);
  require(s.sequences >= 1, "sequences must be at least 1");
  if (j.contains("tracker")) s.tracker = tracker_from_json(j.at("tracker"), s.tracker);

  s.model_path = str_or(j, "model", s.model_path);
  s.frames_path = str_or(j, "frames", s.frames_path);
  if (j.contains("control")) s.control = control_from_json(j.at("control"), s.control);
  if (s.control.target.kind == ControlTarget::Kind::shape) {
    require(s.control.target.shape.size() == s.rest.segments.size(),
            "control target segment count must match the rest configuration");
  }
  s.seed = u64_or(j, "seed", s.seed);
  return s;
}

Json to_json(const Scenario& s) {
  Json j;
  j["rest"] = to_json(s.rest);
  j["geometry"] = Json{{"rings_per_meter", s.geometry.rings_per_meter},
                       {"points_per_ring", s.geometry.points_per_ring},
                       {"radius", s.geometry.radius},
                       {"tip_fraction", s.geometry.tip_fraction}};
  j["descriptor_dims"] = s.descriptor_dims;
  j["surface_seed"] = s.surface_seed;
  j["build"] = Json{{"target_point_count", s.build.target_point_count},
                    {"n_partitions", s.build.n_partitions},
                    {"sigma_samples", s.build.sigma_samples},
                    {"sampling_seed", s.build.sampling_seed}};
  const auto noise_json = [](const sim::NoiseParams& n) {
    return Json{{"depth_sigma", n.depth_sigma},
                {"descriptor_sigma", n.descriptor_sigma},
                {"dropout", n.dropout},
                {"seed", n.seed}};
  };
  j["reference_noise"] = noise_json(s.reference_noise);
  j["plant"] = Json{{"kappa_gain", s.plant.kappa_gain},
                    {"length_gain", s.plant.length_gain},
                    {"time_constant", s.plant.time_constant},
                    {"max_pressure", s.plant.max_pressure}};
  j["viewpoint"] = s.viewpoint;
  j["viewpoints"] = s.viewpoints;
  j["noise"] = noise_json(s.noise);
  j["occlusion"] = Json{{"position", s.occlusion.position},
                        {"width", s.occlusion.width},
                        {"height_fraction", s.occlusion.height_fraction}};
  j["occlusion_positions"] = s.occlusion_positions;
  j["occlusion_widths"] = s.occlusion_widths;
  j["sweep_seeds"] = s.sweep_seeds;
  const char* kind = "random_pressures";
  if (s.trajectory.kind == sim::TrajectoryKind::step) kind = "step";
  if (s.trajectory.kind == sim::TrajectoryKind::ramp) kind = "ramp";
  j["trajectory"] = Json{{"kind", kind},
                         {"target", to_json(s.trajectory.target)},
                         {"n_frames", s.trajectory.n_frames},
                         {"dt", s.trajectory.dt},
                         {"seed", s.trajectory.seed},
                         {"zero_chance", s.trajectory.zero_chance}};
  j["sequences"] = s.sequences;
  j["tracker"] = Json{{"score_floor", s.tracker.score_floor},
                      {"distance_sigma", s.tracker.distance_sigma},
                      {"alpha", s.tracker.alpha},
                      {"renormalize_features", s.tracker.renormalize_features},
                      {"min_pairs_per_partition", s.tracker.min_pairs_per_partition},
                      {"trim_ratio", s.tracker.trim_ratio},
                      {"use_descriptors", s.tracker.use_descriptors},
                      {"update_features", s.tracker.update_features},
                      {"hierarchical", s.tracker.hierarchical},
                      {"direct_outer_iterations", s.tracker.direct_outer_iterations},
                      {"direct_inner_iterations", s.tracker.direct_inner_iterations}};
  j["model"] = s.model_path;
  j["frames"] = s.frames_path;
  Json target;
  if (s.control.target.kind == ControlTarget::Kind::shape) {
    target["kind"] = "shape";
    Json shape = Json::array();
    for (const auto& seg : s.control.target.shape) {
      shape.push_back(Json{{"kappa", seg.kappa}, {"phi", seg.phi}});
    }
    target["shape"] = shape;
  } else {
    target["kind"] = "tip";
    target["tip"] =
        Json::array({s.control.target.tip.x(), s.control.target.tip.y(), s.control.target.tip.z()});
  }
  j["control"] = Json{{"target", target},
                      {"gains", Json{{"kp", s.control.gains.kp},
                                     {"ki", s.control.gains.ki},
                                     {"direction_gain", s.control.gains.direction_gain},
                                     {"max_command", s.control.gains.max_command},
                                     {"pressure_slew", s.control.gains.pressure_slew},
                                     {"min_bend", s.control.gains.min_bend}}},
                      {"steps", s.control.steps},
                      {"dt", s.control.dt}};
  j["seed"] = s.seed;
  return j;
}

Scenario load_scenario(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw FileError("cannot open scenario: " + path.string());
  std::ostringstream buffer;
  buffer << is.rdbuf();
  Json j;
  try {
    j = Json::parse(buffer.str());
  } catch (const nlohmann::json::parse_error& e) {
    throw FileError("malformed scenario " + path.string() + ": " + e.what());
  }
  return scenario_from_json(j);
}

}  // namespace aft::io
