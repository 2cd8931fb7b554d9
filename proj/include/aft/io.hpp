#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "json.hpp"

#include "aft/control.hpp"
#include "aft/kinematics.hpp"
#include "aft/reconstruct.hpp"
#include "aft/refmodel.hpp"
#include "aft/sim.hpp"
#include "aft/types.hpp"

namespace aft::io {

/// Insertion-ordered JSON so emitted documents read in declaration order.
using Json = nlohmann::ordered_json;

// ---------------------------------------------------------------------------
// JSON round trips.

Json to_json(const RobotConfigd& config);
RobotConfigd config_from_json(const Json& j);

Json to_json(const PressureModel& model);
PressureModel pressure_model_from_json(const Json& j);

/// Per-frame tracking record; stage timings are included only on request
/// since they vary run to run.
Json to_json(const FrameResult& result, bool with_timings = false);

// ---------------------------------------------------------------------------
// Reference model file.
//
// Little-endian binary, magic "AFTM", version 1:
//   u64 point count, u32 sections, u32 scale count, u32 dims per scale,
//   rest and current configurations (u32 segment count, then kappa/phi/
//   length as f64 per segment), section upper bounds and base coordinates
//   (f64 each), then per point: rest position (3 f64), sigma (f64),
//   partition (u16), descriptors per scale (f32 each).
// float64 fields round-trip bit-exactly; descriptors are stored in single
// precision.  Posed point positions are recomputed from the current
// configuration on load.

void save_model(const ReferenceModel& model, const std::filesystem::path& path);
ReferenceModel load_model(const std::filesystem::path& path);

// ---------------------------------------------------------------------------
// Observed frame sequences.
//
// Little-endian binary, magic "AFTF", version 1: u64 frame count, u32 scale
// count, u32 dims per scale, then per frame: f64 time, true configuration
// (u32 segment count + f64 triples), u64 point count, positions (3 f64
// each), descriptors per scale (f64 each, column-major), source indices
// (i32 each).  Everything round-trips bit-exactly, so a replayed sequence
// reproduces live tracking results.

void save_frames(const std::vector<sim::ObservedFrame>& frames,
                 const std::filesystem::path& path);
std::vector<sim::ObservedFrame> load_frames(const std::filesystem::path& path);

// ---------------------------------------------------------------------------
// Matching exports.

/// Header line "frame_id,ref_index,obs_index,score".
void write_matches_header(std::ostream& os);
void append_matches_csv(std::ostream& os, std::uint64_t frame_id,
                        const std::vector<MatchRecord>& records);

/// Shape header (u32 rows, u32 cols) followed by row-major float32 entries.
void write_score_matrix(std::ostream& os, const Eigen::MatrixXf& scores);
Eigen::MatrixXf read_score_matrix(std::istream& is);

// ---------------------------------------------------------------------------
// Scenario: one document that fixes every input of an experiment run.

struct ControlScenario {
  ControlTarget target = ControlTarget::for_shape({{2.2, -0.9}, {1.6, 2.1}});
  ControllerGains gains;
  int steps{50};
  double dt{1.0};
};

struct Scenario {
  RobotConfigd rest = RobotConfigd::straight(0.2, 2);
  sim::SurfaceGeometry geometry;
  std::vector<int> descriptor_dims{16, 64, 256};
  std::uint64_t surface_seed{42};
  BuildOptions build;
  sim::NoiseParams reference_noise{0.0, 0.0, 0.0, 0};  // reference captured clean
  sim::PlantParams plant;

  std::string viewpoint{"front"};
  std::vector<std::string> viewpoints;  // sweep list; defaults to all standard
  sim::NoiseParams noise;
  sim::OcclusionBar occlusion;
  std::vector<double> occlusion_positions{0.25, 0.40, 0.50};
  std::vector<double> occlusion_widths{0.0, 0.08, 0.16, 0.24};
  int sweep_seeds{20};

  sim::TrajectoryParams trajectory;
  int sequences{1};
  TrackerParams tracker;

  std::string model_path;   // load the reference model instead of building it
  std::string frames_path;  // track: export rendered frames; replay: input

  ControlScenario control;
  std::uint64_t seed{0};
};

/// Parses a scenario with every field optional; unknown keys and invalid
/// values raise std::invalid_argument with the offending key.
Scenario scenario_from_json(const Json& j);

/// Fully resolved echo of a scenario, embedded in every command output.
Json to_json(const Scenario& scenario);

/// Reads and parses a scenario file; missing file or malformed JSON raises
/// FileError.
Scenario load_scenario(const std::filesystem::path& path);

}  // namespace aft::io
