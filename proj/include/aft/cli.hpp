#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace aft::cli {

/// Flags shared by every verb.  Commands are plain functions so tests can
/// drive them in-process; each one resolves the scenario, runs, writes its
/// result files under `out_dir`, and returns an exit code.
struct CommonArgs {
  std::string scenario_path;            // empty runs the built-in defaults
  std::filesystem::path out_dir{"."};
  std::uint64_t seed{0};
  bool seed_set{false};                 // --seed given; mixes per-run streams
  bool strict{false};                   // tracking loss fails the run
  std::vector<std::string> ablate;      // multiscale, feature-update, hierarchical
  int jobs{1};                          // accepted for sweep batching; results
                                        // are identical for any value
  bool timings{false};                  // include wall-clock fields in outputs
};

inline constexpr int exit_ok = 0;
inline constexpr int exit_config_error = 1;  // bad scenario, flags, or input files
inline constexpr int exit_runtime_error = 2;
inline constexpr int exit_tracking_loss = 3; // --strict and the tracker lost the body

/// Builds the reference model from a clean multi-view capture and writes it
/// next to a JSON report.  The model goes to the scenario's model path, or
/// model.aftm under out_dir when unset.
int cmd_build_reference(const CommonArgs& args);

/// Tracks simulated sequences and writes track.jsonl: scenario echo, one
/// record per frame, then a summary with mean and std of the relative tip
/// and shape errors.  A scenario frames path additionally captures the
/// rendered observations for replay.
int cmd_track(const CommonArgs& args);

/// Grid of occlusion bar position x width, each cell averaged over
/// sweep_seeds tracked sequences; writes sweep_occlusion.csv.
int cmd_sweep_occlusion(const CommonArgs& args);

/// Tracks the same motion from every scenario viewpoint and writes
/// sweep_viewpoint.csv with per-viewpoint error rows plus an overall row.
int cmd_sweep_viewpoint(const CommonArgs& args);

/// Re-runs the tracking scenario with each pipeline stage disabled in turn
/// and writes ablate.csv; rows echo the flag states they ran with.
int cmd_ablate(const CommonArgs& args);

/// Runs the closed pressure-control loop against the simulated plant and
/// writes control.jsonl with per-step records and steady-state errors.
int cmd_control(const CommonArgs& args);

/// Re-tracks a recorded frame file (scenario frames path) and writes
/// replay.jsonl; with the same scenario it reproduces track.jsonl byte for
/// byte.
int cmd_replay(const CommonArgs& args);

/// Dispatch by verb name (build-reference, track, sweep-occlusion,
/// sweep-viewpoint, ablate, control, replay); unknown verbs return
/// exit_config_error.
int run_command(const std::string& verb, const CommonArgs& args);

}  // namespace aft::cli
