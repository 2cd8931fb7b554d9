#include "aft/cli.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "aft/camera.hpp"
#include "aft/control.hpp"
#include "aft/errors.hpp"
#include "aft/io.hpp"
#include "aft/reconstruct.hpp"
#include "aft/refmodel.hpp"
#include "aft/sim.hpp"

namespace aft::cli {

namespace {

std::uint64_t mix_seed(std::uint64_t base, std::uint64_t salt) {
  std::uint64_t z = base + 0x9e3779b97f4a7c15ull * (salt + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

io::Scenario resolve_scenario(const CommonArgs& args) {
  io::Scenario s = args.scenario_path.empty()
                       ? io::scenario_from_json(io::Json::object())
                       : io::load_scenario(args.scenario_path);
  if (args.seed_set) {
    s.seed = args.seed;
    // Per-run streams move with the seed; the surface and sampling seeds
    // stay put so every run tracks the same robot.
    s.noise.seed = mix_seed(s.noise.seed, args.seed);
    s.trajectory.seed = mix_seed(s.trajectory.seed, args.seed);
  }
  for (const auto& flag : args.ablate) {
    if (flag == "multiscale") {
      s.tracker.use_descriptors = false;
    } else if (flag == "feature-update") {
      s.tracker.update_features = false;
    } else if (flag == "hierarchical") {
      s.tracker.hierarchical = false;
    } else {
      throw std::invalid_argument("unknown ablation flag '" + flag + "'");
    }
  }
  if (args.jobs < 1) throw std::invalid_argument("jobs must be at least 1");
  return s;
}

struct Bench {
  sim::SyntheticSurface surface;
  ReferenceModel model;
};

ReferenceModel build_model(const sim::SyntheticSurface& surface, const io::Scenario& s) {
  std::vector<PinholeCamera> cameras;
  cameras.reserve(s.viewpoints.size());
  for (const auto& name : s.viewpoints) cameras.push_back(sim::viewpoint_camera(name));
  return build_reference_model(sim::capture_reference(surface, cameras, s.reference_noise),
                               s.build);
}

/// Surface plus reference model, loaded from the scenario's model path when
/// one is given and built from the clean multi-view capture otherwise.
Bench make_bench(const io::Scenario& s) {
  Bench bench;
  bench.surface = sim::generate_surface(s.rest, s.geometry, s.descriptor_dims, s.surface_seed);
  if (s.model_path.empty()) {
    bench.model = build_model(bench.surface, s);
  } else {
    bench.model = io::load_model(s.model_path);
    const auto& dims = bench.model.descriptors;
    bool match = dims.n_scales() == static_cast<int>(s.descriptor_dims.size());
    for (int c = 0; match && c < dims.n_scales(); ++c) {
      match = dims.scales[static_cast<std::size_t>(c)].rows() == s.descriptor_dims[static_cast<std::size_t>(c)];
    }
    if (!match) {
      throw std::invalid_argument("model file descriptor scales disagree with the scenario");
    }
  }
  return bench;
}

void write_text(const std::filesystem::path& path, const std::string& content) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw FileError("cannot open for writing: " + path.string());
  os << content;
  os.flush();
  if (!os) throw FileError("write failed: " + path.string());
}

std::string join_lines(const std::vector<std::string>& lines) {
  std::string out;
  for (const auto& line : lines) {
    out += line;
    out += '\n';
  }
  return out;
}

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string pct(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f%%", 100.0 * v);
  return buf;
}

struct Stats {
  double mean{0.0};
  double stddev{0.0};
  int n{0};
};

Stats stats(const std::vector<double>& xs) {
  Stats s;
  s.n = static_cast<int>(xs.size());
  if (s.n == 0) return s;
  for (const double x : xs) s.mean += x;
  s.mean /= s.n;
  for (const double x : xs) s.stddev += (x - s.mean) * (x - s.mean);
  s.stddev = std::sqrt(s.stddev / s.n);
  return s;
}

io::Json frame_line(int sequence, int frame, double time, const RobotConfigd& truth,
                    const FrameResult& result, const TrackingMetrics& metrics, bool timings) {
  io::Json j;
  j["sequence"] = sequence;
  j["frame"] = frame;
  j["time"] = time;
  j["truth"] = io::to_json(truth);
  j["result"] = io::to_json(result, timings);
  j["tip_error"] = metrics.tip_error;
  j["shape_error"] = metrics.shape_error;
  return j;
}

/// Collected over one or more tracked sequences; lost frames keep their
/// records but stay out of the error statistics.
struct RunTally {
  std::vector<double> tip_errors;
  std::vector<double> shape_errors;
  std::vector<double> frame_seconds;
  int frames{0};
  int lost{0};
};

void track_sequence(ReferenceModel model, const sim::SyntheticSurface& surface,
                    const PinholeCamera& camera, const std::vector<RobotConfigd>& configs,
                    const sim::NoiseParams& noise, const sim::OcclusionBar& occlusion,
                    const TrackerParams& tracker, double dt, RunTally& tally,
                    std::vector<std::string>* lines, int sequence, bool timings,
                    std::vector<sim::ObservedFrame>* recorded) {
  for (std::size_t i = 0; i < configs.size(); ++i) {
    const double time = static_cast<double>(i) * dt;
    auto frame = sim::render_frame(surface, configs[i], camera, noise, occlusion, i, time);
    const Observation obs{frame.positions, frame.descriptors, dt};
    const FrameResult result = process_frame(model, obs, camera, tracker);
    const TrackingMetrics metrics = compute_metrics(result.config, configs[i]);
    ++tally.frames;
    if (result.lost) {
      ++tally.lost;
    } else {
      tally.tip_errors.push_back(metrics.tip_error);
      tally.shape_errors.push_back(metrics.shape_error);
    }
    tally.frame_seconds.push_back(result.timings.total);
    if (lines) {
      lines->push_back(
          frame_line(sequence, static_cast<int>(i), time, configs[i], result, metrics, timings)
              .dump());
    }
    if (recorded) recorded->push_back(std::move(frame));
  }
}

io::Json tracking_summary(const RunTally& tally, int sequences, bool timings) {
  const Stats tip = stats(tally.tip_errors);
  const Stats shape = stats(tally.shape_errors);
  io::Json j;
  j["frames"] = tally.frames;
  j["sequences"] = sequences;
  j["lost_frames"] = tally.lost;
  j["tip_error_mean"] = tip.mean;
  j["tip_error_std"] = tip.stddev;
  j["shape_error_mean"] = shape.mean;
  j["shape_error_std"] = shape.stddev;
  if (timings) {
    const Stats runtime = stats(tally.frame_seconds);
    j["frame_seconds_mean"] = runtime.mean;
    j["frame_seconds_std"] = runtime.stddev;
  }
  return io::Json{{"summary", j}};
}

void report_tracking(const char* verb, const RunTally& tally) {
  const Stats tip = stats(tally.tip_errors);
  const Stats shape = stats(tally.shape_errors);
  const Stats runtime = stats(tally.frame_seconds);
  std::cout << verb << ": " << tally.frames << " frames (" << tally.lost << " lost), tip "
            << pct(tip.mean) << " +- " << pct(tip.stddev) << ", shape " << pct(shape.mean)
            << " +- " << pct(shape.stddev) << ", " << 1e3 * runtime.mean << " ms/frame\n";
}

template <typename Fn>
int guarded(Fn&& body) {
  try {
    return body();
  } catch (const FileError& e) {
    std::cerr << "file error: " << e.what() << '\n';
    return exit_config_error;
  } catch (const std::invalid_argument& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return exit_config_error;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return exit_runtime_error;
  }
}

}  // namespace

int cmd_build_reference(const CommonArgs& args) {
  return guarded([&] {
    const io::Scenario s = resolve_scenario(args);
    std::filesystem::create_directories(args.out_dir);
    const auto surface =
        sim::generate_surface(s.rest, s.geometry, s.descriptor_dims, s.surface_seed);
    const ReferenceModel model = build_model(surface, s);
    const std::filesystem::path model_path =
        s.model_path.empty() ? args.out_dir / "model.aftm" : std::filesystem::path(s.model_path);
    io::save_model(model, model_path);

    io::Json report;
    report["scenario"] = io::to_json(s);
    report["model"] = model_path.string();
    report["points"] = model.n_points();
    report["sections"] = model.n_partitions;
    write_text(args.out_dir / "build_reference.json", report.dump(2) + "\n");
    std::cout << "reference model: " << model.n_points() << " points, " << model.n_partitions
              << " sections -> " << model_path.string() << '\n';
    return exit_ok;
  });
}

int cmd_track(const CommonArgs& args) {
  return guarded([&] {
    const io::Scenario s = resolve_scenario(args);
    if (!s.frames_path.empty() && s.sequences != 1) {
      throw std::invalid_argument("frame export needs a single sequence");
    }
    std::filesystem::create_directories(args.out_dir);
    const Bench bench = make_bench(s);
    const PinholeCamera camera = sim::viewpoint_camera(s.viewpoint);

    std::vector<std::string> lines;
    lines.push_back(io::Json{{"scenario", io::to_json(s)}}.dump());
    RunTally tally;
    std::vector<sim::ObservedFrame> recorded;
    for (int q = 0; q < s.sequences; ++q) {
      sim::TrajectoryParams traj = s.trajectory;
      sim::NoiseParams noise = s.noise;
      if (s.sequences > 1) {
        traj.seed = mix_seed(traj.seed, static_cast<std::uint64_t>(q) + 1);
        noise.seed = mix_seed(noise.seed, static_cast<std::uint64_t>(q) + 1);
      }
      const auto configs = sim::make_trajectory(s.rest, traj, s.plant);
      track_sequence(bench.model, bench.surface, camera, configs, noise, s.occlusion, s.tracker,
                     traj.dt, tally, &lines, q, args.timings,
                     s.frames_path.empty() ? nullptr : &recorded);
    }
    lines.push_back(tracking_summary(tally, s.sequences, args.timings).dump());
    write_text(args.out_dir / "track.jsonl", join_lines(lines));
    if (!s.frames_path.empty()) io::save_frames(recorded, s.frames_path);
    report_tracking("track", tally);
    if (args.strict && tally.lost > 0) return exit_tracking_loss;
    return exit_ok;
  });
}

int cmd_replay(const CommonArgs& args) {
  return guarded([&] {
    const io::Scenario s = resolve_scenario(args);
    if (s.frames_path.empty()) {
      throw std::invalid_argument("replay needs a frames path in the scenario");
    }
    std::filesystem::create_directories(args.out_dir);
    const auto frames = io::load_frames(s.frames_path);
    const Bench bench = make_bench(s);
    const PinholeCamera camera = sim::viewpoint_camera(s.viewpoint);

    std::vector<std::string> lines;
    lines.push_back(io::Json{{"scenario", io::to_json(s)}}.dump());
    RunTally tally;
    ReferenceModel model = bench.model;
    for (std::size_t i = 0; i < frames.size(); ++i) {
      const Observation obs{frames[i].positions, frames[i].descriptors, s.trajectory.dt};
      const FrameResult result = process_frame(model, obs, camera, s.tracker);
      const TrackingMetrics metrics = compute_metrics(result.config, frames[i].true_config);
      ++tally.frames;
      if (result.lost) {
        ++tally.lost;
      } else {
        tally.tip_errors.push_back(metrics.tip_error);
        tally.shape_errors.push_back(metrics.shape_error);
      }
      tally.frame_seconds.push_back(result.timings.total);
      lines.push_back(frame_line(0, static_cast<int>(i), frames[i].time, frames[i].true_config,
                                 result, metrics, args.timings)
                          .dump());
    }
    lines.push_back(tracking_summary(tally, 1, args.timings).dump());
    write_text(args.out_dir / "replay.jsonl", join_lines(lines));
    report_tracking("replay", tally);
    if (args.strict && tally.lost > 0) return exit_tracking_loss;
    return exit_ok;
  });
}

int cmd_sweep_occlusion(const CommonArgs& args) {
  return guarded([&] {
    const io::Scenario s = resolve_scenario(args);
    std::filesystem::create_directories(args.out_dir);
    const Bench bench = make_bench(s);
    const PinholeCamera camera = sim::viewpoint_camera(s.viewpoint);

    std::vector<std::string> lines;
    lines.push_back("# scenario: " + io::to_json(s).dump());
    lines.push_back("position,width,mean_tip_error,lost_frames");
    int total_lost = 0;
    for (const double position : s.occlusion_positions) {
      for (const double width : s.occlusion_widths) {
        sim::OcclusionBar bar = s.occlusion;
        bar.position = position;
        bar.width = width;
        RunTally tally;
        for (int k = 0; k < s.sweep_seeds; ++k) {
          sim::TrajectoryParams traj = s.trajectory;
          sim::NoiseParams noise = s.noise;
          traj.seed = mix_seed(traj.seed, static_cast<std::uint64_t>(k) + 1);
          noise.seed = mix_seed(noise.seed, static_cast<std::uint64_t>(k) + 1);
          const auto configs = sim::make_trajectory(s.rest, traj, s.plant);
          track_sequence(bench.model, bench.surface, camera, configs, noise, bar, s.tracker,
                         traj.dt, tally, nullptr, 0, false, nullptr);
        }
        total_lost += tally.lost;
        lines.push_back(fmt(position) + "," + fmt(width) + "," +
                        fmt(stats(tally.tip_errors).mean) + "," + std::to_string(tally.lost));
      }
    }
    write_text(args.out_dir / "sweep_occlusion.csv", join_lines(lines));
    std::cout << "occlusion sweep: " << s.occlusion_positions.size() << " x "
              << s.occlusion_widths.size() << " cells, " << s.sweep_seeds
              << " seeds each -> sweep_occlusion.csv\n";
    if (args.strict && total_lost > 0) return exit_tracking_loss;
    return exit_ok;
  });
}

int cmd_sweep_viewpoint(const CommonArgs& args) {
  return guarded([&] {
    const io::Scenario s = resolve_scenario(args);
    std::filesystem::create_directories(args.out_dir);
    const Bench bench = make_bench(s);

    std::vector<std::string> lines;
    lines.push_back("# scenario: " + io::to_json(s).dump());
    lines.push_back("viewpoint,sequences,mean_tip_error,std_tip_error,lost_frames");
    std::vector<double> all_errors;
    int total_lost = 0;
    for (const auto& name : s.viewpoints) {
      const PinholeCamera camera = sim::viewpoint_camera(name);
      RunTally tally;
      for (int k = 0; k < s.sweep_seeds; ++k) {
        sim::TrajectoryParams traj = s.trajectory;
        sim::NoiseParams noise = s.noise;
        traj.seed = mix_seed(traj.seed, static_cast<std::uint64_t>(k) + 1);
        noise.seed = mix_seed(noise.seed, static_cast<std::uint64_t>(k) + 1);
        const auto configs = sim::make_trajectory(s.rest, traj, s.plant);
        track_sequence(bench.model, bench.surface, camera, configs, noise, s.occlusion, s.tracker,
                       traj.dt, tally, nullptr, 0, false, nullptr);
      }
      const Stats tip = stats(tally.tip_errors);
      all_errors.insert(all_errors.end(), tally.tip_errors.begin(), tally.tip_errors.end());
      total_lost += tally.lost;
      lines.push_back(name + "," + std::to_string(s.sweep_seeds) + "," + fmt(tip.mean) + "," +
                      fmt(tip.stddev) + "," + std::to_string(tally.lost));
      std::cout << "viewpoint " << name << ": tip " << pct(tip.mean) << " +- " << pct(tip.stddev)
                << " (" << tally.lost << " lost)\n";
    }
    const Stats overall = stats(all_errors);
    lines.push_back("overall," + std::to_string(s.sweep_seeds * static_cast<int>(s.viewpoints.size())) +
                    "," + fmt(overall.mean) + "," + fmt(overall.stddev) + "," +
                    std::to_string(total_lost));
    write_text(args.out_dir / "sweep_viewpoint.csv", join_lines(lines));
    if (args.strict && total_lost > 0) return exit_tracking_loss;
    return exit_ok;
  });
}

int cmd_ablate(const CommonArgs& args) {
  return guarded([&] {
    const io::Scenario s = resolve_scenario(args);
    std::filesystem::create_directories(args.out_dir);
    const Bench bench = make_bench(s);
    const PinholeCamera camera = sim::viewpoint_camera(s.viewpoint);

    struct Variant {
      const char* name;
      bool descriptors;
      bool update;
      bool hierarchical;
    };
    const Variant variants[] = {
        {"full", s.tracker.use_descriptors, s.tracker.update_features, s.tracker.hierarchical},
        {"no-multiscale", false, s.tracker.update_features, s.tracker.hierarchical},
        {"no-feature-update", s.tracker.use_descriptors, false, s.tracker.hierarchical},
        {"no-hierarchical", s.tracker.use_descriptors, s.tracker.update_features, false},
    };

    std::vector<std::string> lines;
    lines.push_back("# scenario: " + io::to_json(s).dump());
    std::string header = "config,use_descriptors,update_features,hierarchical,"
                         "mean_tip_error,mean_shape_error,lost_frames";
    if (args.timings) header += ",mean_frame_seconds";
    lines.push_back(header);
    int total_lost = 0;
    for (const auto& variant : variants) {
      TrackerParams tracker = s.tracker;
      tracker.use_descriptors = variant.descriptors;
      tracker.update_features = variant.update;
      tracker.hierarchical = variant.hierarchical;
      RunTally tally;
      for (int q = 0; q < s.sequences; ++q) {
        sim::TrajectoryParams traj = s.trajectory;
        sim::NoiseParams noise = s.noise;
        if (s.sequences > 1) {
          traj.seed = mix_seed(traj.seed, static_cast<std::uint64_t>(q) + 1);
          noise.seed = mix_seed(noise.seed, static_cast<std::uint64_t>(q) + 1);
        }
        const auto configs = sim::make_trajectory(s.rest, traj, s.plant);
        track_sequence(bench.model, bench.surface, camera, configs, noise, s.occlusion, tracker,
                       traj.dt, tally, nullptr, 0, false, nullptr);
      }
      total_lost += tally.lost;
      std::string row = std::string(variant.name) + "," + (variant.descriptors ? "1" : "0") + "," +
                        (variant.update ? "1" : "0") + "," + (variant.hierarchical ? "1" : "0") +
                        "," + fmt(stats(tally.tip_errors).mean) + "," +
                        fmt(stats(tally.shape_errors).mean) + "," + std::to_string(tally.lost);
      if (args.timings) row += "," + fmt(stats(tally.frame_seconds).mean);
      lines.push_back(row);
      std::cout << "ablate " << variant.name << ": tip " << pct(stats(tally.tip_errors).mean)
                << ", shape " << pct(stats(tally.shape_errors).mean) << ", "
                << 1e3 * stats(tally.frame_seconds).mean << " ms/frame\n";
    }
    write_text(args.out_dir / "ablate.csv", join_lines(lines));
    if (args.strict && total_lost > 0) return exit_tracking_loss;
    return exit_ok;
  });
}

int cmd_control(const CommonArgs& args) {
  return guarded([&] {
    const io::Scenario s = resolve_scenario(args);
    std::filesystem::create_directories(args.out_dir);
    Bench bench = make_bench(s);
    const PinholeCamera camera = sim::viewpoint_camera(s.viewpoint);
    sim::PressurePlant plant(s.rest, s.plant);

    ClosedLoopParams params;
    params.n_steps = s.control.steps;
    params.dt = s.control.dt;
    params.noise = s.noise;
    params.tracker = s.tracker;
    params.gains = s.control.gains;
    const ControlTrace trace =
        run_closed_loop(plant, bench.model, bench.surface, camera, s.control.target, params);

    std::vector<std::string> lines;
    lines.push_back(io::Json{{"scenario", io::to_json(s)}}.dump());
    int lost = 0;
    for (std::size_t i = 0; i < trace.steps.size(); ++i) {
      const auto& step = trace.steps[i];
      io::Json j;
      j["step"] = static_cast<int>(i);
      io::Json pressures = io::Json::array();
      for (Eigen::Index c = 0; c < step.pressures.size(); ++c) pressures.push_back(step.pressures[c]);
      j["pressures"] = pressures;
      j["estimate"] = io::to_json(step.estimate);
      j["truth"] = io::to_json(step.truth);
      j["shape_error"] = step.shape_error;
      j["tip_error"] = step.tip_error;
      j["lost"] = step.lost;
      j["saturated"] = step.saturated;
      if (step.lost) ++lost;
      lines.push_back(j.dump());
    }
    io::Json summary;
    summary["steps"] = static_cast<int>(trace.steps.size());
    summary["lost_steps"] = lost;
    summary["steady_shape_error"] = trace.steady_shape_error;
    summary["steady_tip_error"] = trace.steady_tip_error;
    lines.push_back(io::Json{{"summary", summary}}.dump());
    write_text(args.out_dir / "control.jsonl", join_lines(lines));
    std::cout << "control: steady shape " << pct(trace.steady_shape_error) << ", tip "
              << pct(trace.steady_tip_error) << " over " << trace.steps.size() << " steps ("
              << lost << " lost)\n";
    if (args.strict && lost > 0) return exit_tracking_loss;
    return exit_ok;
  });
}

int run_command(const std::string& verb, const CommonArgs& args) {
  if (verb == "build-reference") return cmd_build_reference(args);
  if (verb == "track") return cmd_track(args);
  if (verb == "sweep-occlusion") return cmd_sweep_occlusion(args);
  if (verb == "sweep-viewpoint") return cmd_sweep_viewpoint(args);
  if (verb == "ablate") return cmd_ablate(args);
  if (verb == "control") return cmd_control(args);
  if (verb == "replay") return cmd_replay(args);
  std::cerr << "config error: unknown command '" << verb << "'\n";
  return exit_config_error;
}

}  // namespace aft::cli
