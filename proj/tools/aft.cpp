#include <string>
#include <utility>
#include <vector>

#include "CLI11.hpp"

#include "aft/cli.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Markerless shape tracking for a two-segment continuum robot"};
  app.require_subcommand(1);

  aft::cli::CommonArgs args;
  std::string ablate_list;

  const auto add_common = [&](CLI::App* cmd) {
    cmd->add_option("--scenario", args.scenario_path, "Scenario JSON file");
    cmd->add_option("--out", args.out_dir, "Output directory")->default_val(".");
    cmd->add_option("--seed", args.seed, "Run seed, mixed into the noise and motion streams")
        ->each([&](const std::string&) { args.seed_set = true; });
    cmd->add_flag("--strict", args.strict, "Fail on tracking loss");
    cmd->add_option("--ablate", ablate_list,
                    "Comma-separated stages to disable: multiscale, feature-update, hierarchical");
    cmd->add_option("--jobs", args.jobs, "Worker count; output bytes do not depend on it")
        ->default_val(1);
    cmd->add_flag("--timings", args.timings, "Include wall-clock timings in result files");
  };

  const std::vector<std::string> verbs = {"build-reference", "track",   "sweep-occlusion",
                                          "sweep-viewpoint", "ablate",  "control",
                                          "replay"};
  for (const auto& verb : verbs) add_common(app.add_subcommand(verb));

  CLI11_PARSE(app, argc, argv);

  std::string token;
  for (const char c : ablate_list) {
    if (c == ',') {
      if (!token.empty()) args.ablate.push_back(std::exchange(token, {}));
    } else {
      token += c;
    }
  }
  if (!token.empty()) args.ablate.push_back(token);

  return aft::cli::run_command(app.get_subcommands().front()->get_name(), args);
}
