// lab: batch driver for the flow experiments.
//
//   lab run --preset <name> [--out DIR] [--seed K] [--config FILE]
//           [--set key=value ...] [--resume] [--quiet]
//   lab resume --out DIR
//   lab report --out DIR
//   lab presets

#include <cstdio>
#include <string>

#include <CLI11.hpp>

#include "rflab/experiment.hpp"
#include "rflab/version.hpp"

using namespace rflab;

namespace {

void print_manifest(const RunManifest& man, bool quiet) {
  if (quiet) return;
  std::printf("config hash     %s\n", man.config_hash.c_str());
  for (const auto& [id, v] : man.verdicts) std::printf("  %-40s %s\n", id.c_str(), v.c_str());
  if (!man.abort_reason.empty())
    std::printf("ABORTED: %s\n", man.abort_reason.c_str());
  std::printf("files: %zu, finished %s\n", man.files.size(), man.finished_at.c_str());
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"numerical laboratory for normalized and modified Ricci flow"};
  app.set_version_flag("--version", std::string(kVersion));
  app.require_subcommand(1);

  // run
  auto* run_cmd = app.add_subcommand("run", "run an experiment");
  std::string preset_name, out_dir = "lab-out", config_file;
  std::uint64_t seed = 0;
  bool seed_set = false, quiet = false, resume_flag = false;
  std::vector<std::string> overrides;
  run_cmd->add_option("--preset", preset_name, "experiment preset name");
  run_cmd->add_option("--out", out_dir, "output directory");
  run_cmd->add_option("--seed", seed, "override the initial-data seed")
      ->each([&](const std::string&) { seed_set = true; });
  run_cmd->add_option("--config", config_file, "flat key = value config file");
  run_cmd->add_option("--set", overrides, "override a config key (key=value), repeatable");
  run_cmd->add_flag("--resume", resume_flag, "resume from the last snapshot in --out");
  run_cmd->add_flag("--quiet", quiet, "suppress the verdict summary");

  // resume
  auto* resume_cmd = app.add_subcommand("resume", "resume an interrupted run");
  std::string resume_dir;
  bool resume_quiet = false;
  resume_cmd->add_option("--out", resume_dir, "output directory of the interrupted run")
      ->required();
  resume_cmd->add_flag("--quiet", resume_quiet, "suppress the verdict summary");

  // report
  auto* report_cmd = app.add_subcommand("report", "re-run diagnostics on stored snapshots");
  std::string report_dir;
  bool report_quiet = false;
  report_cmd->add_option("--out", report_dir, "output directory of a finished run")->required();
  report_cmd->add_flag("--quiet", report_quiet, "suppress the verdict summary");

  // presets
  auto* presets_cmd = app.add_subcommand("presets", "list known presets");

  CLI11_PARSE(app, argc, argv);

  try {
    if (presets_cmd->parsed()) {
      for (const auto& n : preset_names()) std::printf("%s\n", n.c_str());
      return 0;
    }
    if (resume_cmd->parsed()) {
      RunManifest man = resume_experiment(resume_dir);
      print_manifest(man, resume_quiet);
      return man.abort_reason.empty() ? 0 : 2;
    }
    if (report_cmd->parsed()) {
      RunManifest man = report_experiment(report_dir);
      print_manifest(man, report_quiet);
      return 0;
    }
    // run
    if (resume_flag) {
      RunManifest man = resume_experiment(out_dir);
      print_manifest(man, quiet);
      return man.abort_reason.empty() ? 0 : 2;
    }
    ExperimentConfig cfg;
    if (!config_file.empty()) cfg = config_from_text(read_text_file(config_file));
    if (!preset_name.empty()) {
      cfg = preset(preset_name);
      if (!config_file.empty()) {
        // file keys refine the preset
        ExperimentConfig file_cfg = config_from_text(read_text_file(config_file));
        (void)file_cfg;  // full-file override of a preset is ambiguous; use --set
        throw config_error("--preset and --config are mutually exclusive; use --set");
      }
    } else if (config_file.empty()) {
      throw config_error("run: need --preset or --config");
    }
    for (const auto& kv : overrides) {
      const auto eq = kv.find('=');
      if (eq == std::string::npos)
        throw config_error("--set expects key=value, got '" + kv + "'");
      apply_override(cfg, kv.substr(0, eq), kv.substr(eq + 1));
    }
    if (seed_set) cfg.seed = seed;
    cfg.out_dir = out_dir;
    cfg.quiet = quiet;
    RunManifest man = run_experiment(cfg);
    print_manifest(man, quiet);
    return man.abort_reason.empty() ? 0 : 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
}
