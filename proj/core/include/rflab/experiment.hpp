#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "rflab/io.hpp"

namespace rflab {

// A single experiment: arena + initial data + flow + diagnostics + outputs.
// Presets that logically bundle several runs expand into sub-experiments in
// subdirectories of the output directory.
struct ExperimentConfig {
  enum class Task { flow, identity_refinement, gauge_pair };

  std::string preset_name;  // informative; drives multi-run expansion
  Task task = Task::flow;

  // arena
  ArenaKind arena = ArenaKind::torus_grid;
  int resolution = 64;   // N (torus) or M (axisym)
  int stencil_order = 2;
  int sigma = 0;
  int dimension = 2;     // round family
  double length = 6.283185307179586;  // torus period
  double scale0 = 1.0;   // round family c0 / axisym radius^2 base

  // initial data
  std::string perturbation = "none";  // none|conformal|conformal_random|anisotropic|shape
  int mode_kx = 1, mode_ky = 0;
  double eps = 0.0;
  int kmax = 3;
  std::uint64_t seed = 1;

  // flow
  FlowConfig flow;

  // diagnostics toggles
  bool run_checks = true;
  bool einstein_pipeline = false;
  bool do_lojasiewicz = false;
  double mu_limit = 0.0;
  bool static_drift_check = false;  // dichotomy-style sup-norm drift report

  // output
  std::string out_dir;
  int snapshot_stride = 10;  // in records
  bool quiet = false;

  void validate() const;
};

// Known presets: round-family-all-sigma, torus-perturbed-flat,
// sphere-axisym-shrinker, identity-refinement, dichotomy-static, gauge-pair,
// einstein-shortcut.
ExperimentConfig preset(const std::string& name);
std::vector<std::string> preset_names();

// Flat dotted-key config text (round-trips with parse; keys sorted, which
// makes the hash independent of field order).
std::string config_to_text(const ExperimentConfig& cfg);
ExperimentConfig config_from_text(const std::string& text);
void apply_override(ExperimentConfig& cfg, const std::string& key, const std::string& value);
std::string config_hash_hex(const ExperimentConfig& cfg);

struct RunManifest {
  std::string config_hash;
  std::string code_version;
  std::string started_at;
  std::string finished_at;
  std::vector<std::string> files;       // relative to out_dir, present at close
  std::map<std::string, std::string> verdicts;
  std::string abort_reason;             // empty on clean completion
};

RunManifest run_experiment(const ExperimentConfig& cfg);
// Continue an interrupted run from its last snapshot.
RunManifest resume_experiment(const std::string& out_dir);
// Re-run diagnostics and reports from the stored snapshots.
RunManifest report_experiment(const std::string& out_dir);

MetricState build_initial_state(const ExperimentConfig& cfg);

void write_manifest(const std::string& path, const RunManifest& man);
RunManifest read_manifest(const std::string& path);

}  // namespace rflab
