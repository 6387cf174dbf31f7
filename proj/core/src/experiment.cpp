#include "rflab/experiment.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <future>
#include <sstream>

#include <json.hpp>

#include "rflab/errors.hpp"
#include "rflab/rng.hpp"
#include "rflab/fit.hpp"
#include "rflab/version.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace rflab {

namespace {

constexpr double kPi = 3.14159265358979323846;

std::string now_iso() {
  const auto t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  char buf[32];
  std::tm tm_utc;
  gmtime_r(&t, &tm_utc);
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm_utc);
  return buf;
}

std::string task_name(ExperimentConfig::Task t) {
  switch (t) {
    case ExperimentConfig::Task::flow: return "flow";
    case ExperimentConfig::Task::identity_refinement: return "identity_refinement";
    case ExperimentConfig::Task::gauge_pair: return "gauge_pair";
  }
  return "?";
}

ExperimentConfig::Task task_from_name(const std::string& s) {
  if (s == "flow") return ExperimentConfig::Task::flow;
  if (s == "identity_refinement") return ExperimentConfig::Task::identity_refinement;
  if (s == "gauge_pair") return ExperimentConfig::Task::gauge_pair;
  throw config_error("task: unknown value '" + s + "'");
}

std::string snapshot_name(int index) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "state_%06d.json", index);
  return buf;
}

}  // namespace

void ExperimentConfig::validate() const {
  if (eps < 0) throw config_error("init.eps: must be >= 0");
  if (resolution < 1) throw config_error("arena.resolution: must be positive");
  if (stencil_order != 2 && stencil_order != 4)
    throw config_error("arena.stencil_order: must be 2 or 4");
  if (sigma < -1 || sigma > 1) throw config_error("arena.sigma: must be -1, 0 or +1");
  if (arena == ArenaKind::torus_grid && sigma != 0)
    throw config_error("arena.sigma: the torus grid is the sigma = 0 arena");
  if (arena == ArenaKind::axisym_sphere && sigma != -1)
    throw config_error("arena.sigma: the axisym sphere is the sigma = -1 arena");
  if (!(length > 0)) throw config_error("arena.length: must be positive");
  if (!(scale0 > 0)) throw config_error("arena.scale0: must be positive");
  if (dimension < 2) throw config_error("arena.dimension: must be >= 2");
  if (snapshot_stride < 1) throw config_error("output.snapshot_stride: must be >= 1");
  if (perturbation != "none" && perturbation != "conformal" &&
      perturbation != "conformal_random" && perturbation != "anisotropic" &&
      perturbation != "shape")
    throw config_error("init.perturbation: unknown kind '" + perturbation + "'");
  flow.validate();
}

MetricState build_initial_state(const ExperimentConfig& cfg) {
  cfg.validate();
  switch (cfg.arena) {
    case ArenaKind::round_family:
      return RoundFamilyState(cfg.dimension, cfg.sigma, cfg.scale0);
    case ArenaKind::torus_grid: {
      if (cfg.perturbation == "none" || cfg.eps == 0.0)
        return TorusGridState::flat(cfg.resolution, cfg.length, cfg.stencil_order);
      if (cfg.perturbation == "conformal")
        return conformal_mode_torus(cfg.resolution, cfg.length, cfg.stencil_order, cfg.eps,
                                    cfg.mode_kx, cfg.mode_ky);
      if (cfg.perturbation == "conformal_random")
        return conformal_random_torus(cfg.resolution, cfg.length, cfg.stencil_order, cfg.eps,
                                      cfg.kmax, cfg.seed);
      if (cfg.perturbation == "anisotropic")
        return anisotropic_mode_torus(cfg.resolution, cfg.length, cfg.stencil_order, cfg.eps,
                                      cfg.mode_kx, cfg.mode_ky);
      throw config_error("init.perturbation: '" + cfg.perturbation +
                         "' is not defined on the torus arena");
    }
    case ArenaKind::axisym_sphere: {
      const double r = std::sqrt(cfg.scale0);
      if (cfg.perturbation == "none" || cfg.eps == 0.0)
        return AxisymSphereState::round(cfg.resolution, r, cfg.stencil_order);
      if (cfg.perturbation == "shape")
        return perturbed_round_sphere(cfg.resolution, cfg.stencil_order, r, cfg.eps, cfg.seed);
      throw config_error("init.perturbation: '" + cfg.perturbation +
                         "' is not defined on the axisym arena");
    }
  }
  throw config_error("arena.kind: unresolved");
}

// --- config text -------------------------------------------------------------

std::string config_to_text(const ExperimentConfig& cfg) {
  std::map<std::string, std::string> kv;
  kv["arena.kind"] = arena_name(cfg.arena);
  kv["arena.resolution"] = std::to_string(cfg.resolution);
  kv["arena.stencil_order"] = std::to_string(cfg.stencil_order);
  kv["arena.sigma"] = std::to_string(cfg.sigma);
  kv["arena.dimension"] = std::to_string(cfg.dimension);
  kv["arena.length"] = format_g17(cfg.length);
  kv["arena.scale0"] = format_g17(cfg.scale0);
  kv["init.perturbation"] = cfg.perturbation;
  kv["init.mode_kx"] = std::to_string(cfg.mode_kx);
  kv["init.mode_ky"] = std::to_string(cfg.mode_ky);
  kv["init.eps"] = format_g17(cfg.eps);
  kv["init.kmax"] = std::to_string(cfg.kmax);
  kv["init.seed"] = std::to_string(cfg.seed);
  kv["flow.kind"] = cfg.flow.kind == FlowConfig::Kind::mrf ? "mrf" : "nrf";
  kv["flow.dt_init"] = format_g17(cfg.flow.dt_init);
  kv["flow.t_end"] = format_g17(cfg.flow.t_end);
  kv["flow.cfl_safety"] = format_g17(cfg.flow.cfl_safety);
  kv["flow.output_stride"] = std::to_string(cfg.flow.output_stride);
  kv["flow.entropy.tol"] = format_g17(cfg.flow.entropy_cfg.tol);
  kv["flow.entropy.max_iter"] = std::to_string(cfg.flow.entropy_cfg.max_iter);
  kv["flow.entropy.damping"] = format_g17(cfg.flow.entropy_cfg.damping);
  kv["flow.entropy.w_floor"] = format_g17(cfg.flow.entropy_cfg.w_floor);
  kv["diag.run_checks"] = cfg.run_checks ? "1" : "0";
  kv["diag.einstein_pipeline"] = cfg.einstein_pipeline ? "1" : "0";
  kv["diag.do_lojasiewicz"] = cfg.do_lojasiewicz ? "1" : "0";
  kv["diag.mu_limit"] = format_g17(cfg.mu_limit);
  kv["diag.static_drift_check"] = cfg.static_drift_check ? "1" : "0";
  kv["output.snapshot_stride"] = std::to_string(cfg.snapshot_stride);
  kv["preset"] = cfg.preset_name;
  kv["task"] = task_name(cfg.task);
  std::ostringstream os;
  for (const auto& [k, v] : kv) os << k << " = " << v << "\n";
  return os.str();
}

void apply_override(ExperimentConfig& cfg, const std::string& key, const std::string& value) {
  auto to_int = [&](const std::string& v) {
    try {
      return std::stoi(v);
    } catch (...) {
      throw config_error(key + ": expected an integer, got '" + v + "'");
    }
  };
  auto to_u64 = [&](const std::string& v) {
    try {
      return static_cast<std::uint64_t>(std::stoull(v));
    } catch (...) {
      throw config_error(key + ": expected an integer, got '" + v + "'");
    }
  };
  auto to_double = [&](const std::string& v) {
    try {
      return std::stod(v);
    } catch (...) {
      throw config_error(key + ": expected a number, got '" + v + "'");
    }
  };
  auto to_bool = [&](const std::string& v) {
    if (v == "1" || v == "true") return true;
    if (v == "0" || v == "false") return false;
    throw config_error(key + ": expected a boolean, got '" + v + "'");
  };

  if (key == "arena.kind") {
    if (value == "round_family") cfg.arena = ArenaKind::round_family;
    else if (value == "torus_grid") cfg.arena = ArenaKind::torus_grid;
    else if (value == "axisym_sphere") cfg.arena = ArenaKind::axisym_sphere;
    else throw config_error("arena.kind: unknown arena '" + value + "'");
  } else if (key == "arena.resolution") cfg.resolution = to_int(value);
  else if (key == "arena.stencil_order") cfg.stencil_order = to_int(value);
  else if (key == "arena.sigma") cfg.sigma = to_int(value);
  else if (key == "arena.dimension") cfg.dimension = to_int(value);
  else if (key == "arena.length") cfg.length = to_double(value);
  else if (key == "arena.scale0") cfg.scale0 = to_double(value);
  else if (key == "init.perturbation") cfg.perturbation = value;
  else if (key == "init.mode_kx") cfg.mode_kx = to_int(value);
  else if (key == "init.mode_ky") cfg.mode_ky = to_int(value);
  else if (key == "init.eps") cfg.eps = to_double(value);
  else if (key == "init.kmax") cfg.kmax = to_int(value);
  else if (key == "init.seed") cfg.seed = to_u64(value);
  else if (key == "flow.kind") {
    if (value == "mrf") cfg.flow.kind = FlowConfig::Kind::mrf;
    else if (value == "nrf") cfg.flow.kind = FlowConfig::Kind::nrf;
    else throw config_error("flow.kind: expected nrf or mrf, got '" + value + "'");
  } else if (key == "flow.dt_init") cfg.flow.dt_init = to_double(value);
  else if (key == "flow.t_end") cfg.flow.t_end = to_double(value);
  else if (key == "flow.cfl_safety") cfg.flow.cfl_safety = to_double(value);
  else if (key == "flow.output_stride") cfg.flow.output_stride = to_int(value);
  else if (key == "flow.entropy.tol") cfg.flow.entropy_cfg.tol = to_double(value);
  else if (key == "flow.entropy.max_iter") cfg.flow.entropy_cfg.max_iter = to_int(value);
  else if (key == "flow.entropy.damping") cfg.flow.entropy_cfg.damping = to_double(value);
  else if (key == "flow.entropy.w_floor") cfg.flow.entropy_cfg.w_floor = to_double(value);
  else if (key == "diag.run_checks") cfg.run_checks = to_bool(value);
  else if (key == "diag.einstein_pipeline") cfg.einstein_pipeline = to_bool(value);
  else if (key == "diag.do_lojasiewicz") cfg.do_lojasiewicz = to_bool(value);
  else if (key == "diag.mu_limit") cfg.mu_limit = to_double(value);
  else if (key == "diag.static_drift_check") cfg.static_drift_check = to_bool(value);
  else if (key == "output.snapshot_stride") cfg.snapshot_stride = to_int(value);
  else if (key == "preset") cfg.preset_name = value;
  else if (key == "task") cfg.task = task_from_name(value);
  else throw config_error("unknown config key '" + key + "'");
}

ExperimentConfig config_from_text(const std::string& text) {
  ExperimentConfig cfg;
  std::istringstream is(text);
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    auto trim = [](std::string s) {
      const auto b = s.find_first_not_of(" \t\r");
      const auto e = s.find_last_not_of(" \t\r");
      return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
    };
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw config_error("config line " + std::to_string(lineno) + ": expected key = value");
    apply_override(cfg, trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }
  return cfg;
}

std::string config_hash_hex(const ExperimentConfig& cfg) {
  const std::string text = config_to_text(cfg);
  std::uint64_t h = 1469598103934665603ULL;  // FNV-1a
  for (unsigned char c : text) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  char buf[20];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

// --- presets -----------------------------------------------------------------

std::vector<std::string> preset_names() {
  return {"round-family-all-sigma", "torus-perturbed-flat", "sphere-axisym-shrinker",
          "identity-refinement",    "dichotomy-static",     "gauge-pair",
          "einstein-shortcut"};
}

ExperimentConfig preset(const std::string& name) {
  ExperimentConfig cfg;
  cfg.preset_name = name;
  if (name == "round-family-all-sigma") {
    cfg.arena = ArenaKind::round_family;
    cfg.sigma = -1;
    cfg.dimension = 2;
    cfg.scale0 = 1.2;
    cfg.flow.kind = FlowConfig::Kind::mrf;
    cfg.flow.dt_init = 5e-3;
    cfg.flow.t_end = 5.0;
    cfg.flow.output_stride = 20;
    cfg.flow.entropy_cfg.tol = 1e-9;
    cfg.snapshot_stride = 10;
    return cfg;
  }
  if (name == "torus-perturbed-flat") {
    cfg.arena = ArenaKind::torus_grid;
    cfg.sigma = 0;
    cfg.resolution = 64;
    // order 4: the proof-level (log E)' bounds are checked at an absolute
    // 1e-3 slack, and the order-2 discretization defect exceeds it
    cfg.stencil_order = 4;
    cfg.length = 2.0 * kPi;
    cfg.perturbation = "conformal";
    cfg.mode_kx = 1;
    cfg.mode_ky = 0;
    cfg.eps = 0.02;
    cfg.flow.kind = FlowConfig::Kind::mrf;
    cfg.flow.dt_init = 1.0;  // CFL-limited
    cfg.flow.t_end = 5.0;
    cfg.flow.output_stride = 25;
    cfg.do_lojasiewicz = true;
    cfg.mu_limit = 0.0;
    cfg.snapshot_stride = 20;
    return cfg;
  }
  if (name == "sphere-axisym-shrinker") {
    cfg.arena = ArenaKind::axisym_sphere;
    cfg.sigma = -1;
    cfg.resolution = 129;
    cfg.stencil_order = 4;
    cfg.scale0 = 2.0;  // c = 1 normalization: a = beta = 2
    cfg.perturbation = "shape";
    cfg.eps = 0.02;
    cfg.seed = 7;
    cfg.flow.kind = FlowConfig::Kind::mrf;
    cfg.flow.dt_init = 1.0;  // CFL-limited
    cfg.flow.t_end = 2.0;
    // fine output spacing: the multi-rate decay makes (log E)' curvature
    // large enough that coarser centered differences exceed the 1e-3 slack
    cfg.flow.output_stride = 27;
    cfg.snapshot_stride = 60;
    return cfg;
  }
  if (name == "identity-refinement") {
    cfg.task = ExperimentConfig::Task::identity_refinement;
    cfg.seed = 11;
    cfg.run_checks = false;
    return cfg;
  }
  if (name == "dichotomy-static") {
    cfg.arena = ArenaKind::round_family;
    cfg.sigma = -1;
    cfg.scale0 = 1.0;
    cfg.flow.kind = FlowConfig::Kind::mrf;
    cfg.flow.dt_init = 5e-3;
    cfg.flow.t_end = 5.0;
    cfg.flow.output_stride = 50;
    cfg.flow.entropy_cfg.tol = 1e-9;
    cfg.static_drift_check = true;
    return cfg;
  }
  if (name == "gauge-pair") {
    cfg.task = ExperimentConfig::Task::gauge_pair;
    cfg.arena = ArenaKind::torus_grid;
    cfg.sigma = 0;
    cfg.resolution = 48;
    cfg.stencil_order = 4;
    cfg.length = 2.0 * kPi;
    cfg.perturbation = "conformal";
    cfg.mode_kx = 1;
    cfg.mode_ky = 0;
    cfg.eps = 0.02;
    cfg.flow.t_end = 3.0;
    cfg.flow.dt_init = 1.0;  // locked to the initial CFL bound
    cfg.flow.output_stride = 20;
    return cfg;
  }
  if (name == "einstein-shortcut") {
    cfg.arena = ArenaKind::round_family;
    cfg.sigma = -1;
    cfg.scale0 = 1.2;
    cfg.flow.kind = FlowConfig::Kind::nrf;
    cfg.flow.dt_init = 5e-3;
    cfg.flow.t_end = 5.0;
    cfg.flow.output_stride = 20;
    cfg.flow.entropy_cfg.tol = 1e-9;
    cfg.einstein_pipeline = true;
    return cfg;
  }
  throw config_error("unknown preset '" + name + "'");
}

// Multi-run presets expand into named sub-experiments.
static std::vector<std::pair<std::string, ExperimentConfig>> expand_preset(
    const ExperimentConfig& cfg) {
  std::vector<std::pair<std::string, ExperimentConfig>> out;
  if (cfg.preset_name == "round-family-all-sigma") {
    for (int s : {-1, 0, 1}) {
      ExperimentConfig c = cfg;
      c.preset_name = "";
      c.sigma = s;
      out.push_back({std::string("sigma_") + (s < 0 ? "m1" : s == 0 ? "0" : "p1"), c});
    }
  } else if (cfg.preset_name == "dichotomy-static") {
    ExperimentConfig round = cfg;
    round.preset_name = "";
    out.push_back({"round", round});
    ExperimentConfig torus = cfg;
    torus.preset_name = "";
    torus.arena = ArenaKind::torus_grid;
    torus.sigma = 0;
    torus.resolution = 32;
    torus.length = 2.0 * kPi;
    torus.perturbation = "none";
    torus.eps = 0.0;
    torus.flow.dt_init = 1.0;  // CFL-limited
    torus.flow.entropy_cfg.tol = 1e-7;
    torus.flow.output_stride = 100;
    out.push_back({"torus", torus});
  } else if (cfg.preset_name == "einstein-shortcut") {
    ExperimentConfig round = cfg;
    round.preset_name = "";
    out.push_back({"round", round});
    ExperimentConfig torus = cfg;
    torus.preset_name = "";
    torus.arena = ArenaKind::torus_grid;
    torus.sigma = 0;
    torus.resolution = 48;
    torus.stencil_order = 2;
    torus.length = 2.0 * kPi;
    torus.perturbation = "conformal";
    torus.mode_kx = 1;
    torus.mode_ky = 0;
    torus.eps = 0.02;
    torus.flow.kind = FlowConfig::Kind::nrf;
    torus.flow.dt_init = 1.0;
    torus.flow.t_end = 1.5;
    torus.flow.output_stride = 25;
    torus.flow.entropy_cfg.tol = 1e-7;
    out.push_back({"torus", torus});
  }
  return out;
}

// --- manifest ----------------------------------------------------------------

void write_manifest(const std::string& path, const RunManifest& man) {
  json j;
  j["config_hash"] = man.config_hash;
  j["code_version"] = man.code_version;
  j["started_at"] = man.started_at;
  j["finished_at"] = man.finished_at;
  j["files"] = man.files;
  json v = json::object();
  for (const auto& [k, s] : man.verdicts) v[k] = s;
  j["verdicts"] = v;
  j["abort_reason"] = man.abort_reason;
  write_text_file(path, j.dump(1));
}

RunManifest read_manifest(const std::string& path) {
  json j = json::parse(read_text_file(path));
  RunManifest man;
  man.config_hash = j.at("config_hash").get<std::string>();
  man.code_version = j.at("code_version").get<std::string>();
  man.started_at = j.at("started_at").get<std::string>();
  man.finished_at = j.at("finished_at").get<std::string>();
  man.files = j.at("files").get<std::vector<std::string>>();
  for (const auto& [k, v] : j.at("verdicts").items())
    man.verdicts[k] = v.get<std::string>();
  man.abort_reason = j.at("abort_reason").get<std::string>();
  return man;
}

// --- run machinery -----------------------------------------------------------

namespace {

struct OutputWriter {
  fs::path dir;
  RunManifest man;

  explicit OutputWriter(const std::string& out_dir) : dir(out_dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw io_error("cannot create output directory: " + out_dir);
    man.code_version = kVersion;
    man.started_at = now_iso();
  }

  std::string file(const std::string& name) {
    man.files.push_back(name);
    return (dir / name).string();
  }

  void finish() {
    man.finished_at = now_iso();
    // every listed file must exist at close
    for (const auto& f : man.files)
      if (!fs::exists(dir / f)) throw io_error("manifest lists a missing file: " + f);
    write_manifest((dir / "manifest.json").string(), man);
  }
};

void emit_plots(OutputWriter& out, const std::vector<DiagnosticsRecord>& d) {
  PlotSeries logE{"log10 E", {}}, Nq{"N", {}}, mu{"mu", {}};
  for (const auto& r : d) {
    if (r.E > 0) logE.points.push_back({r.t, std::log10(r.E)});
    if (r.N) Nq.points.push_back({r.t, *r.N});
    mu.points.push_back({r.t, r.mu});
  }
  write_plot_svg(out.file("plot_logE_vs_t.svg"), "log10 E(t)", {logE});
  write_plot_svg(out.file("plot_N_vs_t.svg"), "Dirichlet-Einstein quotient N(t)", {Nq});
  write_plot_svg(out.file("plot_mu_vs_t.svg"), "entropy mu(t)", {mu});
}

std::vector<BoundCheckReport> flow_reports(const ExperimentConfig& cfg, const Trajectory& traj,
                                           const FlowAnalysis& an) {
  const std::vector<DiagnosticsRecord>& d = an.records;
  std::vector<BoundCheckReport> reports;
  const bool mrf = cfg.flow.kind == FlowConfig::Kind::mrf;
  if (cfg.run_checks && mrf && traj.size() >= 4) {
    reports.push_back(check_eev(traj, an));
    reports.push_back(check_fdot(traj, an));
    reports.push_back(check_nest(traj, an));
    reports.push_back(check_decay(traj, an));
    reports.push_back(check_error_estimates(traj, an));
  }
  if (cfg.do_lojasiewicz && mrf) {
    try {
      reports.push_back(lojasiewicz_fit(traj, cfg.mu_limit));
    } catch (const error& e) {
      BoundCheckReport rep;
      rep.id = "lojasiewicz";
      rep.anchor = "eq:lsineq1";
      rep.verdict = Verdict::inconclusive;
      rep.notes = e.what();
      reports.push_back(rep);
    }
  }
  if (cfg.static_drift_check) {
    BoundCheckReport rep;
    rep.id = "static_drift";
    rep.anchor = "eq:grs";
    const std::vector<double> c0 = metric_components(traj.records.front().state);
    double drift = 0;
    for (const auto& rec : traj.records) {
      const std::vector<double> c = metric_components(rec.state);
      for (std::size_t p = 0; p < c.size(); ++p)
        drift = std::max(drift, std::abs(c[p] - c0[p]));
      rep.margins.push_back({rec.t, drift});
    }
    rep.fitted["max_drift"] = drift;
    rep.verdict = drift <= 1e-9 ? Verdict::holds : Verdict::violated;
    reports.push_back(rep);
  }
  // entropy monotonicity along mrf records
  if (mrf && traj.size() >= 2) {
    BoundCheckReport rep;
    rep.id = "mu_monotone";
    rep.anchor = "eq:muev";
    double worst = 0;
    for (int k = 0; k + 1 < traj.size(); ++k) {
      const double dmu = d[k + 1].mu - d[k].mu;
      rep.margins.push_back({d[k + 1].t, dmu});
      worst = std::min(worst, dmu);
    }
    rep.fitted["min_step_increment"] = worst;
    rep.verdict = worst >= -1e-9 ? Verdict::holds : Verdict::violated;
    reports.push_back(rep);
  }
  return reports;
}

std::vector<BoundCheckReport> einstein_reports(const ExperimentConfig& cfg,
                                               const Trajectory& traj, OutputWriter& out) {
  std::vector<BoundCheckReport> reports;
  std::vector<DiagnosticsRecord> er = einstein_shortcut(traj);
  write_trajectory_csv(out.file("einstein.csv"), er);

  // pointwise trace bound |H| <= sqrt(n) |S|
  BoundCheckReport tb;
  tb.id = "einstein_trace_bound";
  tb.anchor = "ssec:einsteincase";
  const double sqrt_n = std::sqrt(static_cast<double>(dimension_of(traj.records.front().state)));
  double worst = 0;
  for (std::size_t k = 0; k < er.size(); ++k) {
    const auto& rec = traj.records[k];
    CurvatureBundle cb = curvature(rec.state);
    SymTensorField S = cb.Rc;
    SymTensorField g = metric_tensor(rec.state);
    axpy(0.5 * sigma_of(rec.state), g, S);
    ScalarField H = trace(rec.state, S);
    ScalarField s2 = pointwise_norm2(rec.state, S);
    for (std::size_t p = 0; p < H.data.size(); ++p) {
      const double slack = sqrt_n * std::sqrt(std::max(s2.data[p], 0.0)) -
                           std::abs(H.data[p]);
      worst = std::min(worst, slack);
    }
    tb.margins.push_back({er[k].t, worst});
  }
  tb.fitted["min_slack"] = worst;
  tb.verdict = worst >= -1e-12 ? Verdict::holds : Verdict::violated;
  reports.push_back(tb);

  // agreement with the weighted pipeline on constant-potential records
  BoundCheckReport ag;
  ag.id = "einstein_weighted_agreement";
  ag.anchor = "ssec:einsteincase";
  double max_rel = 0;
  int used = 0;
  for (std::size_t k = 0; k < er.size(); ++k) {
    const auto& rec = traj.records[k];
    double fmin = 1e300, fmax = -1e300;
    for (double v : rec.entropy.f.data) {
      fmin = std::min(fmin, v);
      fmax = std::max(fmax, v);
    }
    if (fmax - fmin > 1e-6) continue;  // agreement is claimed only for constant f
    const double vol = volume_measure(rec.state).mass;
    const double Ew = energy_E(rec.state, rec.entropy);
    const double rel = std::abs(er[k].E / vol - Ew) / std::max({Ew, er[k].E / vol, 1e-300});
    max_rel = std::max(max_rel, rel);
    ag.margins.push_back({er[k].t, rel});
    ++used;
  }
  ag.fitted["max_rel_difference"] = max_rel;
  ag.fitted["constant_f_records"] = used;
  if (used == 0) {
    ag.verdict = Verdict::inconclusive;
    ag.notes = "no constant-potential records on this run";
  } else {
    ag.verdict = max_rel <= 1e-5 ? Verdict::holds : Verdict::violated;
  }
  reports.push_back(ag);
  return reports;
}

RunManifest run_flow_task(const ExperimentConfig& cfg) {
  OutputWriter out(cfg.out_dir);
  out.man.config_hash = config_hash_hex(cfg);
  write_text_file(out.file("config.txt"), config_to_text(cfg));

  MetricState initial = build_initial_state(cfg);
  Trajectory traj;
  std::string abort_reason;
  // snapshot observer keeps the previous record for restartable differences
  TrajectoryRecord prev_rec;
  bool have_prev = false;
  auto observer = [&](int index, const TrajectoryRecord& rec, const StepStats& stats) {
    if (index % cfg.snapshot_stride == 0) {
      Snapshot snap;
      snap.record_index = index;
      snap.record = rec;
      snap.stats = stats;
      if (have_prev) {
        snap.prev_t = prev_rec.t;
        snap.prev_state = prev_rec.state;
        snap.prev_f = prev_rec.entropy.f;
      }
      write_snapshot(out.file(snapshot_name(index)), snap);
    }
    prev_rec = rec;
    have_prev = true;
  };
  try {
    traj = run(initial, cfg.flow, observer);
  } catch (const error& e) {
    abort_reason = e.what();
  }

  if (!traj.records.empty()) {
    try {
      FlowAnalysis an = analyze(traj);
      write_trajectory_csv(out.file("trajectory.csv"), an.records);
      emit_plots(out, an.records);
      if (abort_reason.empty()) {
        std::vector<BoundCheckReport> reports = flow_reports(cfg, traj, an);
        if (cfg.einstein_pipeline) {
          auto er = einstein_reports(cfg, traj, out);
          reports.insert(reports.end(), er.begin(), er.end());
        }
        write_report_json(out.file("report.json"), reports);
        for (const auto& r : reports) out.man.verdicts[r.id] = verdict_name(r.verdict);
      }
    } catch (const error& e) {
      if (!abort_reason.empty()) abort_reason += "; ";
      abort_reason += std::string("diagnostics: ") + e.what();
    }
  }
  out.man.abort_reason = abort_reason;
  out.finish();
  return out.man;
}

RunManifest run_gauge_task(const ExperimentConfig& cfg) {
  OutputWriter out(cfg.out_dir);
  out.man.config_hash = config_hash_hex(cfg);
  write_text_file(out.file("config.txt"), config_to_text(cfg));

  MetricState initial = build_initial_state(cfg);
  GaugePair pair = gauge_experiment(initial, cfg.flow);

  std::vector<DiagnosticsRecord> dn = diagnose(pair.nrf_traj);
  std::vector<DiagnosticsRecord> dm = diagnose(pair.mrf_traj);
  write_trajectory_csv(out.file("trajectory_nrf.csv"), dn);
  write_trajectory_csv(out.file("trajectory_mrf.csv"), dm);

  BoundCheckReport rep;
  rep.id = "gauge_equivalence";
  rep.anchor = "prop:modflow";
  double max_mu = 0, max_e = 0;
  for (std::size_t k = 0; k < pair.nrf_inv.size(); ++k) {
    const auto& a = pair.nrf_inv[k];
    const auto& b = pair.mrf_inv[k];
    const double dmu = std::abs(a.mu - b.mu) / std::max({std::abs(a.mu), std::abs(b.mu), 1e-12});
    const double de = std::abs(a.E - b.E) / std::max({a.E, b.E, 1e-300});
    max_mu = std::max(max_mu, dmu);
    max_e = std::max(max_e, de);
    rep.margins.push_back({a.t, std::max(dmu, de)});
  }
  rep.fitted["max_mu_rel_diff"] = max_mu;
  rep.fitted["max_E_rel_diff"] = max_e;
  rep.verdict = (max_mu <= 0.01 && max_e <= 0.01) ? Verdict::holds : Verdict::violated;
  write_report_json(out.file("report.json"), {rep});
  out.man.verdicts[rep.id] = verdict_name(rep.verdict);

  // invariant traces for both flows
  PlotSeries mu_n{"mu (nrf)", {}}, mu_m{"mu (mrf)", {}};
  for (const auto& v : pair.nrf_inv) mu_n.points.push_back({v.t, v.mu});
  for (const auto& v : pair.mrf_inv) mu_m.points.push_back({v.t, v.mu});
  write_plot_svg(out.file("plot_mu_vs_t.svg"), "entropy mu(t), both gauges", {mu_n, mu_m});
  PlotSeries e_n{"log10 E (nrf)", {}}, e_m{"log10 E (mrf)", {}};
  for (const auto& v : pair.nrf_inv)
    if (v.E > 0) e_n.points.push_back({v.t, std::log10(v.E)});
  for (const auto& v : pair.mrf_inv)
    if (v.E > 0) e_m.points.push_back({v.t, std::log10(v.E)});
  write_plot_svg(out.file("plot_logE_vs_t.svg"), "log10 E(t), both gauges", {e_n, e_m});
  PlotSeries n_n{"N (nrf)", {}}, n_m{"N (mrf)", {}};
  for (std::size_t k = 0; k < dn.size(); ++k)
    if (dn[k].N) n_n.points.push_back({dn[k].t, *dn[k].N});
  for (std::size_t k = 0; k < dm.size(); ++k)
    if (dm[k].N) n_m.points.push_back({dm[k].t, *dm[k].N});
  write_plot_svg(out.file("plot_N_vs_t.svg"), "N(t), both gauges", {n_n, n_m});

  out.finish();
  return out.man;
}

RunManifest run_identity_task(const ExperimentConfig& cfg) {
  OutputWriter out(cfg.out_dir);
  out.man.config_hash = config_hash_hex(cfg);
  write_text_file(out.file("config.txt"), config_to_text(cfg));

  struct Row {
    std::string arena;
    int order;
    int res;
    std::map<std::string, double> residuals;
  };
  std::vector<Row> rows;

  auto torus_case = [&](int N, int order) {
    TorusGridState g = conformal_random_torus(N, 2.0 * kPi, order, 0.15, 2, cfg.seed);
    // add a mild anisotropic part so all components are exercised
    std::vector<double> g11 = g.g11, g12 = g.g12, g22 = g.g22;
    for (int i = 0; i < N; ++i)
      for (int j = 0; j < N; ++j) {
        const double x = 2.0 * kPi * i / N, y = 2.0 * kPi * j / N;
        g12[i * N + j] += 0.05 * std::sin(x) * std::sin(y);
        g11[i * N + j] *= 1.0 + 0.08 * std::cos(y);
      }
    MetricState s(TorusGridState(N, 2.0 * kPi, g11, g12, g22, order));
    ScalarField f(field_shape(s));
    for (int i = 0; i < N; ++i)
      for (int j = 0; j < N; ++j) {
        const double x = 2.0 * kPi * i / N, y = 2.0 * kPi * j / N;
        f.data[i * N + j] = 0.3 * std::sin(x) * std::cos(y) + 0.15 * std::cos(2 * y);
      }
    rows.push_back({"torus_grid", order, N, check_identities(s, f)});
  };
  auto axisym_case = [&](int M, int order) {
    MetricState s(perturbed_round_sphere(M, order, std::sqrt(2.0), 0.2, cfg.seed + 3));
    ScalarField f(field_shape(s));
    for (int j = 0; j < M; ++j) {
      const double th = kPi * j / (M - 1);
      f.data[j] = 0.4 * std::cos(th) + 0.2 * std::sin(th) * std::sin(th);
    }
    rows.push_back({"axisym_sphere", order, M, check_identities(s, f)});
  };
  for (int order : {2, 4}) {
    for (int N : {16, 32, 64}) torus_case(N, order);
    for (int M : {17, 33, 65}) axisym_case(M, order);
  }

  // residual table
  {
    std::ostringstream os;
    os << "arena,stencil_order,resolution,divfv,comm,fbochner,slin\n";
    for (const auto& r : rows)
      os << r.arena << ',' << r.order << ',' << r.res << ','
         << format_g17(r.residuals.at("divfv")) << ',' << format_g17(r.residuals.at("comm"))
         << ',' << format_g17(r.residuals.at("fbochner")) << ','
         << format_g17(r.residuals.at("slin")) << '\n';
    write_text_file(out.file("identity_residuals.csv"), os.str());
  }

  // fitted orders per arena / stencil order / identity
  std::vector<BoundCheckReport> reports;
  const char* anchors[4] = {"eq:divfv", "eq:commidentity", "eq:fbochner", "eq:slin"};
  const char* keys[4] = {"divfv", "comm", "fbochner", "slin"};
  for (const std::string arena : {"torus_grid", "axisym_sphere"}) {
    for (int order : {2, 4}) {
      for (int q = 0; q < 4; ++q) {
        std::vector<double> res;
        for (const auto& r : rows)
          if (r.arena == arena && r.order == order) res.push_back(r.residuals.at(keys[q]));
        BoundCheckReport rep;
        rep.id = "identity_order_" + std::string(keys[q]) + "_" + arena + "_o" +
                 std::to_string(order);
        rep.anchor = anchors[q];
        const double fitted = refinement_order(res);
        rep.fitted["order"] = fitted;
        rep.fitted["scheme_order"] = order;
        // pole-adjacent products cost one order on the axisym arena
        const double lo = arena == "torus_grid" ? order - 0.5 : order - 1.0;
        rep.verdict = fitted >= lo ? Verdict::holds : Verdict::violated;
        reports.push_back(rep);
      }
    }
  }
  write_report_json(out.file("report.json"), reports);
  for (const auto& r : reports) out.man.verdicts[r.id] = verdict_name(r.verdict);
  out.finish();
  return out.man;
}

int lab_threads() {
  const char* env = std::getenv("LAB_THREADS");
  if (!env) return 1;
  const int v = std::atoi(env);
  return v >= 1 ? v : 1;
}

}  // namespace

RunManifest run_experiment(const ExperimentConfig& cfg) {
  cfg.validate();
  if (cfg.out_dir.empty()) throw config_error("output directory not set");
  auto subs = expand_preset(cfg);
  if (!subs.empty()) {
    OutputWriter out(cfg.out_dir);
    out.man.config_hash = config_hash_hex(cfg);
    write_text_file(out.file("config.txt"), config_to_text(cfg));
    const int threads = lab_threads();
    std::vector<std::pair<std::string, std::future<RunManifest>>> running;
    std::vector<std::pair<std::string, RunManifest>> done;
    for (auto& [name, sub] : subs) {
      sub.out_dir = (fs::path(cfg.out_dir) / name).string();
      if (threads > 1) {
        running.emplace_back(name, std::async(std::launch::async, run_experiment, sub));
        if (static_cast<int>(running.size()) >= threads) {
          done.emplace_back(running.front().first, running.front().second.get());
          running.erase(running.begin());
        }
      } else {
        done.emplace_back(name, run_experiment(sub));
      }
    }
    for (auto& [name, fut] : running) done.emplace_back(name, fut.get());
    for (const auto& [name, man] : done) {
      for (const auto& [id, v] : man.verdicts) out.man.verdicts[name + "/" + id] = v;
      if (!man.abort_reason.empty())
        out.man.abort_reason += name + ": " + man.abort_reason + "; ";
    }
    out.finish();
    return out.man;
  }
  switch (cfg.task) {
    case ExperimentConfig::Task::flow: return run_flow_task(cfg);
    case ExperimentConfig::Task::gauge_pair: return run_gauge_task(cfg);
    case ExperimentConfig::Task::identity_refinement: return run_identity_task(cfg);
  }
  throw config_error("task: unresolved");
}

namespace {

std::vector<fs::path> snapshot_files(const fs::path& dir) {
  std::vector<fs::path> snaps;
  for (const auto& e : fs::directory_iterator(dir)) {
    const std::string name = e.path().filename().string();
    if (name.rfind("state_", 0) == 0 && name.size() > 11 &&
        name.substr(name.size() - 5) == ".json")
      snaps.push_back(e.path());
  }
  std::sort(snaps.begin(), snaps.end());
  return snaps;
}

Trajectory rebuild_from_snapshots(const ExperimentConfig& cfg,
                                  const std::vector<fs::path>& snaps, Snapshot& last) {
  Trajectory traj;
  traj.config = cfg.flow;
  for (const auto& p : snaps) {
    Snapshot s = read_snapshot(p.string());
    EntropySolution es =
        minimize_entropy(s.record.state, cfg.flow.entropy_cfg, &s.record.entropy.f);
    traj.records.push_back({s.record.t, s.record.state, std::move(es)});
    last = std::move(s);
  }
  traj.stats = last.stats;
  return traj;
}

}  // namespace

RunManifest resume_experiment(const std::string& out_dir) {
  const fs::path dir(out_dir);
  if (!fs::exists(dir / "config.txt"))
    throw io_error("resume: no config.txt under " + out_dir);
  ExperimentConfig cfg = config_from_text(read_text_file((dir / "config.txt").string()));
  cfg.out_dir = out_dir;
  if (!expand_preset(cfg).empty() || cfg.task != ExperimentConfig::Task::flow) {
    // multi-run and non-flow tasks are cheap and deterministic: redo them
    return run_experiment(cfg);
  }
  auto snaps = snapshot_files(dir);
  if (snaps.empty()) return run_experiment(cfg);

  OutputWriter out(out_dir);
  out.man.config_hash = config_hash_hex(cfg);
  out.man.files.push_back("config.txt");
  for (const auto& p : snaps) out.man.files.push_back(p.filename().string());

  Snapshot last;
  Trajectory traj = rebuild_from_snapshots(cfg, snaps, last);

  // continue integrating from the last snapshot
  std::string abort_reason;
  try {
    MetricState state = last.record.state;
    double t = last.record.t;
    ScalarField warm = traj.records.back().entropy.f;
    long steps_since_record = 0;
    TrajectoryRecord prev_rec = traj.records.back();
    int record_index = last.record_index;
    const double t_done = cfg.flow.t_end - 1e-12 * std::max(1.0, cfg.flow.t_end);
    while (t < t_done) {
      StepResult sr = step(state, cfg.flow, &warm, cfg.flow.t_end - t);
      state = std::move(sr.state);
      t += sr.dt_used;
      traj.stats.accepted += 1;
      traj.stats.rejected += sr.rejections;
      traj.stats.max_pole_projection =
          std::max(traj.stats.max_pole_projection, sr.pole_projection);
      if (cfg.flow.kind == FlowConfig::Kind::mrf) warm = sr.f_warm;
      ++steps_since_record;
      if (steps_since_record >= cfg.flow.output_stride || t >= t_done) {
        EntropySolution es = minimize_entropy(state, cfg.flow.entropy_cfg, &warm);
        warm = es.f;
        traj.records.push_back({t, state, std::move(es)});
        ++record_index;
        steps_since_record = 0;
        if (record_index % cfg.snapshot_stride == 0) {
          Snapshot snap;
          snap.record_index = record_index;
          snap.record = traj.records.back();
          snap.stats = traj.stats;
          snap.prev_t = prev_rec.t;
          snap.prev_state = prev_rec.state;
          snap.prev_f = prev_rec.entropy.f;
          write_snapshot(out.file(snapshot_name(record_index)), snap);
        }
        prev_rec = traj.records.back();
      }
    }
  } catch (const error& e) {
    abort_reason = e.what();
  }

  FlowAnalysis an = analyze(traj);
  write_trajectory_csv(out.file("trajectory.csv"), an.records);
  emit_plots(out, an.records);
  if (abort_reason.empty()) {
    std::vector<BoundCheckReport> reports = flow_reports(cfg, traj, an);
    if (cfg.einstein_pipeline) {
      auto er = einstein_reports(cfg, traj, out);
      reports.insert(reports.end(), er.begin(), er.end());
    }
    write_report_json(out.file("report.json"), reports);
    for (const auto& r : reports) out.man.verdicts[r.id] = verdict_name(r.verdict);
  }
  out.man.abort_reason = abort_reason;
  out.finish();
  return out.man;
}

RunManifest report_experiment(const std::string& out_dir) {
  const fs::path dir(out_dir);
  if (!fs::exists(dir / "config.txt"))
    throw io_error("report: no config.txt under " + out_dir);
  ExperimentConfig cfg = config_from_text(read_text_file((dir / "config.txt").string()));
  cfg.out_dir = out_dir;
  if (!expand_preset(cfg).empty()) {
    OutputWriter out(out_dir);
    out.man.config_hash = config_hash_hex(cfg);
    out.man.files.push_back("config.txt");
    for (const auto& e : fs::directory_iterator(dir)) {
      if (!e.is_directory()) continue;
      RunManifest sub = report_experiment(e.path().string());
      const std::string name = e.path().filename().string();
      for (const auto& [id, v] : sub.verdicts) out.man.verdicts[name + "/" + id] = v;
    }
    out.finish();
    return out.man;
  }
  if (cfg.task != ExperimentConfig::Task::flow) return run_experiment(cfg);

  auto snaps = snapshot_files(dir);
  if (snaps.empty()) throw io_error("report: no stored snapshots under " + out_dir);
  OutputWriter out(out_dir);
  out.man.config_hash = config_hash_hex(cfg);
  out.man.files.push_back("config.txt");
  for (const auto& p : snaps) out.man.files.push_back(p.filename().string());
  Snapshot last;
  Trajectory traj = rebuild_from_snapshots(cfg, snaps, last);
  FlowAnalysis an = analyze(traj);
  emit_plots(out, an.records);
  if (traj.size() >= 4) {
    std::vector<BoundCheckReport> reports = flow_reports(cfg, traj, an);
    if (cfg.einstein_pipeline) {
      auto er = einstein_reports(cfg, traj, out);
      reports.insert(reports.end(), er.begin(), er.end());
    }
    write_report_json(out.file("report.json"), reports);
    for (const auto& r : reports) out.man.verdicts[r.id] = verdict_name(r.verdict);
  }
  out.finish();
  return out.man;
}

}  // namespace rflab
