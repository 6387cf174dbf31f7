#include "rflab/flow.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "rflab/errors.hpp"
#include "rflab/rng.hpp"

namespace rflab {

namespace {
constexpr double kPi = 3.14159265358979323846;
constexpr double kDtUnderflow = 1e-12;
}  // namespace

void FlowConfig::validate() const {
  if (!(dt_init > 0)) throw config_error("flow config: dt_init must be positive");
  if (!(t_end > 0)) throw config_error("flow config: t_end must be positive");
  if (!(cfl_safety > 0) || cfl_safety > 1.0)
    throw config_error("flow config: cfl_safety must lie in (0, 1]");
  if (output_stride < 1) throw config_error("flow config: output_stride must be >= 1");
  entropy_cfg.validate();
}

SymTensorField rhs_nrf(const MetricState& s) {
  CurvatureBundle cb = curvature(s);
  SymTensorField out = cb.Rc;
  SymTensorField g = metric_tensor(s);
  axpy(0.5 * sigma_of(s), g, out);
  scale(-2.0, out);
  return out;
}

SymTensorField rhs_mrf(const MetricState& s, const EntropySolution& es) {
  SymTensorField out = es.S;
  scale(-2.0, out);
  return out;
}

double cfl_bound(const MetricState& s, double cfl_safety) {
  if (std::holds_alternative<RoundFamilyState>(s))
    return std::numeric_limits<double>::infinity();
  double inv_scale = 0.0;  // largest eigenvalue of g^{-1}
  if (auto* t = std::get_if<TorusGridState>(&s)) {
    const auto& G = t->geom;
    for (std::size_t p = 0; p < t->g11.size(); ++p) {
      const double tr = G.inv11[p] + G.inv22[p];
      const double det = 1.0 / G.det[p];
      const double lam = 0.5 * (tr + std::sqrt(std::max(tr * tr - 4.0 * det, 0.0)));
      inv_scale = std::max(inv_scale, lam);
    }
  } else {
    const auto& a = std::get<AxisymSphereState>(s);
    for (int j = 0; j < a.M; ++j) inv_scale = std::max(inv_scale, 1.0 / a.a[j]);
  }
  const double h = grid_spacing(s);
  return cfl_safety * h * h / (4.0 * inv_scale);
}

namespace {

struct RhsEval {
  std::vector<double> velocity;
  ScalarField f;  // minimizer used (mrf only)
};

RhsEval eval_rhs(const MetricState& s, const FlowConfig& cfg, const ScalarField* warm_f) {
  RhsEval out;
  if (cfg.kind == FlowConfig::Kind::nrf) {
    out.velocity = component_velocity(s, rhs_nrf(s));
    return out;
  }
  EntropySolution es = minimize_entropy(s, cfg.entropy_cfg, warm_f);
  out.velocity = component_velocity(s, rhs_mrf(s, es));
  out.f = es.f;
  return out;
}

// Enforce a(0)=beta(0), a(pi)=beta(pi) on axisym states; returns the
// projection magnitude.
double project_poles(MetricState& s) {
  auto* a = std::get_if<AxisymSphereState>(&s);
  if (!a) return 0.0;
  double mag = 0.0;
  std::vector<double> av = a->a, bv = a->beta;
  for (int side = 0; side < 2; ++side) {
    const int j = side == 0 ? 0 : a->M - 1;
    const double mean = 0.5 * (av[j] + bv[j]);
    mag = std::max(mag, std::abs(av[j] - bv[j]));
    av[j] = bv[j] = mean;
  }
  if (mag > 0) s = AxisymSphereState(a->M, av, bv, a->stencil_order);
  return mag;
}

}  // namespace

StepResult step(const MetricState& s, const FlowConfig& cfg, const ScalarField* warm_f,
                double dt_cap) {
  cfg.validate();
  double dt = std::min(cfg.dt_init, cfl_bound(s, cfg.cfl_safety));
  if (dt_cap > 0) dt = std::min(dt, dt_cap);

  const std::vector<double> y0 = metric_components(s);
  StepResult res;
  const ScalarField* stage_warm = warm_f;
  RhsEval k1 = eval_rhs(s, cfg, stage_warm);

  for (;;) {
    if (dt < kDtUnderflow)
      throw stiffness_error("step: dt underflow below 1e-12 (parabolic stiffness or "
                            "degenerating metric)");
    try {
      auto advance = [&](const std::vector<double>& k, double fac) {
        std::vector<double> y = y0;
        for (std::size_t i = 0; i < y.size(); ++i) y[i] += fac * dt * k[i];
        return with_metric_components(s, y);
      };
      const ScalarField* w1 = cfg.kind == FlowConfig::Kind::mrf ? &k1.f : nullptr;

      MetricState s2 = advance(k1.velocity, 0.5);
      RhsEval k2 = eval_rhs(s2, cfg, w1);
      const ScalarField* w2 = cfg.kind == FlowConfig::Kind::mrf ? &k2.f : nullptr;

      MetricState s3 = advance(k2.velocity, 0.5);
      RhsEval k3 = eval_rhs(s3, cfg, w2);
      const ScalarField* w3 = cfg.kind == FlowConfig::Kind::mrf ? &k3.f : nullptr;

      MetricState s4 = advance(k3.velocity, 1.0);
      RhsEval k4 = eval_rhs(s4, cfg, w3);

      std::vector<double> y = y0;
      for (std::size_t i = 0; i < y.size(); ++i)
        y[i] += dt / 6.0 * (k1.velocity[i] + 2.0 * k2.velocity[i] + 2.0 * k3.velocity[i] +
                            k4.velocity[i]);
      MetricState s_new = with_metric_components(s, y);
      res.pole_projection = project_poles(s_new);
      res.state = std::move(s_new);
      res.dt_used = dt;
      res.f_warm = cfg.kind == FlowConfig::Kind::mrf ? k4.f : ScalarField(field_shape(s));
      return res;
    } catch (const degenerate_metric_error&) {
      dt *= 0.5;
      ++res.rejections;
    }
  }
}

Trajectory run(const MetricState& initial, const FlowConfig& cfg,
               const RecordObserver& observer) {
  cfg.validate();
  Trajectory traj;
  traj.config = cfg;

  ScalarField warm = ScalarField(field_shape(initial));
  bool have_warm = false;

  auto record = [&](double t, const MetricState& st) {
    EntropySolution es = minimize_entropy(st, cfg.entropy_cfg, have_warm ? &warm : nullptr);
    warm = es.f;
    have_warm = true;
    traj.records.push_back({t, st, std::move(es)});
    if (observer)
      observer(static_cast<int>(traj.records.size()) - 1, traj.records.back(), traj.stats);
  };

  MetricState state = initial;
  double t = 0.0;
  record(t, state);

  long steps_since_record = 0;
  const double t_done = cfg.t_end - 1e-12 * std::max(1.0, cfg.t_end);
  while (t < t_done) {
    StepResult sr = step(state, cfg, have_warm ? &warm : nullptr, cfg.t_end - t);
    state = std::move(sr.state);
    t += sr.dt_used;
    traj.stats.accepted += 1;
    traj.stats.rejected += sr.rejections;
    traj.stats.max_pole_projection =
        std::max(traj.stats.max_pole_projection, sr.pole_projection);
    if (cfg.kind == FlowConfig::Kind::mrf) {
      warm = sr.f_warm;
      have_warm = true;
    }
    ++steps_since_record;
    if (steps_since_record >= cfg.output_stride || t >= t_done) {
      record(t, state);
      steps_since_record = 0;
    }
  }
  return traj;
}

Trajectory homothety_convert(const Trajectory& traj, HomothetyDirection dir) {
  if (traj.records.empty()) throw error("homothety_convert: empty trajectory");
  const int sig = sigma_of(traj.records.front().state);
  if (sig == 0)
    throw unsupported_error(
        "homothety_convert: sigma = 0 (the normalized and unnormalized flows coincide)");

  Trajectory out;
  out.config = traj.config;
  out.stats = traj.stats;
  const double s = sig;
  ScalarField warm;
  bool have_warm = false;
  for (const auto& rec : traj.records) {
    double t_new, lambda;
    if (dir == HomothetyDirection::to_unnormalized) {
      // t~ = (e^{sigma t} - 1)/sigma, scale e^{sigma t}
      t_new = (std::exp(s * rec.t) - 1.0) / s;
      lambda = std::exp(s * rec.t);
    } else {
      const double arg = 1.0 + s * rec.t;
      if (!(arg > 0))
        throw unsupported_error("homothety_convert: time outside the remapped domain");
      t_new = std::log(arg) / s;
      lambda = 1.0 / arg;
    }
    std::vector<double> comps = metric_components(rec.state);
    if (std::holds_alternative<AxisymSphereState>(rec.state) ||
        std::holds_alternative<TorusGridState>(rec.state) ||
        std::holds_alternative<RoundFamilyState>(rec.state)) {
      for (auto& c : comps) c *= lambda;  // metric components scale linearly
    }
    MetricState scaled = with_metric_components(rec.state, comps);
    // warm start: under g -> lambda g the constraint shifts f by (n/2) log lambda
    ScalarField f0 = rec.entropy.f;
    const double shift = 0.5 * dimension_of(rec.state) * std::log(lambda);
    for (auto& v : f0.data) v += shift;
    warm = f0;
    have_warm = true;
    EntropySolution es = minimize_entropy(scaled, traj.config.entropy_cfg,
                                          have_warm ? &warm : nullptr);
    out.records.push_back({t_new, std::move(scaled), std::move(es)});
  }
  return out;
}

DiffInvariants diff_invariants(double t, const MetricState& s, const EntropySolution& es) {
  DiffInvariants d;
  d.t = t;
  d.mu = es.mu;
  WeightedMeasure m = weighted_measure(s, es.f);
  d.E = inner(s, es.S, es.S, m);
  CurvatureBundle cb = curvature(s);
  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  for (double v : cb.R.data) {
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  d.min_R = lo;
  d.max_R = hi;
  d.volume = volume_measure(s).mass;
  return d;
}

GaugePair gauge_experiment(const MetricState& initial, FlowConfig cfg) {
  // Lock a common fixed step so both trajectories share the time grid.
  const double dt = std::min(cfg.dt_init, 0.9 * cfl_bound(initial, cfg.cfl_safety));
  cfg.dt_init = dt;
  GaugePair pair;
  FlowConfig nrf_cfg = cfg;
  nrf_cfg.kind = FlowConfig::Kind::nrf;
  FlowConfig mrf_cfg = cfg;
  mrf_cfg.kind = FlowConfig::Kind::mrf;
  pair.nrf_traj = run(initial, nrf_cfg);
  pair.mrf_traj = run(initial, mrf_cfg);
  for (const auto& rec : pair.nrf_traj.records)
    pair.nrf_inv.push_back(diff_invariants(rec.t, rec.state, rec.entropy));
  for (const auto& rec : pair.mrf_traj.records)
    pair.mrf_inv.push_back(diff_invariants(rec.t, rec.state, rec.entropy));
  if (pair.nrf_traj.size() != pair.mrf_traj.size())
    throw error("gauge_experiment: trajectories ended with different record counts");
  return pair;
}

// --- initial data -----------------------------------------------------------

TorusGridState conformal_mode_torus(int N, double L, int stencil_order, double eps,
                                    int kx, int ky) {
  std::vector<double> g11(N * N), g12(N * N, 0.0), g22(N * N);
  for (int i = 0; i < N; ++i)
    for (int j = 0; j < N; ++j) {
      const double x = i * L / N, y = j * L / N;
      const double u = eps * std::sin(2.0 * kPi * (kx * x + ky * y) / L);
      g11[i * N + j] = g22[i * N + j] = std::exp(2.0 * u);
    }
  return TorusGridState(N, L, std::move(g11), std::move(g12), std::move(g22), stencil_order);
}

TorusGridState conformal_random_torus(int N, double L, int stencil_order, double eps,
                                      int kmax, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<double> u(N * N, 0.0);
  double sup = 0.0;
  for (int kx = -kmax; kx <= kmax; ++kx)
    for (int ky = 0; ky <= kmax; ++ky) {
      if (ky == 0 && kx <= 0) continue;  // one representative per +/- pair
      const double amp = rng.normal() / (1.0 + kx * kx + ky * ky);
      const double phase = rng.uniform(0.0, 2.0 * kPi);
      for (int i = 0; i < N; ++i)
        for (int j = 0; j < N; ++j) {
          const double x = i * L / N, y = j * L / N;
          u[i * N + j] += amp * std::cos(2.0 * kPi * (kx * x + ky * y) / L + phase);
        }
    }
  for (double v : u) sup = std::max(sup, std::abs(v));
  const double fac = sup > 0 ? eps / sup : 0.0;
  std::vector<double> g11(N * N), g12(N * N, 0.0), g22(N * N);
  for (int p = 0; p < N * N; ++p) g11[p] = g22[p] = std::exp(2.0 * fac * u[p]);
  return TorusGridState(N, L, std::move(g11), std::move(g12), std::move(g22), stencil_order);
}

TorusGridState anisotropic_mode_torus(int N, double L, int stencil_order, double eps,
                                      int kx, int ky) {
  std::vector<double> g11(N * N), g12(N * N, 0.0), g22(N * N);
  for (int i = 0; i < N; ++i)
    for (int j = 0; j < N; ++j) {
      const double x = i * L / N, y = j * L / N;
      const double b = eps * std::cos(2.0 * kPi * (kx * x + ky * y) / L);
      g11[i * N + j] = 1.0 + b;
      g22[i * N + j] = 1.0 - b;
    }
  return TorusGridState(N, L, std::move(g11), std::move(g12), std::move(g22), stencil_order);
}

AxisymSphereState perturbed_round_sphere(int M, int stencil_order, double r, double eps,
                                         std::uint64_t seed) {
  Rng rng(seed);
  const double c1 = rng.uniform(-1.0, 1.0), c2 = rng.uniform(-1.0, 1.0);
  const double d1 = rng.uniform(-1.0, 1.0), d2 = rng.uniform(-1.0, 1.0);
  std::vector<double> av(M), bv(M);
  for (int j = 0; j < M; ++j) {
    const double th = kPi * j / (M - 1);
    const double s2 = std::sin(th) * std::sin(th);
    const double ct = std::cos(th);
    // sin^2(theta) * poly(cos theta) keeps the data smooth and pole-regular
    av[j] = r * r * (1.0 + eps * s2 * (c1 + c2 * ct));
    bv[j] = r * r * (1.0 + eps * s2 * (d1 + d2 * ct));
  }
  return AxisymSphereState(M, std::move(av), std::move(bv), stencil_order);
}

}  // namespace rflab
