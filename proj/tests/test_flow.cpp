#include <doctest.h>

#include <cmath>

#include "rflab/diagnostics.hpp"
#include "rflab/fit.hpp"
#include "rflab/flow.hpp"
#include "test_helpers.hpp"

using namespace rflab;
using namespace rflab::testing;

namespace {

FlowConfig quick_cfg(FlowConfig::Kind kind, double t_end, int stride,
                     double tol = 1e-7, double dt = 1.0) {
  FlowConfig cfg;
  cfg.kind = kind;
  cfg.dt_init = dt;
  cfg.t_end = t_end;
  cfg.output_stride = stride;
  cfg.entropy_cfg.tol = tol;
  return cfg;
}

}  // namespace

TEST_CASE("rhs_nrf: fixed point, round-family ODE, 2-D conformality") {
  // Einstein fixed point: rhs vanishes identically
  RoundFamilyState fixed(2, -1, 1.0);
  SymTensorField r0 = rhs_nrf(MetricState(fixed));
  CHECK(std::abs(r0.at(0, 0)) <= 1e-15);

  // dc/dt = -sigma (c - 1), checked at three scales per sigma
  for (int sig : {-1, 0, 1})
    for (double c : {0.5, 1.3, 2.7}) {
      RoundFamilyState r(2, sig, c);
      MetricState s(r);
      std::vector<double> v = component_velocity(s, rhs_nrf(s));
      CHECK(v[0] == doctest::Approx(-sig * (c - 1.0)).epsilon(1e-13).scale(1.0));
    }

  // in 2-D the rhs is pointwise conformal to g
  MetricState tor(bumpy_torus(24, 2));
  SymTensorField rhs = rhs_nrf(tor);
  CurvatureBundle cb = curvature(tor);
  SymTensorField g = metric_tensor(tor);
  double mx = 0;
  for (int p = 0; p < field_shape(tor).nodes(); ++p) {
    const double lam = -(cb.R.data[p] + 0.0);  // sigma = 0
    for (int c = 0; c < 3; ++c)
      mx = std::max(mx, std::abs(rhs.at(c, p) - lam * g.at(c, p)));
  }
  CHECK(mx <= 1e-12);
}

TEST_CASE("rhs_mrf on the round family follows the same ODE") {
  for (int sig : {-1, 0, 1}) {
    const double c = 1.4;
    RoundFamilyState r(2, sig, c);
    MetricState s(r);
    EntropySolution es = minimize_entropy(s, default_solver_config(s));
    std::vector<double> v = component_velocity(s, rhs_mrf(s, es));
    CHECK(v[0] == doctest::Approx(-sig * (c - 1.0)).epsilon(1e-12).scale(1.0));
  }
}

TEST_CASE("step: zero rhs leaves the state exactly unchanged") {
  MetricState s(TorusGridState::flat(16, 2 * kPi, 2));
  FlowConfig cfg = quick_cfg(FlowConfig::Kind::nrf, 1.0, 1);
  StepResult sr = step(s, cfg);
  std::vector<double> a = metric_components(s);
  std::vector<double> b = metric_components(sr.state);
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i] == b[i]);
}

TEST_CASE("RK4 order of accuracy against the exact round-family solution") {
  // c(t) = 1 + (c0 - 1) e^{-sigma t}
  const double c0 = 1.2, T = 1.0;
  const int sig = 1;
  std::vector<double> errs;
  for (double dt : {0.1, 0.05, 0.025}) {
    FlowConfig cfg = quick_cfg(FlowConfig::Kind::nrf, T, 1000, 1e-9, dt);
    Trajectory traj = run(MetricState(RoundFamilyState(2, sig, c0)), cfg);
    const double c_num = std::get<RoundFamilyState>(traj.records.back().state).c;
    const double c_exact = 1.0 + (c0 - 1.0) * std::exp(-sig * T);
    errs.push_back(std::abs(c_num - c_exact));
  }
  const double p = refinement_order(errs);
  CHECK(p >= 3.7);
  CHECK(p <= 4.3);
  // halving dt cuts the error by about sixteen
  CHECK(errs[0] / errs[1] == doctest::Approx(16.0).epsilon(0.5));
}

TEST_CASE("run: static soliton data stays static to 1e-9") {
  FlowConfig cfg = quick_cfg(FlowConfig::Kind::mrf, 5.0, 100, 1e-9, 5e-3);
  Trajectory traj = run(MetricState(RoundFamilyState(2, -1, 1.0)), cfg);
  const std::vector<double> c0 = metric_components(traj.records.front().state);
  for (const auto& rec : traj.records) {
    const std::vector<double> c = metric_components(rec.state);
    for (std::size_t i = 0; i < c.size(); ++i) CHECK(std::abs(c[i] - c0[i]) <= 1e-9);
  }
  // flat torus is an exact discrete fixed point as well
  FlowConfig cfg2 = quick_cfg(FlowConfig::Kind::mrf, 1.0, 50, 1e-7);
  Trajectory traj2 = run(MetricState(TorusGridState::flat(16, 2 * kPi, 2)), cfg2);
  const std::vector<double> d0 = metric_components(traj2.records.front().state);
  const std::vector<double> d1 = metric_components(traj2.records.back().state);
  for (std::size_t i = 0; i < d0.size(); ++i) CHECK(std::abs(d1[i] - d0[i]) <= 1e-9);
}

TEST_CASE("run: perturbed flat torus has mu increasing to 0 from below") {
  MetricState s0(conformal_mode_torus(24, 2 * kPi, 2, 0.05, 1, 0));
  FlowConfig cfg = quick_cfg(FlowConfig::Kind::mrf, 1.5, 10);
  Trajectory traj = run(s0, cfg);
  REQUIRE(traj.size() >= 4);
  double prev = -1e300;
  for (const auto& rec : traj.records) {
    CHECK(rec.entropy.mu >= prev - 1e-9);
    prev = rec.entropy.mu;
    CHECK(rec.entropy.mu < 0);
  }
  CHECK(traj.records.back().entropy.mu > traj.records.front().entropy.mu);
}

TEST_CASE("run: round family reaches the exact solution at t = 5") {
  FlowConfig cfg = quick_cfg(FlowConfig::Kind::mrf, 5.0, 100, 1e-9, 5e-3);
  Trajectory traj = run(MetricState(RoundFamilyState(2, 1, 1.2)), cfg);
  const double c5 = std::get<RoundFamilyState>(traj.records.back().state).c;
  CHECK(std::abs(c5 - (1.0 + 0.2 * std::exp(-5.0))) <= 1e-8);
}

TEST_CASE("homothety conversion") {
  // static sigma=-1 fixed point converts to the linearly shrinking solution
  FlowConfig cfg = quick_cfg(FlowConfig::Kind::nrf, 0.8, 10, 1e-9, 5e-3);
  Trajectory traj = run(MetricState(RoundFamilyState(2, -1, 1.0)), cfg);
  Trajectory unnorm = homothety_convert(traj, HomothetyDirection::to_unnormalized);
  for (const auto& rec : unnorm.records) {
    const double c = std::get<RoundFamilyState>(rec.state).c;
    CHECK(c == doctest::Approx(1.0 - rec.t).epsilon(1e-10));
  }

  // converting forward and back reproduces the trajectory
  Trajectory back = homothety_convert(unnorm, HomothetyDirection::to_normalized);
  REQUIRE(back.size() == traj.size());
  for (int k = 0; k < traj.size(); ++k) {
    CHECK(back.records[k].t == doctest::Approx(traj.records[k].t).epsilon(1e-12));
    const double ca = std::get<RoundFamilyState>(back.records[k].state).c;
    const double cb = std::get<RoundFamilyState>(traj.records[k].state).c;
    CHECK(ca == doctest::Approx(cb).epsilon(1e-12));
  }

  // the converted trajectory satisfies the unnormalized flow in finite
  // differences: dc~/dt~ = sigma exactly on the round family
  Trajectory moving = run(MetricState(RoundFamilyState(2, -1, 1.3)), cfg);
  Trajectory un2 = homothety_convert(moving, HomothetyDirection::to_unnormalized);
  for (int k = 1; k + 1 < un2.size(); ++k) {
    const double cm = std::get<RoundFamilyState>(un2.records[k - 1].state).c;
    const double cp = std::get<RoundFamilyState>(un2.records[k + 1].state).c;
    const double c1 = std::get<RoundFamilyState>(un2.records[k].state).c;
    const double d = centered_derivative(un2.records[k - 1].t, un2.records[k].t,
                                         un2.records[k + 1].t, cm, c1, cp);
    CHECK(d == doctest::Approx(-1.0).epsilon(1e-6));
  }

  // sigma = 0 is unsupported
  FlowConfig cfg0 = quick_cfg(FlowConfig::Kind::nrf, 0.2, 5);
  Trajectory flat = run(MetricState(TorusGridState::flat(16, 2 * kPi, 2)), cfg0);
  CHECK_THROWS_AS((void)homothety_convert(flat, HomothetyDirection::to_unnormalized),
                  unsupported_error);
}

TEST_CASE("gauge experiment: invariants agree, conformal class behavior differs") {
  MetricState s0(conformal_mode_torus(32, 2 * kPi, 4, 0.02, 1, 0));
  FlowConfig cfg = quick_cfg(FlowConfig::Kind::mrf, 1.0, 10);
  GaugePair pair = gauge_experiment(s0, cfg);
  REQUIRE(pair.nrf_inv.size() == pair.mrf_inv.size());
  for (std::size_t k = 0; k < pair.nrf_inv.size(); ++k) {
    const auto& a = pair.nrf_inv[k];
    const auto& b = pair.mrf_inv[k];
    CHECK(a.t == doctest::Approx(b.t).epsilon(1e-12));
    CHECK(std::abs(a.mu - b.mu) <=
          0.01 * std::max({std::abs(a.mu), std::abs(b.mu), 1e-12}));
    CHECK(std::abs(a.E - b.E) <= 0.01 * std::max({a.E, b.E, 1e-300}));
  }

  // nrf keeps conformal data conformal; mrf leaves the conformal class
  auto anisotropy = [](const MetricState& s) {
    const auto& t = std::get<TorusGridState>(s);
    double mx = 0;
    for (std::size_t p = 0; p < t.g11.size(); ++p)
      mx = std::max({mx, std::abs(t.g11[p] - t.g22[p]), std::abs(t.g12[p])});
    return mx;
  };
  // initial data: g11 = g22, g12 = 0
  CHECK(anisotropy(pair.nrf_traj.records.front().state) <= 1e-15);
  CHECK(anisotropy(pair.nrf_traj.records.back().state) <= 1e-12);
  CHECK(anisotropy(pair.mrf_traj.records.back().state) >= 1e-6);
}

TEST_CASE("entropy constancy characterizes static mrf trajectories") {
  FlowConfig cfg = quick_cfg(FlowConfig::Kind::mrf, 5.0, 100, 1e-9, 5e-3);
  Trajectory traj = run(MetricState(RoundFamilyState(3, -1, 1.0)), cfg);
  const double dmu =
      traj.records.back().entropy.mu - traj.records.front().entropy.mu;
  REQUIRE(std::abs(dmu) <= 1e-10);
  double smax = 0;
  for (const auto& rec : traj.records)
    smax = std::max(smax, sup_norm(rec.state, rec.entropy.S));
  CHECK(smax <= 1e-5);
}

TEST_CASE("axisym flow applies the pole projection and keeps regularity") {
  MetricState s0(perturbed_round_sphere(33, 2, std::sqrt(2.0), 0.05, 3));
  FlowConfig cfg = quick_cfg(FlowConfig::Kind::mrf, 0.05, 5);
  Trajectory traj = run(s0, cfg);
  CHECK(traj.stats.accepted > 0);
  const auto& last = std::get<AxisymSphereState>(traj.records.back().state);
  CHECK(last.a[0] == doctest::Approx(last.beta[0]).epsilon(1e-12));
  CHECK(last.a[last.M - 1] == doctest::Approx(last.beta[last.M - 1]).epsilon(1e-12));
}

TEST_CASE("perturbation library is deterministic in the seed") {
  TorusGridState a = conformal_random_torus(16, 2 * kPi, 2, 0.05, 3, 42);
  TorusGridState b = conformal_random_torus(16, 2 * kPi, 2, 0.05, 3, 42);
  TorusGridState c = conformal_random_torus(16, 2 * kPi, 2, 0.05, 3, 43);
  CHECK(a.g11 == b.g11);
  CHECK(a.g11 != c.g11);
  AxisymSphereState p = perturbed_round_sphere(33, 2, 1.0, 0.1, 7);
  AxisymSphereState q = perturbed_round_sphere(33, 2, 1.0, 0.1, 7);
  CHECK(p.a == q.a);
  CHECK(p.beta == q.beta);
}

TEST_CASE("cfl bound scales with the metric") {
  MetricState s1(TorusGridState::flat(32, 2 * kPi, 2));
  const double b1 = cfl_bound(s1, 0.8);
  const double h = 2 * kPi / 32;
  CHECK(b1 == doctest::Approx(0.8 * h * h / 4.0).epsilon(1e-12));
  // doubling g halves g^{-1} and doubles the admissible step
  const std::size_t n = 32 * 32;
  MetricState s2(TorusGridState(32, 2 * kPi, std::vector<double>(n, 2.0),
                                std::vector<double>(n, 0.0), std::vector<double>(n, 2.0), 2));
  CHECK(cfl_bound(s2, 0.8) == doctest::Approx(2 * b1).epsilon(1e-12));
}
