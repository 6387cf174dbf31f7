#pragma once

#include <cstdint>
#include <functional>
#include <utility>
#include <vector>

#include "rflab/entropy.hpp"

namespace rflab {

struct FlowConfig {
  enum class Kind { nrf, mrf };
  Kind kind = Kind::mrf;
  double dt_init = 5e-3;
  double t_end = 1.0;
  double cfl_safety = 0.8;   // dt <= cfl_safety * h^2 / (4 * sup g^{-1}-scale)
  int output_stride = 10;    // record every this many accepted steps
  SolverConfig entropy_cfg;

  void validate() const;
};

struct StepStats {
  long accepted = 0;
  long rejected = 0;
  double max_pole_projection = 0.0;  // axisym regularity projection magnitude
};

struct TrajectoryRecord {
  double t = 0.0;
  MetricState state;
  EntropySolution entropy;
};

struct Trajectory {
  FlowConfig config;
  std::vector<TrajectoryRecord> records;
  StepStats stats;

  double t_begin() const { return records.front().t; }
  double t_end() const { return records.back().t; }
  int size() const { return static_cast<int>(records.size()); }
};

// -2 (Rc + (sigma/2) g)
SymTensorField rhs_nrf(const MetricState& s);
// -2 S(g, f_g)
SymTensorField rhs_mrf(const MetricState& s, const EntropySolution& es);

// Parabolic step-size bound for the explicit scheme on grid arenas
// (infinity for the closed-form ODE arena).
double cfl_bound(const MetricState& s, double cfl_safety);

struct StepResult {
  MetricState state;
  double dt_used = 0.0;
  long rejections = 0;
  double pole_projection = 0.0;
  ScalarField f_warm;  // entropy warm start after the step (mrf)
};

// One accepted classical RK4 step. For mrf the entropy minimizer is re-solved
// at every substage, warm started; `warm_f` seeds the first substage.
// Positive-definiteness failures reject the step and halve dt; dt underflow
// below 1e-12 aborts with a stiffness error.
StepResult step(const MetricState& s, const FlowConfig& cfg,
                const ScalarField* warm_f = nullptr, double dt_cap = 0.0);

using RecordObserver =
    std::function<void(int record_index, const TrajectoryRecord& rec, const StepStats& stats)>;

Trajectory run(const MetricState& initial, const FlowConfig& cfg,
               const RecordObserver& observer = {});

// Homothety correspondence with the unnormalized Ricci flow (sigma != 0):
//   gt(t~) = (1 + sigma t~) g(log(1 + sigma t~)/sigma),  t~ = (e^{sigma t}-1)/sigma.
enum class HomothetyDirection { to_unnormalized, to_normalized };
Trajectory homothety_convert(const Trajectory& traj, HomothetyDirection dir);

struct DiffInvariants {
  double t = 0, mu = 0, E = 0, min_R = 0, max_R = 0, volume = 0;
};

struct GaugePair {
  Trajectory nrf_traj;
  Trajectory mrf_traj;
  std::vector<DiffInvariants> nrf_inv;
  std::vector<DiffInvariants> mrf_inv;
};

// Runs both flows from the same initial data on the same (fixed-dt) time grid
// and records diffeomorphism-invariant scalars for each.
GaugePair gauge_experiment(const MetricState& initial, FlowConfig cfg);

DiffInvariants diff_invariants(double t, const MetricState& s, const EntropySolution& es);

// --- initial-data library ---------------------------------------------------

// Flat torus with conformal factor e^{2u}, u = eps * sin(2 pi (kx x + ky y)/L).
TorusGridState conformal_mode_torus(int N, double L, int stencil_order, double eps,
                                    int kx, int ky);
// Band-limited random conformal bump, sup|u| ~ eps.
TorusGridState conformal_random_torus(int N, double L, int stencil_order, double eps,
                                      int kmax, std::uint64_t seed);
// Traceless single-mode anisotropic bump g = delta + eps cos(...) (dx^2 - dy^2).
TorusGridState anisotropic_mode_torus(int N, double L, int stencil_order, double eps,
                                      int kx, int ky);
// Round sphere of radius r with pole-regular shape perturbations of relative
// size eps (seeded low-order modes in cos(theta)).
AxisymSphereState perturbed_round_sphere(int M, int stencil_order, double r, double eps,
                                         std::uint64_t seed);

}  // namespace rflab
