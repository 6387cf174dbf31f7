#pragma once

#include <cstdint>
#include <optional>

#include "rflab/calculus.hpp"

namespace rflab {

struct SolverConfig {
  double tol = 1e-7;      // residual target for the Euler-Lagrange equation
  int max_iter = 50000;
  double damping = 0.9;   // step factor relative to the stability bound
  double w_floor = 1e-12; // positivity clip

  void validate() const;
};

// Per-arena defaults (tighter on the closed-form ODE arena).
SolverConfig default_solver_config(const MetricState& s);

// Constrained minimizer of the entropy functional: f with unit weighted
// volume, value mu, the defect tensor S = Rc + hess f + (sigma/2) g, and the
// scalar M = 2 lap f - |grad f|^2 + R - sigma f. Mfield and el_residual are
// evaluated in the solver's w-consistent discretization (w = e^{-f/2}); the
// literal f-form is available as m_sigma().
struct EntropySolution {
  ScalarField f;
  double mu = 0.0;
  SymTensorField S;
  ScalarField Mfield;
  double el_residual = 0.0;
  int iterations = 0;
  bool floored = false;  // positivity floor engaged during the solve
};

struct SpectralGapReport {
  double lambda_g = 0.0;  // lowest nonzero eigenvalue of -Delta_f
  double gap = 0.0;       // lambda_g + sigma/2
  ScalarField eigenfield; // weighted-mean-zero
  int iterations = 0;
};

// W_sigma(g, -2 log w) for w > 0 with int w^2 dV = 1:
//   int (4|grad w|^2 + R w^2 + 2 sigma w^2 log w) dV.
double w_functional(const MetricState& s, const ScalarField& w);

EntropySolution minimize_entropy(const MetricState& s, const SolverConfig& cfg,
                                 const ScalarField* warm_start_f = nullptr);

// Honesty check for possible non-uniqueness (notably sigma = -1 far from
// solitons): independent seeded starts; disagreement above 1e-8 is flagged.
struct MultistartReport {
  EntropySolution best;
  double spread = 0.0;
  bool disagreement = false;
};
MultistartReport minimize_entropy_multistart(const MetricState& s, const SolverConfig& cfg,
                                             int n_starts, std::uint64_t seed);

SymTensorField s_sigma(const MetricState& s, const ScalarField& f);
ScalarField m_sigma(const MetricState& s, const ScalarField& f);

// L^2(e^{-f} dV)-gradient of mu: -S(g, f_g).
SymTensorField grad_mu(const MetricState& s, const EntropySolution& es);
SymTensorField grad_mu(const MetricState& s, const SolverConfig& cfg);

SpectralGapReport spectral_gap(const MetricState& s, const ScalarField& f,
                               double tol = 1e-10, const ScalarField* warm_eigenfield = nullptr);

// Solves Delta_f H - (sigma/2) H = -|S|^2 + ||S||^2 with weighted mean zero.
// Requires gap = lambda_g + sigma/2 > 0 (checked; pass a report to skip the
// recomputation).
ScalarField h_field(const MetricState& s, const EntropySolution& es, double tol = 1e-10,
                    const SpectralGapReport* gap = nullptr,
                    const ScalarField* warm_start = nullptr);

}  // namespace rflab
