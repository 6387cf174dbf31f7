#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "rflab/flow.hpp"

namespace rflab {

// Quotient N = F/E is reported absent below this energy floor.
inline constexpr double kEnergyFloor = 1e-14;

struct DiagnosticsRecord {
  double t = 0.0;
  double mu = 0.0;
  double E = 0.0;
  double F = 0.0;
  std::optional<double> N;
  double sup_S = 0.0;
  double sup_H = 0.0;
  double sup_Rm = 0.0;
  double gap = 0.0;  // lambda_g + sigma/2 at this record
  // res_divfv, res_comm always present; res_sev, res_heq at interior records.
  std::map<std::string, double> residuals;
};

double energy_E(const MetricState& s, const EntropySolution& es);
double dirichlet_F(const MetricState& s, const EntropySolution& es);
std::optional<double> quotient_N(double E, double F);

struct LOperatorFields {
  SymTensorField L0S;   // D_t S - Box_f S - hess H
  SymTensorField L1S;   // D_t S + Box_f S - hess H
  SymTensorField DtS;   // centered time difference plus contraction correction
  SymTensorField hessH;
};

// Interior records only (1 <= k <= size-2). H is solved from its elliptic
// equation at record k unless supplied.
LOperatorFields l_fields(const Trajectory& traj, int k);
LOperatorFields l_fields(const Trajectory& traj, int k, const ScalarField& H);

enum class Verdict { holds, violated, inconclusive };

const char* verdict_name(Verdict v);

struct BoundCheckReport {
  std::string id;
  std::string anchor;  // reference tag emitted as "paper_ref" in report files
  Verdict verdict = Verdict::inconclusive;
  std::vector<std::pair<double, double>> margins;  // (t, margin)
  std::map<std::string, double> fitted;
  std::string notes;
};

// dE/dt = -2F - (HS, S), relative error <= 5% where |dE/dt| is resolved.
BoundCheckReport check_eev(const Trajectory& traj);

// dF/dt = -1/2 ||L1 S||^2 - E^2 + (|S|^2 S, S) + J, with J assembled from the
// pointwise [D_t, grad] identity, the D_t-corrected curvature variation, and
// the H-weighted integrals.
BoundCheckReport check_fdot(const Trajectory& traj);

// dN/dt <= C0 (||H||_inf + ||S||_inf)(N + C1) with empirical constants.
BoundCheckReport check_nest(const Trajectory& traj);

// Exponential two-sided bounds on E, the pointwise proof-level inequality
// (log E)' >= -2N - ||H||_inf - tol, its upper counterpart, and the integrated
// entropy-gap bound. tol is pinned at 1e-3.
BoundCheckReport check_decay(const Trajectory& traj);

// Static identity residuals at an arbitrary (g, f); u is the auxiliary scalar
// for the Bochner check (a deterministic low mode when omitted).
std::map<std::string, double> check_identities(const MetricState& s, const ScalarField& f);
std::map<std::string, double> check_identities(const MetricState& s, const ScalarField& f,
                                               const ScalarField& u);

// |([D_t, grad] S, grad S)| and |(D_t Rm(S), S)| against
// ||S||_inf (||S||^2 + ||grad S||^2); empirical constants.
BoundCheckReport check_error_estimates(const Trajectory& traj);

// Fit of log(mu_limit - mu) against log ||S||; slope = 1/theta.
BoundCheckReport lojasiewicz_fit(const Trajectory& traj, double mu_limit);

// Unweighted variant (f = 0): S = Rc + (sigma/2) g, H = tr S, plain L2 norms.
std::vector<DiagnosticsRecord> einstein_shortcut(const Trajectory& traj);

// Full per-record diagnostics plus the elliptic H fields (reused by the
// evolution-law checks to avoid repeated solves).
struct FlowAnalysis {
  std::vector<DiagnosticsRecord> records;
  std::vector<ScalarField> H;
};
FlowAnalysis analyze(const Trajectory& traj);
BoundCheckReport check_eev(const Trajectory& traj, const FlowAnalysis& an);
BoundCheckReport check_fdot(const Trajectory& traj, const FlowAnalysis& an);
BoundCheckReport check_nest(const Trajectory& traj, const FlowAnalysis& an);
BoundCheckReport check_decay(const Trajectory& traj, const FlowAnalysis& an);
BoundCheckReport check_error_estimates(const Trajectory& traj, const FlowAnalysis& an);

// Full per-record diagnostics for a trajectory.
std::vector<DiagnosticsRecord> diagnose(const Trajectory& traj);

// (t, value) time series helpers over records.
std::vector<double> record_times(const Trajectory& traj);

}  // namespace rflab
