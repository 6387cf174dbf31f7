#pragma once

#include <memory>
#include <variant>
#include <vector>

#include "rflab/fields.hpp"

namespace rflab {

// det g below this threshold counts as a degenerate metric.
inline constexpr double kDetFloor = 1e-10;

// ---------------------------------------------------------------------------
// Round family: g = c * gbar on a fixed Einstein background with
// Rc(gbar) = -(sigma/2) gbar. Everything is a closed-form function of
// (n, sigma, c); fields on this arena are homogeneous (one value).
// ---------------------------------------------------------------------------
struct RoundFamilyState {
  int n = 2;
  int sigma = -1;
  double c = 1.0;
  double omega_bar = 0.0;    // background volume
  double lambda1_bar = 0.0;  // lowest nonzero Laplacian eigenvalue of gbar
                             // (exact for sigma=-1 sphere and sigma=0 torus;
                             // documented stand-in for the sigma=+1 background)

  RoundFamilyState() : RoundFamilyState(2, -1, 1.0) {}
  RoundFamilyState(int n_, int sigma_, double c_);

  FieldShape shape() const { return {ArenaKind::round_family, 1, 1}; }
  double sectional() const { return -sigma / (2.0 * c * (n - 1)); }
  double ricci_coeff() const { return -sigma / (2.0 * c); }  // Rc = coeff * g
  double scalar_curvature() const { return -n * sigma / (2.0 * c); }
  double volume() const;                  // c^{n/2} * omega_bar
  double lambda1() const { return lambda1_bar / c; }
  double sup_rm() const;                  // |Rm|_g = |K| sqrt(2 n (n-1))
};

// ---------------------------------------------------------------------------
// Periodic 2-torus grid, sigma = 0 arena. Metric components are sampled at
// N x N nodes of [0,L)^2, index = i*N + j (x-major). Central finite
// differences of order 2 or 4 with periodic wrap.
// ---------------------------------------------------------------------------
struct TorusGeometry {
  // per-node arrays, same layout as the metric components
  std::vector<double> det, sqrtdet;
  std::vector<double> inv11, inv12, inv22;
  // Christoffel symbols gamma[k][s], k in {0,1}, s in {00->0, 01->1, 11->2}
  std::vector<double> gamma[2][3];
  // dgamma[m][k][s] = d_m Gamma^k_s
  std::vector<double> dgamma[2][2][3];
  std::vector<double> gauss;  // Gauss curvature K
  // Cholesky factors of g (lower triangular) and their inverses, for
  // orthonormal-frame components.
  std::vector<double> l00, l10, l11, il00, il10, il11;
};

struct TorusGridState {
  int N = 0;
  double L = 0.0;
  int stencil_order = 2;
  int sigma = 0;
  std::vector<double> g11, g12, g22;
  TorusGeometry geom;

  TorusGridState(int N_, double L_, std::vector<double> g11_,
                 std::vector<double> g12_, std::vector<double> g22_,
                 int stencil_order_ = 2);

  static TorusGridState flat(int N_, double L_, int stencil_order_ = 2);

  FieldShape shape() const { return {ArenaKind::torus_grid, N, N}; }
  double h() const { return L / N; }
  int idx(int i, int j) const { return i * N + j; }
};

// ---------------------------------------------------------------------------
// Axisymmetric 2-sphere, sigma = -1 arena: g = a(theta) dtheta^2 +
// sin^2(theta) beta(theta) dphi^2 on an endpoint grid over [0, pi] with M
// (odd) nodes. Non-scalar fields are stored in orthonormal-frame components
// of axisymmetric diagonal tensors; parity ghost extension across the poles.
// ---------------------------------------------------------------------------
struct AxisymGeometry {
  std::vector<double> theta, sin_t, cos_t;
  std::vector<double> sqrt_a;
  std::vector<double> q;          // beta'/(2 beta sqrt(a)), odd, regular
  std::vector<double> kappa;      // B'/(2B sqrt(a)); cot-singular, unset at poles
  std::vector<double> gauss;      // Gauss curvature K, even, regular
  std::vector<double> simpson;    // composite Simpson weights (without jacobian)
};

struct AxisymSphereState {
  int M = 0;
  int stencil_order = 2;
  int sigma = -1;
  std::vector<double> a, beta;
  AxisymGeometry geom;

  AxisymSphereState(int M_, std::vector<double> a_, std::vector<double> beta_,
                    int stencil_order_ = 2);

  // Round sphere of radius r (a = beta = r^2).
  static AxisymSphereState round(int M_, double r, int stencil_order_ = 2);

  FieldShape shape() const { return {ArenaKind::axisym_sphere, M, 1}; }
  double h() const { return 3.14159265358979323846 / (M - 1); }
};

using MetricState = std::variant<RoundFamilyState, TorusGridState, AxisymSphereState>;

FieldShape field_shape(const MetricState& s);
int sigma_of(const MetricState& s);
int dimension_of(const MetricState& s);
// Smallest grid spacing relevant for CFL control; 0 for the round family.
double grid_spacing(const MetricState& s);
int stencil_order_of(const MetricState& s);

// Degrees of freedom of the metric as a flat vector (c | g components | a,beta),
// used by the time integrator.
std::vector<double> metric_components(const MetricState& s);
// Rebuild a state of the same arena/layout from components (validates).
MetricState with_metric_components(const MetricState& like, const std::vector<double>& comps);
// Time derivative of metric_components given dg/dt = W (a symmetric tensor
// field in the arena's storage convention).
std::vector<double> component_velocity(const MetricState& s, const SymTensorField& W);

}  // namespace rflab
