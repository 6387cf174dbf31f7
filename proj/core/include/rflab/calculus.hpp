#pragma once

#include "rflab/arena.hpp"
#include "rflab/fields.hpp"

namespace rflab {

// Weighted tensor calculus on a metric state. Covariant operations follow the
// conventions:
//   (div_f W)_j   = grad_i W_ij - W_ij grad_i f
//   (div* X)_ij   = -(grad_i X_j + grad_j X_i)/2
//   Delta_f T     = Delta T - grad_{grad f} T          (ranks 0..2)
//   Box_f W       = Delta_f W + 2 Rm(W)
//   Rm(W)_ij      = R_iklj W_kl
// Fields must live on the same arena/grid as the state.

CurvatureBundle curvature(const MetricState& s);
// Pointwise |Rm|_g (constant per node in 2-D: 2|K|; round family closed form).
double sup_rm(const MetricState& s);

CovectorField grad(const MetricState& s, const ScalarField& u);
SymTensorField hessian(const MetricState& s, const ScalarField& u);
Tensor3Field cov_deriv(const MetricState& s, const SymTensorField& W);

CovectorField div_f(const MetricState& s, const SymTensorField& W, const ScalarField& f);
CovectorField div_plain(const MetricState& s, const SymTensorField& W);
SymTensorField div_star(const MetricState& s, const CovectorField& X);

ScalarField laplacian_f(const MetricState& s, const ScalarField& u, const ScalarField& f);
CovectorField laplacian_f(const MetricState& s, const CovectorField& X, const ScalarField& f);
SymTensorField laplacian_f(const MetricState& s, const SymTensorField& W, const ScalarField& f);
ScalarField laplacian(const MetricState& s, const ScalarField& u);

SymTensorField rm_action(const MetricState& s, const SymTensorField& W);
SymTensorField box_f(const MetricState& s, const SymTensorField& W, const ScalarField& f);

// Pointwise contractions in the metric g (indices raised with g^{-1}).
ScalarField pointwise_inner(const MetricState& s, const SymTensorField& U, const SymTensorField& W);
ScalarField pointwise_inner(const MetricState& s, const CovectorField& X, const CovectorField& Y);
ScalarField pointwise_norm2(const MetricState& s, const SymTensorField& W);
ScalarField pointwise_norm2(const MetricState& s, const CovectorField& X);
ScalarField pointwise_norm2(const MetricState& s, const Tensor3Field& T);
ScalarField trace(const MetricState& s, const SymTensorField& W);
// W -> W . g^{-1} . W as a symmetric tensor (the D_t correction term shape).
SymTensorField tensor_square(const MetricState& s, const SymTensorField& W);
// Pointwise W(X, X) for a covector X.
ScalarField apply_bilinear(const MetricState& s, const SymTensorField& W, const CovectorField& X);
// W(X^sharp, .) as a covector.
CovectorField contract_vector(const MetricState& s, const SymTensorField& W, const CovectorField& X);
// (A g^{-1} B + B g^{-1} A)/2.
SymTensorField sym_anticommutator(const MetricState& s, const SymTensorField& A, const SymTensorField& B);
// The metric itself as a SymTensorField in the arena's storage convention.
SymTensorField metric_tensor(const MetricState& s);

// Quadrature. weighted_measure uses e^{-f} dV_g; volume_measure is f = 0.
WeightedMeasure weighted_measure(const MetricState& s, const ScalarField& f);
WeightedMeasure volume_measure(const MetricState& s);

double integrate(const ScalarField& u, const WeightedMeasure& m);
double inner(const MetricState& s, const ScalarField& u, const ScalarField& v, const WeightedMeasure& m);
double inner(const MetricState& s, const CovectorField& X, const CovectorField& Y, const WeightedMeasure& m);
double inner(const MetricState& s, const SymTensorField& U, const SymTensorField& W, const WeightedMeasure& m);
double inner(const MetricState& s, const Tensor3Field& T, const Tensor3Field& U, const WeightedMeasure& m);

double sup_norm(const MetricState& s, const ScalarField& u);
double sup_norm(const MetricState& s, const CovectorField& X);
double sup_norm(const MetricState& s, const SymTensorField& W);

// Orthonormal-frame components for contraction-heavy diagnostics on the grid
// arenas (n = 2). Index order matches the covariant objects they come from.
struct Frame2 { double m[2][2]; };
struct Frame3 { double m[2][2][2]; };
struct Frame4 { double m[2][2][2][2]; };
std::vector<Frame2> frame_components(const MetricState& s, const SymTensorField& W);
std::vector<double> frame_components(const MetricState& s, const CovectorField& X);
std::vector<Frame3> frame_cov_deriv(const MetricState& s, const SymTensorField& W);
// Full second covariant derivative (grad_a grad_b W)_{cd} in frame components.
std::vector<Frame4> frame_second_deriv(const MetricState& s, const SymTensorField& W);

}  // namespace rflab
