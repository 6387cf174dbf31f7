#pragma once

// Internal per-arena implementations behind the dispatching API in
// calculus.cpp. Field storage conventions are documented in fields.hpp.

#include "rflab/arena.hpp"
#include "rflab/calculus.hpp"

namespace rflab::round_ops {

CovectorField grad(const RoundFamilyState& s, const ScalarField& u);
SymTensorField hessian(const RoundFamilyState& s, const ScalarField& u);
Tensor3Field cov_deriv(const RoundFamilyState& s, const SymTensorField& W);
CovectorField div_f(const RoundFamilyState& s, const SymTensorField& W, const ScalarField* f);
SymTensorField div_star(const RoundFamilyState& s, const CovectorField& X);
ScalarField laplacian_f(const RoundFamilyState& s, const ScalarField& u, const ScalarField* f);
CovectorField laplacian_f(const RoundFamilyState& s, const CovectorField& X, const ScalarField* f);
SymTensorField laplacian_f(const RoundFamilyState& s, const SymTensorField& W, const ScalarField* f);
SymTensorField rm_action(const RoundFamilyState& s, const SymTensorField& W);
WeightedMeasure measure(const RoundFamilyState& s, const ScalarField* f);

}  // namespace rflab::round_ops

namespace rflab::torus_ops {

// Periodic central differences on the grid arrays (idx = i*N + j).
void d1(const std::vector<double>& u, int axis, int N, double h, int order, std::vector<double>& out);
void d2(const std::vector<double>& u, int axis, int N, double h, int order, std::vector<double>& out);
void d11(const std::vector<double>& u, int N, double h, int order, std::vector<double>& out);

CovectorField grad(const TorusGridState& s, const ScalarField& u);
SymTensorField hessian(const TorusGridState& s, const ScalarField& u);
Tensor3Field cov_deriv(const TorusGridState& s, const SymTensorField& W);
CovectorField div_f(const TorusGridState& s, const SymTensorField& W, const ScalarField* f);
SymTensorField div_star(const TorusGridState& s, const CovectorField& X);
ScalarField laplacian_f(const TorusGridState& s, const ScalarField& u, const ScalarField* f);
CovectorField laplacian_f(const TorusGridState& s, const CovectorField& X, const ScalarField* f);
SymTensorField laplacian_f(const TorusGridState& s, const SymTensorField& W, const ScalarField* f);
SymTensorField rm_action(const TorusGridState& s, const SymTensorField& W);
WeightedMeasure measure(const TorusGridState& s, const ScalarField* f);
std::vector<Frame2> frame_sym(const TorusGridState& s, const SymTensorField& W);
std::vector<double> frame_cov(const TorusGridState& s, const CovectorField& X);
std::vector<Frame3> frame_grad_sym(const TorusGridState& s, const SymTensorField& W);
std::vector<Frame4> frame_second_sym(const TorusGridState& s, const SymTensorField& W);

}  // namespace rflab::torus_ops

namespace rflab::axisym_ops {

// Parity-aware central differences over [0, pi]; parity is the continuation
// parity across both poles (+1 even, -1 odd).
void d1(const std::vector<double>& u, int parity, double h, int order, std::vector<double>& out);
void d2(const std::vector<double>& u, int parity, double h, int order, std::vector<double>& out);
// kappa * x for odd x (even result; pole value x'(pole)/sqrt(a)) and for even
// x vanishing at the poles (odd result; pole value 0).
std::vector<double> kappa_mul_odd(const AxisymSphereState& s, const std::vector<double>& x);
std::vector<double> kappa_mul_even0(const AxisymSphereState& s, const std::vector<double>& x);

CovectorField grad(const AxisymSphereState& s, const ScalarField& u);
SymTensorField hessian(const AxisymSphereState& s, const ScalarField& u);
Tensor3Field cov_deriv(const AxisymSphereState& s, const SymTensorField& W);
CovectorField div_f(const AxisymSphereState& s, const SymTensorField& W, const ScalarField* f);
SymTensorField div_star(const AxisymSphereState& s, const CovectorField& X);
ScalarField laplacian_f(const AxisymSphereState& s, const ScalarField& u, const ScalarField* f);
CovectorField laplacian_f(const AxisymSphereState& s, const CovectorField& X, const ScalarField* f);
SymTensorField laplacian_f(const AxisymSphereState& s, const SymTensorField& W, const ScalarField* f);
SymTensorField rm_action(const AxisymSphereState& s, const SymTensorField& W);
WeightedMeasure measure(const AxisymSphereState& s, const ScalarField* f);
std::vector<Frame2> frame_sym(const AxisymSphereState& s, const SymTensorField& W);
std::vector<double> frame_cov(const AxisymSphereState& s, const CovectorField& X);
std::vector<Frame3> frame_grad_sym(const AxisymSphereState& s, const SymTensorField& W);
std::vector<Frame4> frame_second_sym(const AxisymSphereState& s, const SymTensorField& W);

}  // namespace rflab::axisym_ops
