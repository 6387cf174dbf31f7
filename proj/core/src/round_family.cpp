#include <cmath>

#include "arena_ops.hpp"
#include "rflab/errors.hpp"

namespace rflab {

namespace {
constexpr double kPi = 3.14159265358979323846;

double unit_sphere_volume(int n) {
  // Vol(S^n(1)) = 2 pi^{(n+1)/2} / Gamma((n+1)/2)
  return 2.0 * std::pow(kPi, 0.5 * (n + 1)) / std::tgamma(0.5 * (n + 1));
}
}  // namespace

RoundFamilyState::RoundFamilyState(int n_, int sigma_, double c_)
    : n(n_), sigma(sigma_), c(c_) {
  if (n < 2) throw error("round family: dimension must be >= 2");
  if (sigma != -1 && sigma != 0 && sigma != 1)
    throw error("round family: sigma must be in {-1, 0, +1}");
  if (!(c > 0.0) || !std::isfinite(c))
    throw degenerate_metric_error("round family: scale factor must be positive", 0);
  switch (sigma) {
    case -1:
      // gbar = 2(n-1) g_{S^n(1)}
      omega_bar = std::pow(2.0 * (n - 1), 0.5 * n) * unit_sphere_volume(n);
      lambda1_bar = n / (2.0 * (n - 1));
      break;
    case 0:
      // unit-period flat torus
      omega_bar = 1.0;
      lambda1_bar = 4.0 * kPi * kPi;
      break;
    default:
      // Hyperbolic-type background. n=2: genus-2 surface with K = -1/2
      // (area 8 pi by Gauss-Bonnet); otherwise volume normalized to 1.
      // lambda1_bar has no closed form here; the sphere value is used as a
      // stand-in (the gap lambda + sigma/2 is positive regardless).
      omega_bar = (n == 2) ? 8.0 * kPi : 1.0;
      lambda1_bar = n / (2.0 * (n - 1));
      break;
  }
}

double RoundFamilyState::volume() const { return std::pow(c, 0.5 * n) * omega_bar; }

double RoundFamilyState::sup_rm() const {
  return std::abs(sectional()) * std::sqrt(2.0 * n * (n - 1));
}

namespace round_ops {

namespace {
ScalarField zero_scalar(const RoundFamilyState& s) { return ScalarField(s.shape()); }
}  // namespace

CovectorField grad(const RoundFamilyState& s, const ScalarField&) {
  return CovectorField(s.shape());
}

SymTensorField hessian(const RoundFamilyState& s, const ScalarField&) {
  return SymTensorField(s.shape());
}

Tensor3Field cov_deriv(const RoundFamilyState& s, const SymTensorField&) {
  return Tensor3Field(s.shape());
}

CovectorField div_f(const RoundFamilyState& s, const SymTensorField&, const ScalarField*) {
  return CovectorField(s.shape());
}

SymTensorField div_star(const RoundFamilyState& s, const CovectorField&) {
  return SymTensorField(s.shape());
}

ScalarField laplacian_f(const RoundFamilyState& s, const ScalarField&, const ScalarField*) {
  return zero_scalar(s);
}

CovectorField laplacian_f(const RoundFamilyState& s, const CovectorField&, const ScalarField*) {
  return CovectorField(s.shape());
}

SymTensorField laplacian_f(const RoundFamilyState& s, const SymTensorField&, const ScalarField*) {
  return SymTensorField(s.shape());
}

SymTensorField rm_action(const RoundFamilyState& s, const SymTensorField& W) {
  // Rm(lam g) = K (n-1) lam g
  SymTensorField out(s.shape());
  out.at(0, 0) = s.sectional() * (s.n - 1) * W.at(0, 0);
  return out;
}

WeightedMeasure measure(const RoundFamilyState& s, const ScalarField* f) {
  WeightedMeasure m;
  m.shape = s.shape();
  const double fval = f ? f->at(0, 0) : 0.0;
  m.w = {s.volume() * std::exp(-fval)};
  m.mass = m.w[0];
  return m;
}

}  // namespace round_ops
}  // namespace rflab
