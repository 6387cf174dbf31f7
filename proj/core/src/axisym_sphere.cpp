#include <cmath>
#include <string>

#include "arena_ops.hpp"
#include "rflab/errors.hpp"

namespace rflab {

namespace {
constexpr double kPi = 3.14159265358979323846;
}

namespace axisym_ops {

namespace {

// Value at index j continued across the poles with the given parity.
inline double at(const std::vector<double>& u, int j, int parity) {
  const int M = static_cast<int>(u.size());
  if (j >= 0 && j < M) return u[j];
  double sign = 1.0;
  if (j < 0) {
    j = -j;
    sign = parity;
  } else {
    j = 2 * (M - 1) - j;
    sign = parity;
  }
  return sign * u[j];
}

// Derivative of an odd field evaluated at a pole node (parity stencils).
double odd_deriv_at_pole(const std::vector<double>& x, bool at_zero, double h, int order) {
  const int M = static_cast<int>(x.size());
  if (at_zero)
    return (order == 2) ? x[1] / h : (8.0 * x[1] - x[2]) / (6.0 * h);
  return (order == 2) ? -x[M - 2] / h : -(8.0 * x[M - 2] - x[M - 3]) / (6.0 * h);
}

}  // namespace

void d1(const std::vector<double>& u, int parity, double h, int order,
        std::vector<double>& out) {
  const int M = static_cast<int>(u.size());
  out.resize(M);
  for (int j = 0; j < M; ++j) {
    if (order == 2) {
      out[j] = (at(u, j + 1, parity) - at(u, j - 1, parity)) / (2.0 * h);
    } else {
      out[j] = (8.0 * (at(u, j + 1, parity) - at(u, j - 1, parity)) -
                (at(u, j + 2, parity) - at(u, j - 2, parity))) /
               (12.0 * h);
    }
  }
}

void d2(const std::vector<double>& u, int parity, double h, int order,
        std::vector<double>& out) {
  const int M = static_cast<int>(u.size());
  out.resize(M);
  for (int j = 0; j < M; ++j) {
    if (order == 2) {
      out[j] = (at(u, j + 1, parity) - 2.0 * u[j] + at(u, j - 1, parity)) / (h * h);
    } else {
      out[j] = (-at(u, j + 2, parity) + 16.0 * at(u, j + 1, parity) - 30.0 * u[j] +
                16.0 * at(u, j - 1, parity) - at(u, j - 2, parity)) /
               (12.0 * h * h);
    }
  }
}

std::vector<double> kappa_mul_odd(const AxisymSphereState& s, const std::vector<double>& x) {
  const int M = s.M;
  std::vector<double> out(M);
  for (int j = 1; j < M - 1; ++j) out[j] = s.geom.kappa[j] * x[j];
  out[0] = odd_deriv_at_pole(x, true, s.h(), s.stencil_order) / s.geom.sqrt_a[0];
  out[M - 1] = odd_deriv_at_pole(x, false, s.h(), s.stencil_order) / s.geom.sqrt_a[M - 1];
  return out;
}

std::vector<double> kappa_mul_even0(const AxisymSphereState& s, const std::vector<double>& x) {
  const int M = s.M;
  std::vector<double> out(M);
  for (int j = 1; j < M - 1; ++j) out[j] = s.geom.kappa[j] * x[j];
  out[0] = 0.0;
  out[M - 1] = 0.0;
  return out;
}

}  // namespace axisym_ops

AxisymSphereState::AxisymSphereState(int M_, std::vector<double> a_,
                                     std::vector<double> beta_, int stencil_order_)
    : M(M_), stencil_order(stencil_order_), a(std::move(a_)), beta(std::move(beta_)) {
  if (M < 9 || M % 2 == 0)
    throw error("axisym sphere: M must be odd and >= 9 (composite Simpson grid)");
  if (stencil_order != 2 && stencil_order != 4)
    throw error("axisym sphere: stencil order must be 2 or 4");
  if (static_cast<int>(a.size()) != M || static_cast<int>(beta.size()) != M)
    throw error("axisym sphere: a and beta must have M entries");
  for (int j = 0; j < M; ++j) {
    if (!std::isfinite(a[j]) || !std::isfinite(beta[j]))
      throw degenerate_metric_error("axisym sphere: non-finite metric at node " + std::to_string(j), j);
    if (!(a[j] > 0.0) || !(beta[j] > 0.0) || a[j] * beta[j] < kDetFloor)
      throw degenerate_metric_error(
          "axisym sphere: metric not positive definite at node " + std::to_string(j), j);
  }
  const double scale = std::max(a[0], beta[0]);
  if (std::abs(a[0] - beta[0]) > 1e-6 * scale ||
      std::abs(a[M - 1] - beta[M - 1]) > 1e-6 * std::max(a[M - 1], beta[M - 1]))
    throw invalid_field_error("axisym sphere: pole regularity a = beta violated at a pole");

  const double hh = h();
  auto& G = geom;
  G.theta.resize(M);
  G.sin_t.resize(M);
  G.cos_t.resize(M);
  G.sqrt_a.resize(M);
  G.q.resize(M);
  G.kappa.assign(M, 0.0);
  G.gauss.resize(M);
  G.simpson.resize(M);
  for (int j = 0; j < M; ++j) {
    G.theta[j] = j * hh;
    G.sin_t[j] = std::sin(G.theta[j]);
    G.cos_t[j] = std::cos(G.theta[j]);
    G.sqrt_a[j] = std::sqrt(a[j]);
    G.simpson[j] = (j == 0 || j == M - 1) ? hh / 3.0 : (j % 2 == 1 ? 4.0 * hh / 3.0 : 2.0 * hh / 3.0);
  }
  // exact endpoint values for sin/cos
  G.sin_t[0] = 0.0;
  G.cos_t[0] = 1.0;
  G.sin_t[M - 1] = 0.0;
  G.cos_t[M - 1] = -1.0;

  std::vector<double> da, dbeta;
  axisym_ops::d1(a, 1, hh, stencil_order, da);
  axisym_ops::d1(beta, 1, hh, stencil_order, dbeta);
  for (int j = 0; j < M; ++j) G.q[j] = dbeta[j] / (2.0 * beta[j] * G.sqrt_a[j]);
  for (int j = 1; j < M - 1; ++j)
    G.kappa[j] = G.cos_t[j] / (G.sin_t[j] * G.sqrt_a[j]) + G.q[j];

  // Gauss curvature K = 1/a + cot*(a'/(2a^2) - 2q/sqrt(a)) - q'/sqrt(a) - q^2,
  // with the cot product taken through its pole limit.
  std::vector<double> bracket(M), dq;
  for (int j = 0; j < M; ++j)
    bracket[j] = da[j] / (2.0 * a[j] * a[j]) - 2.0 * G.q[j] / G.sqrt_a[j];
  axisym_ops::d1(G.q, -1, hh, stencil_order, dq);
  for (int j = 0; j < M; ++j) {
    double cot_term;
    if (j == 0)
      cot_term = axisym_ops::odd_deriv_at_pole(bracket, true, hh, stencil_order);
    else if (j == M - 1)
      cot_term = axisym_ops::odd_deriv_at_pole(bracket, false, hh, stencil_order);
    else
      cot_term = G.cos_t[j] / G.sin_t[j] * bracket[j];
    G.gauss[j] = 1.0 / a[j] + cot_term - dq[j] / G.sqrt_a[j] - G.q[j] * G.q[j];
  }
}

AxisymSphereState AxisymSphereState::round(int M_, double r, int stencil_order_) {
  return AxisymSphereState(M_, std::vector<double>(M_, r * r),
                           std::vector<double>(M_, r * r), stencil_order_);
}

namespace axisym_ops {

namespace {

std::vector<double> deriv_over_sqrt_a(const AxisymSphereState& s,
                                      const std::vector<double>& u, int parity) {
  std::vector<double> du;
  d1(u, parity, s.h(), s.stencil_order, du);
  for (int j = 0; j < s.M; ++j) du[j] /= s.geom.sqrt_a[j];
  return du;
}

std::vector<double> comp_vec(const detail::FieldData& F, int c) {
  return std::vector<double>(F.comp(c), F.comp(c) + F.shape.nodes());
}

}  // namespace

CovectorField grad(const AxisymSphereState& s, const ScalarField& u) {
  CovectorField out(s.shape());
  auto x = deriv_over_sqrt_a(s, u.data, +1);
  std::copy(x.begin(), x.end(), out.comp(0));
  return out;
}

SymTensorField hessian(const AxisymSphereState& s, const ScalarField& u) {
  SymTensorField out(s.shape());
  auto r = deriv_over_sqrt_a(s, u.data, +1);          // e_theta(u), odd
  auto htt = deriv_over_sqrt_a(s, r, -1);             // even
  auto hpp = kappa_mul_odd(s, r);                     // even
  std::copy(htt.begin(), htt.end(), out.comp(0));
  std::copy(hpp.begin(), hpp.end(), out.comp(1));
  return out;
}

Tensor3Field cov_deriv(const AxisymSphereState& s, const SymTensorField& W) {
  Tensor3Field out(s.shape());
  auto s1 = comp_vec(W, 0), s2 = comp_vec(W, 1);
  auto n1 = deriv_over_sqrt_a(s, s1, +1);
  auto n2 = deriv_over_sqrt_a(s, s2, +1);
  std::vector<double> diff(s.M);
  for (int j = 0; j < s.M; ++j) diff[j] = s1[j] - s2[j];
  auto n4 = kappa_mul_even0(s, diff);
  std::copy(n1.begin(), n1.end(), out.comp(0));
  std::copy(n2.begin(), n2.end(), out.comp(1));
  std::copy(n4.begin(), n4.end(), out.comp(2));
  return out;
}

CovectorField div_f(const AxisymSphereState& s, const SymTensorField& W, const ScalarField* f) {
  Tensor3Field T = cov_deriv(s, W);
  CovectorField out(s.shape());
  std::vector<double> ft;
  if (f) ft = deriv_over_sqrt_a(s, f->data, +1);
  for (int j = 0; j < s.M; ++j) {
    double v = T.at(0, j) + T.at(2, j);
    if (f) v -= W.at(0, j) * ft[j];
    out.at(0, j) = v;
  }
  return out;
}

SymTensorField div_star(const AxisymSphereState& s, const CovectorField& X) {
  SymTensorField out(s.shape());
  auto x = comp_vec(X, 0);
  auto y1 = deriv_over_sqrt_a(s, x, -1);
  auto y2 = kappa_mul_odd(s, x);
  for (int j = 0; j < s.M; ++j) {
    out.at(0, j) = -y1[j];
    out.at(1, j) = -y2[j];
  }
  return out;
}

ScalarField laplacian_f(const AxisymSphereState& s, const ScalarField& u, const ScalarField* f) {
  auto r = deriv_over_sqrt_a(s, u.data, +1);
  auto htt = deriv_over_sqrt_a(s, r, -1);
  auto hpp = kappa_mul_odd(s, r);
  std::vector<double> ft;
  if (f) ft = deriv_over_sqrt_a(s, f->data, +1);
  ScalarField out(s.shape());
  for (int j = 0; j < s.M; ++j) {
    double v = htt[j] + hpp[j];
    if (f) v -= ft[j] * r[j];
    out.data[j] = v;
  }
  return out;
}

CovectorField laplacian_f(const AxisymSphereState& s, const CovectorField& X, const ScalarField* f) {
  auto x = comp_vec(X, 0);
  auto y1 = deriv_over_sqrt_a(s, x, -1);   // (grad X)_tt, even
  auto y2 = kappa_mul_odd(s, x);           // (grad X)_pp, even
  auto dy1 = deriv_over_sqrt_a(s, y1, -1); // odd
  std::vector<double> diff(s.M);
  for (int j = 0; j < s.M; ++j) diff[j] = y1[j] - y2[j];
  auto cross = kappa_mul_even0(s, diff);
  std::vector<double> ft;
  if (f) ft = deriv_over_sqrt_a(s, f->data, +1);
  CovectorField out(s.shape());
  for (int j = 0; j < s.M; ++j) {
    double v = dy1[j] + cross[j];
    if (f) v -= ft[j] * y1[j];
    out.at(0, j) = v;
  }
  return out;
}

SymTensorField laplacian_f(const AxisymSphereState& s, const SymTensorField& W, const ScalarField* f) {
  Tensor3Field T = cov_deriv(s, W);
  auto n1 = comp_vec(T, 0), n2 = comp_vec(T, 1), n4 = comp_vec(T, 2);
  auto v_tt_a = deriv_over_sqrt_a(s, n1, -1);
  auto v_pp_a = deriv_over_sqrt_a(s, n2, -1);
  std::vector<double> c1(s.M), c2(s.M);
  for (int j = 0; j < s.M; ++j) {
    c1[j] = n1[j] - 2.0 * n4[j];
    c2[j] = n2[j] + 2.0 * n4[j];
  }
  auto v_tt_b = kappa_mul_odd(s, c1);
  auto v_pp_b = kappa_mul_odd(s, c2);
  std::vector<double> ft;
  if (f) ft = deriv_over_sqrt_a(s, f->data, +1);
  SymTensorField out(s.shape());
  for (int j = 0; j < s.M; ++j) {
    double tt = v_tt_a[j] + v_tt_b[j];
    double pp = v_pp_a[j] + v_pp_b[j];
    if (f) {
      tt -= ft[j] * n1[j];
      pp -= ft[j] * n2[j];
    }
    out.at(0, j) = tt;
    out.at(1, j) = pp;
  }
  return out;
}

SymTensorField rm_action(const AxisymSphereState& s, const SymTensorField& W) {
  SymTensorField out(s.shape());
  for (int j = 0; j < s.M; ++j) {
    const double K = s.geom.gauss[j];
    out.at(0, j) = K * W.at(1, j);
    out.at(1, j) = K * W.at(0, j);
  }
  return out;
}

WeightedMeasure measure(const AxisymSphereState& s, const ScalarField* f) {
  WeightedMeasure m;
  m.shape = s.shape();
  m.w.resize(s.M);
  double mass = 0;
  for (int j = 0; j < s.M; ++j) {
    double w = s.geom.simpson[j] * 2.0 * kPi * s.geom.sin_t[j] *
               std::sqrt(s.a[j] * s.beta[j]);
    if (f) w *= std::exp(-f->data[j]);
    m.w[j] = w;
    mass += w;
  }
  m.mass = mass;
  return m;
}

std::vector<Frame2> frame_sym(const AxisymSphereState& s, const SymTensorField& W) {
  std::vector<Frame2> out(s.M);
  for (int j = 0; j < s.M; ++j) {
    out[j].m[0][0] = W.at(0, j);
    out[j].m[1][1] = W.at(1, j);
    out[j].m[0][1] = out[j].m[1][0] = 0.0;
  }
  return out;
}

std::vector<double> frame_cov(const AxisymSphereState& s, const CovectorField& X) {
  std::vector<double> out(2 * s.M, 0.0);
  for (int j = 0; j < s.M; ++j) out[2 * j] = X.at(0, j);
  return out;
}

std::vector<Frame3> frame_grad_sym(const AxisymSphereState& s, const SymTensorField& W) {
  Tensor3Field T = cov_deriv(s, W);
  std::vector<Frame3> out(s.M);
  for (int j = 0; j < s.M; ++j) {
    auto& m = out[j].m;
    for (int a = 0; a < 2; ++a)
      for (int b = 0; b < 2; ++b)
        for (int c = 0; c < 2; ++c) m[a][b][c] = 0.0;
    m[0][0][0] = T.at(0, j);
    m[0][1][1] = T.at(1, j);
    m[1][0][1] = m[1][1][0] = T.at(2, j);
  }
  return out;
}

std::vector<Frame4> frame_second_sym(const AxisymSphereState& s, const SymTensorField& W) {
  Tensor3Field T = cov_deriv(s, W);
  auto n1 = comp_vec(T, 0), n2 = comp_vec(T, 1), n4 = comp_vec(T, 2);
  auto v0000 = deriv_over_sqrt_a(s, n1, -1);
  auto v0011 = deriv_over_sqrt_a(s, n2, -1);
  auto v0101 = deriv_over_sqrt_a(s, n4, -1);
  std::vector<double> c1(s.M), c2(s.M), c3(s.M);
  for (int j = 0; j < s.M; ++j) {
    c1[j] = n1[j] - 2.0 * n4[j];
    c2[j] = n2[j] + 2.0 * n4[j];
    c3[j] = n1[j] - n2[j] - n4[j];
  }
  auto v1100 = kappa_mul_odd(s, c1);
  auto v1111 = kappa_mul_odd(s, c2);
  auto v1001 = kappa_mul_odd(s, c3);
  std::vector<Frame4> out(s.M);
  for (int j = 0; j < s.M; ++j) {
    auto& m = out[j].m;
    for (int a = 0; a < 2; ++a)
      for (int b = 0; b < 2; ++b)
        for (int c = 0; c < 2; ++c)
          for (int d = 0; d < 2; ++d) m[a][b][c][d] = 0.0;
    m[0][0][0][0] = v0000[j];
    m[0][0][1][1] = v0011[j];
    m[0][1][0][1] = m[0][1][1][0] = v0101[j];
    m[1][0][0][1] = m[1][0][1][0] = v1001[j];
    m[1][1][0][0] = v1100[j];
    m[1][1][1][1] = v1111[j];
  }
  return out;
}

}  // namespace axisym_ops
}  // namespace rflab
