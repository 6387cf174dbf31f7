#include "rflab/calculus.hpp"

#include <algorithm>
#include <cmath>

#include "arena_ops.hpp"
#include "rflab/errors.hpp"

namespace rflab {

namespace {

void check_field(const MetricState& s, const detail::FieldData& f, const char* where) {
  if (!(field_shape(s) == f.shape))
    throw arena_mismatch_error(std::string(where) + ": field does not match the state's arena/grid");
}

inline double wfull(const SymTensorField& W, int i, int j, int p) {
  return W.at(i + j, p);
}

template <class F>
F dispatch_zero(const MetricState& s) {
  return F(field_shape(s));
}

}  // namespace

FieldShape field_shape(const MetricState& s) {
  return std::visit([](const auto& a) { return a.shape(); }, s);
}

int sigma_of(const MetricState& s) {
  return std::visit([](const auto& a) { return a.sigma; }, s);
}

int dimension_of(const MetricState& s) {
  if (auto* r = std::get_if<RoundFamilyState>(&s)) return r->n;
  return 2;
}

double grid_spacing(const MetricState& s) {
  if (auto* t = std::get_if<TorusGridState>(&s)) return t->h();
  if (auto* a = std::get_if<AxisymSphereState>(&s)) return a->h();
  return 0.0;
}

int stencil_order_of(const MetricState& s) {
  if (auto* t = std::get_if<TorusGridState>(&s)) return t->stencil_order;
  if (auto* a = std::get_if<AxisymSphereState>(&s)) return a->stencil_order;
  return 0;
}

std::vector<double> metric_components(const MetricState& s) {
  if (auto* r = std::get_if<RoundFamilyState>(&s)) return {r->c};
  if (auto* t = std::get_if<TorusGridState>(&s)) {
    std::vector<double> out;
    out.reserve(3 * t->g11.size());
    out.insert(out.end(), t->g11.begin(), t->g11.end());
    out.insert(out.end(), t->g12.begin(), t->g12.end());
    out.insert(out.end(), t->g22.begin(), t->g22.end());
    return out;
  }
  const auto& a = std::get<AxisymSphereState>(s);
  std::vector<double> out;
  out.reserve(2 * a.a.size());
  out.insert(out.end(), a.a.begin(), a.a.end());
  out.insert(out.end(), a.beta.begin(), a.beta.end());
  return out;
}

MetricState with_metric_components(const MetricState& like, const std::vector<double>& comps) {
  if (auto* r = std::get_if<RoundFamilyState>(&like))
    return RoundFamilyState(r->n, r->sigma, comps.at(0));
  if (auto* t = std::get_if<TorusGridState>(&like)) {
    const std::size_t n = t->g11.size();
    if (comps.size() != 3 * n) throw error("with_metric_components: size mismatch");
    return TorusGridState(t->N, t->L,
                          std::vector<double>(comps.begin(), comps.begin() + n),
                          std::vector<double>(comps.begin() + n, comps.begin() + 2 * n),
                          std::vector<double>(comps.begin() + 2 * n, comps.end()),
                          t->stencil_order);
  }
  const auto& a = std::get<AxisymSphereState>(like);
  const std::size_t n = a.a.size();
  if (comps.size() != 2 * n) throw error("with_metric_components: size mismatch");
  return AxisymSphereState(a.M, std::vector<double>(comps.begin(), comps.begin() + n),
                           std::vector<double>(comps.begin() + n, comps.end()),
                           a.stencil_order);
}

std::vector<double> component_velocity(const MetricState& s, const SymTensorField& W) {
  check_field(s, W, "component_velocity");
  if (auto* r = std::get_if<RoundFamilyState>(&s)) return {W.at(0, 0) * r->c};
  if (auto* t = std::get_if<TorusGridState>(&s)) return W.data;
  const auto& a = std::get<AxisymSphereState>(s);
  std::vector<double> out(2 * a.M);
  for (int j = 0; j < a.M; ++j) {
    out[j] = a.a[j] * W.at(0, j);
    out[a.M + j] = a.beta[j] * W.at(1, j);
  }
  return out;
}

CurvatureBundle curvature(const MetricState& s) {
  CurvatureBundle b;
  const FieldShape sh = field_shape(s);
  b.sectional = ScalarField(sh);
  b.Rc = SymTensorField(sh);
  b.R = ScalarField(sh);
  if (auto* r = std::get_if<RoundFamilyState>(&s)) {
    b.sectional.at(0, 0) = r->sectional();
    b.Rc.at(0, 0) = r->ricci_coeff();
    b.R.at(0, 0) = r->scalar_curvature();
    return b;
  }
  if (auto* t = std::get_if<TorusGridState>(&s)) {
    const std::size_t n = t->g11.size();
    const double* g[3] = {t->g11.data(), t->g12.data(), t->g22.data()};
    for (std::size_t p = 0; p < n; ++p) {
      const double K = t->geom.gauss[p];
      b.sectional.data[p] = K;
      b.R.data[p] = 2.0 * K;
      for (int sidx = 0; sidx < 3; ++sidx) b.Rc.at(sidx, p) = K * g[sidx][p];
    }
    return b;
  }
  const auto& a = std::get<AxisymSphereState>(s);
  for (int j = 0; j < a.M; ++j) {
    const double K = a.geom.gauss[j];
    b.sectional.data[j] = K;
    b.R.data[j] = 2.0 * K;
    b.Rc.at(0, j) = K;
    b.Rc.at(1, j) = K;
  }
  return b;
}

double sup_rm(const MetricState& s) {
  if (auto* r = std::get_if<RoundFamilyState>(&s)) return r->sup_rm();
  double mx = 0;
  if (auto* t = std::get_if<TorusGridState>(&s)) {
    for (double K : t->geom.gauss) mx = std::max(mx, 2.0 * std::abs(K));
  } else {
    const auto& a = std::get<AxisymSphereState>(s);
    for (double K : a.geom.gauss) mx = std::max(mx, 2.0 * std::abs(K));
  }
  return mx;
}

// --- first-order ops -------------------------------------------------------

CovectorField grad(const MetricState& s, const ScalarField& u) {
  check_field(s, u, "grad");
  return std::visit([&](const auto& a) {
    if constexpr (std::is_same_v<std::decay_t<decltype(a)>, RoundFamilyState>)
      return round_ops::grad(a, u);
    else if constexpr (std::is_same_v<std::decay_t<decltype(a)>, TorusGridState>)
      return torus_ops::grad(a, u);
    else
      return axisym_ops::grad(a, u);
  }, s);
}

SymTensorField hessian(const MetricState& s, const ScalarField& u) {
  check_field(s, u, "hessian");
  return std::visit([&](const auto& a) {
    if constexpr (std::is_same_v<std::decay_t<decltype(a)>, RoundFamilyState>)
      return round_ops::hessian(a, u);
    else if constexpr (std::is_same_v<std::decay_t<decltype(a)>, TorusGridState>)
      return torus_ops::hessian(a, u);
    else
      return axisym_ops::hessian(a, u);
  }, s);
}

Tensor3Field cov_deriv(const MetricState& s, const SymTensorField& W) {
  check_field(s, W, "cov_deriv");
  return std::visit([&](const auto& a) {
    if constexpr (std::is_same_v<std::decay_t<decltype(a)>, RoundFamilyState>)
      return round_ops::cov_deriv(a, W);
    else if constexpr (std::is_same_v<std::decay_t<decltype(a)>, TorusGridState>)
      return torus_ops::cov_deriv(a, W);
    else
      return axisym_ops::cov_deriv(a, W);
  }, s);
}

CovectorField div_f(const MetricState& s, const SymTensorField& W, const ScalarField& f) {
  check_field(s, W, "div_f");
  check_field(s, f, "div_f");
  return std::visit([&](const auto& a) {
    if constexpr (std::is_same_v<std::decay_t<decltype(a)>, RoundFamilyState>)
      return round_ops::div_f(a, W, &f);
    else if constexpr (std::is_same_v<std::decay_t<decltype(a)>, TorusGridState>)
      return torus_ops::div_f(a, W, &f);
    else
      return axisym_ops::div_f(a, W, &f);
  }, s);
}

CovectorField div_plain(const MetricState& s, const SymTensorField& W) {
  check_field(s, W, "div");
  return std::visit([&](const auto& a) {
    if constexpr (std::is_same_v<std::decay_t<decltype(a)>, RoundFamilyState>)
      return round_ops::div_f(a, W, nullptr);
    else if constexpr (std::is_same_v<std::decay_t<decltype(a)>, TorusGridState>)
      return torus_ops::div_f(a, W, nullptr);
    else
      return axisym_ops::div_f(a, W, nullptr);
  }, s);
}

SymTensorField div_star(const MetricState& s, const CovectorField& X) {
  check_field(s, X, "div_star");
  return std::visit([&](const auto& a) {
    if constexpr (std::is_same_v<std::decay_t<decltype(a)>, RoundFamilyState>)
      return round_ops::div_star(a, X);
    else if constexpr (std::is_same_v<std::decay_t<decltype(a)>, TorusGridState>)
      return torus_ops::div_star(a, X);
    else
      return axisym_ops::div_star(a, X);
  }, s);
}

ScalarField laplacian_f(const MetricState& s, const ScalarField& u, const ScalarField& f) {
  check_field(s, u, "laplacian_f");
  check_field(s, f, "laplacian_f");
  return std::visit([&](const auto& a) {
    if constexpr (std::is_same_v<std::decay_t<decltype(a)>, RoundFamilyState>)
      return round_ops::laplacian_f(a, u, &f);
    else if constexpr (std::is_same_v<std::decay_t<decltype(a)>, TorusGridState>)
      return torus_ops::laplacian_f(a, u, &f);
    else
      return axisym_ops::laplacian_f(a, u, &f);
  }, s);
}

ScalarField laplacian(const MetricState& s, const ScalarField& u) {
  check_field(s, u, "laplacian");
  return std::visit([&](const auto& a) {
    if constexpr (std::is_same_v<std::decay_t<decltype(a)>, RoundFamilyState>)
      return round_ops::laplacian_f(a, u, nullptr);
    else if constexpr (std::is_same_v<std::decay_t<decltype(a)>, TorusGridState>)
      return torus_ops::laplacian_f(a, u, nullptr);
    else
      return axisym_ops::laplacian_f(a, u, nullptr);
  }, s);
}

CovectorField laplacian_f(const MetricState& s, const CovectorField& X, const ScalarField& f) {
  check_field(s, X, "laplacian_f");
  return std::visit([&](const auto& a) {
    if constexpr (std::is_same_v<std::decay_t<decltype(a)>, RoundFamilyState>)
      return round_ops::laplacian_f(a, X, &f);
    else if constexpr (std::is_same_v<std::decay_t<decltype(a)>, TorusGridState>)
      return torus_ops::laplacian_f(a, X, &f);
    else
      return axisym_ops::laplacian_f(a, X, &f);
  }, s);
}

SymTensorField laplacian_f(const MetricState& s, const SymTensorField& W, const ScalarField& f) {
  check_field(s, W, "laplacian_f");
  return std::visit([&](const auto& a) {
    if constexpr (std::is_same_v<std::decay_t<decltype(a)>, RoundFamilyState>)
      return round_ops::laplacian_f(a, W, &f);
    else if constexpr (std::is_same_v<std::decay_t<decltype(a)>, TorusGridState>)
      return torus_ops::laplacian_f(a, W, &f);
    else
      return axisym_ops::laplacian_f(a, W, &f);
  }, s);
}

SymTensorField rm_action(const MetricState& s, const SymTensorField& W) {
  check_field(s, W, "rm_action");
  return std::visit([&](const auto& a) {
    if constexpr (std::is_same_v<std::decay_t<decltype(a)>, RoundFamilyState>)
      return round_ops::rm_action(a, W);
    else if constexpr (std::is_same_v<std::decay_t<decltype(a)>, TorusGridState>)
      return torus_ops::rm_action(a, W);
    else
      return axisym_ops::rm_action(a, W);
  }, s);
}

SymTensorField box_f(const MetricState& s, const SymTensorField& W, const ScalarField& f) {
  SymTensorField out = laplacian_f(s, W, f);
  SymTensorField rm = rm_action(s, W);
  axpy(2.0, rm, out);
  return out;
}

// --- pointwise algebra -----------------------------------------------------

ScalarField pointwise_inner(const MetricState& s, const SymTensorField& U, const SymTensorField& W) {
  check_field(s, U, "pointwise_inner");
  check_field(s, W, "pointwise_inner");
  ScalarField out(field_shape(s));
  if (auto* r = std::get_if<RoundFamilyState>(&s)) {
    out.at(0, 0) = U.at(0, 0) * W.at(0, 0) * r->n;
    return out;
  }
  if (auto* t = std::get_if<TorusGridState>(&s)) {
    const auto& G = t->geom;
    for (std::size_t p = 0; p < out.data.size(); ++p) {
      const double gi[2][2] = {{G.inv11[p], G.inv12[p]}, {G.inv12[p], G.inv22[p]}};
      double acc = 0;
      for (int i = 0; i < 2; ++i)
        for (int j = 0; j < 2; ++j)
          for (int a = 0; a < 2; ++a)
            for (int b = 0; b < 2; ++b)
              acc += gi[i][a] * gi[j][b] * wfull(U, i, j, p) * wfull(W, a, b, p);
      out.data[p] = acc;
    }
    return out;
  }
  for (std::size_t p = 0; p < out.data.size(); ++p)
    out.data[p] = U.at(0, p) * W.at(0, p) + U.at(1, p) * W.at(1, p);
  return out;
}

ScalarField pointwise_inner(const MetricState& s, const CovectorField& X, const CovectorField& Y) {
  check_field(s, X, "pointwise_inner");
  check_field(s, Y, "pointwise_inner");
  ScalarField out(field_shape(s));
  if (std::get_if<RoundFamilyState>(&s)) {
    out.at(0, 0) = X.at(0, 0) * Y.at(0, 0);
    return out;
  }
  if (auto* t = std::get_if<TorusGridState>(&s)) {
    const auto& G = t->geom;
    for (std::size_t p = 0; p < out.data.size(); ++p)
      out.data[p] = G.inv11[p] * X.at(0, p) * Y.at(0, p) +
                    G.inv12[p] * (X.at(0, p) * Y.at(1, p) + X.at(1, p) * Y.at(0, p)) +
                    G.inv22[p] * X.at(1, p) * Y.at(1, p);
    return out;
  }
  for (std::size_t p = 0; p < out.data.size(); ++p)
    out.data[p] = X.at(0, p) * Y.at(0, p);
  return out;
}

ScalarField pointwise_norm2(const MetricState& s, const SymTensorField& W) {
  return pointwise_inner(s, W, W);
}

ScalarField pointwise_norm2(const MetricState& s, const CovectorField& X) {
  return pointwise_inner(s, X, X);
}

ScalarField pointwise_norm2(const MetricState& s, const Tensor3Field& T) {
  check_field(s, T, "pointwise_norm2");
  ScalarField out(field_shape(s));
  if (std::get_if<RoundFamilyState>(&s)) {
    out.at(0, 0) = 0.0;
    return out;
  }
  if (auto* t = std::get_if<TorusGridState>(&s)) {
    const auto& G = t->geom;
    for (std::size_t p = 0; p < out.data.size(); ++p) {
      const double gi[2][2] = {{G.inv11[p], G.inv12[p]}, {G.inv12[p], G.inv22[p]}};
      double acc = 0;
      for (int k = 0; k < 2; ++k)
        for (int i = 0; i < 2; ++i)
          for (int j = 0; j < 2; ++j)
            for (int a = 0; a < 2; ++a)
              for (int b = 0; b < 2; ++b)
                for (int c = 0; c < 2; ++c)
                  acc += gi[k][a] * gi[i][b] * gi[j][c] * T.at(k * 3 + i + j, p) *
                         T.at(a * 3 + b + c, p);
      out.data[p] = acc;
    }
    return out;
  }
  for (std::size_t p = 0; p < out.data.size(); ++p) {
    const double n1 = T.at(0, p), n2 = T.at(1, p), n4 = T.at(2, p);
    out.data[p] = n1 * n1 + n2 * n2 + 2.0 * n4 * n4;
  }
  return out;
}

ScalarField trace(const MetricState& s, const SymTensorField& W) {
  check_field(s, W, "trace");
  ScalarField out(field_shape(s));
  if (auto* r = std::get_if<RoundFamilyState>(&s)) {
    out.at(0, 0) = r->n * W.at(0, 0);
    return out;
  }
  if (auto* t = std::get_if<TorusGridState>(&s)) {
    const auto& G = t->geom;
    for (std::size_t p = 0; p < out.data.size(); ++p)
      out.data[p] = G.inv11[p] * W.at(0, p) + 2.0 * G.inv12[p] * W.at(1, p) +
                    G.inv22[p] * W.at(2, p);
    return out;
  }
  for (std::size_t p = 0; p < out.data.size(); ++p)
    out.data[p] = W.at(0, p) + W.at(1, p);
  return out;
}

SymTensorField tensor_square(const MetricState& s, const SymTensorField& W) {
  check_field(s, W, "tensor_square");
  SymTensorField out(field_shape(s));
  if (std::get_if<RoundFamilyState>(&s)) {
    out.at(0, 0) = W.at(0, 0) * W.at(0, 0);
    return out;
  }
  if (auto* t = std::get_if<TorusGridState>(&s)) {
    const auto& G = t->geom;
    for (std::size_t p = 0; p < t->g11.size(); ++p) {
      const double gi[2][2] = {{G.inv11[p], G.inv12[p]}, {G.inv12[p], G.inv22[p]}};
      for (int i = 0; i < 2; ++i)
        for (int j = i; j < 2; ++j) {
          double acc = 0;
          for (int a = 0; a < 2; ++a)
            for (int b = 0; b < 2; ++b)
              acc += wfull(W, i, a, p) * gi[a][b] * wfull(W, b, j, p);
          out.at(i + j, p) = acc;
        }
    }
    return out;
  }
  for (std::size_t p = 0; p < out.data.size() / 2; ++p) {
    out.at(0, p) = W.at(0, p) * W.at(0, p);
    out.at(1, p) = W.at(1, p) * W.at(1, p);
  }
  return out;
}

ScalarField apply_bilinear(const MetricState& s, const SymTensorField& W, const CovectorField& X) {
  check_field(s, W, "apply_bilinear");
  check_field(s, X, "apply_bilinear");
  ScalarField out(field_shape(s));
  if (std::get_if<RoundFamilyState>(&s)) {
    out.at(0, 0) = W.at(0, 0) * X.at(0, 0) * X.at(0, 0);
    return out;
  }
  if (auto* t = std::get_if<TorusGridState>(&s)) {
    const auto& G = t->geom;
    for (std::size_t p = 0; p < out.data.size(); ++p) {
      const double gi[2][2] = {{G.inv11[p], G.inv12[p]}, {G.inv12[p], G.inv22[p]}};
      double xup[2];
      for (int i = 0; i < 2; ++i) xup[i] = gi[i][0] * X.at(0, p) + gi[i][1] * X.at(1, p);
      out.data[p] = wfull(W, 0, 0, p) * xup[0] * xup[0] +
                    2.0 * wfull(W, 0, 1, p) * xup[0] * xup[1] +
                    wfull(W, 1, 1, p) * xup[1] * xup[1];
    }
    return out;
  }
  for (std::size_t p = 0; p < out.data.size(); ++p)
    out.data[p] = W.at(0, p) * X.at(0, p) * X.at(0, p);
  return out;
}

CovectorField contract_vector(const MetricState& s, const SymTensorField& W, const CovectorField& X) {
  check_field(s, W, "contract_vector");
  check_field(s, X, "contract_vector");
  CovectorField out(field_shape(s));
  if (std::get_if<RoundFamilyState>(&s)) {
    out.at(0, 0) = W.at(0, 0) * X.at(0, 0);
    return out;
  }
  if (auto* t = std::get_if<TorusGridState>(&s)) {
    const auto& G = t->geom;
    for (std::size_t p = 0; p < t->g11.size(); ++p) {
      const double gi[2][2] = {{G.inv11[p], G.inv12[p]}, {G.inv12[p], G.inv22[p]}};
      double xup[2];
      for (int i = 0; i < 2; ++i) xup[i] = gi[i][0] * X.at(0, p) + gi[i][1] * X.at(1, p);
      for (int j = 0; j < 2; ++j)
        out.at(j, p) = wfull(W, 0, j, p) * xup[0] + wfull(W, 1, j, p) * xup[1];
    }
    return out;
  }
  for (std::size_t p = 0; p < out.data.size(); ++p)
    out.at(0, p) = W.at(0, p) * X.at(0, p);
  return out;
}

SymTensorField sym_anticommutator(const MetricState& s, const SymTensorField& A,
                                  const SymTensorField& B) {
  check_field(s, A, "sym_anticommutator");
  check_field(s, B, "sym_anticommutator");
  SymTensorField out(field_shape(s));
  if (std::get_if<RoundFamilyState>(&s)) {
    out.at(0, 0) = A.at(0, 0) * B.at(0, 0);
    return out;
  }
  if (auto* t = std::get_if<TorusGridState>(&s)) {
    const auto& G = t->geom;
    for (std::size_t p = 0; p < t->g11.size(); ++p) {
      const double gi[2][2] = {{G.inv11[p], G.inv12[p]}, {G.inv12[p], G.inv22[p]}};
      for (int i = 0; i < 2; ++i)
        for (int j = i; j < 2; ++j) {
          double acc = 0;
          for (int a = 0; a < 2; ++a)
            for (int b = 0; b < 2; ++b)
              acc += 0.5 * gi[a][b] *
                     (wfull(A, i, a, p) * wfull(B, b, j, p) +
                      wfull(B, i, a, p) * wfull(A, b, j, p));
          out.at(i + j, p) = acc;
        }
    }
    return out;
  }
  for (std::size_t p = 0; p < out.data.size() / 2; ++p) {
    out.at(0, p) = A.at(0, p) * B.at(0, p);
    out.at(1, p) = A.at(1, p) * B.at(1, p);
  }
  return out;
}

SymTensorField metric_tensor(const MetricState& s) {
  SymTensorField out(field_shape(s));
  if (std::get_if<RoundFamilyState>(&s)) {
    out.at(0, 0) = 1.0;
    return out;
  }
  if (auto* t = std::get_if<TorusGridState>(&s)) {
    std::copy(t->g11.begin(), t->g11.end(), out.comp(0));
    std::copy(t->g12.begin(), t->g12.end(), out.comp(1));
    std::copy(t->g22.begin(), t->g22.end(), out.comp(2));
    return out;
  }
  const auto& a = std::get<AxisymSphereState>(s);
  for (int j = 0; j < a.M; ++j) {
    out.at(0, j) = 1.0;
    out.at(1, j) = 1.0;
  }
  return out;
}

// --- quadrature ------------------------------------------------------------

WeightedMeasure weighted_measure(const MetricState& s, const ScalarField& f) {
  check_field(s, f, "weighted_measure");
  WeightedMeasure m = std::visit([&](const auto& a) {
    if constexpr (std::is_same_v<std::decay_t<decltype(a)>, RoundFamilyState>)
      return round_ops::measure(a, &f);
    else if constexpr (std::is_same_v<std::decay_t<decltype(a)>, TorusGridState>)
      return torus_ops::measure(a, &f);
    else
      return axisym_ops::measure(a, &f);
  }, s);
  for (double w : m.w)
    if (!(w >= 0.0) || !std::isfinite(w))
      throw invalid_field_error("weighted_measure: non-finite or negative weight");
  return m;
}

WeightedMeasure volume_measure(const MetricState& s) {
  return std::visit([&](const auto& a) {
    if constexpr (std::is_same_v<std::decay_t<decltype(a)>, RoundFamilyState>)
      return round_ops::measure(a, nullptr);
    else if constexpr (std::is_same_v<std::decay_t<decltype(a)>, TorusGridState>)
      return torus_ops::measure(a, nullptr);
    else
      return axisym_ops::measure(a, nullptr);
  }, s);
}

double integrate(const ScalarField& u, const WeightedMeasure& m) {
  detail::check_same_shape(u.shape, m.shape, "integrate");
  double acc = 0;
  for (std::size_t p = 0; p < u.data.size(); ++p) {
    if (!std::isfinite(u.data[p])) throw invalid_field_error("integrate: non-finite field value");
    acc += u.data[p] * m.w[p];
  }
  return acc;
}

namespace {
template <class F>
double inner_impl(const MetricState& s, const F& a, const F& b, const WeightedMeasure& m) {
  ScalarField pw = pointwise_inner(s, a, b);
  return integrate(pw, m);
}
}  // namespace

double inner(const MetricState& s, const ScalarField& u, const ScalarField& v, const WeightedMeasure& m) {
  check_field(s, u, "inner");
  ScalarField pw(field_shape(s));
  for (std::size_t p = 0; p < pw.data.size(); ++p) pw.data[p] = u.data[p] * v.data[p];
  return integrate(pw, m);
}

double inner(const MetricState& s, const CovectorField& X, const CovectorField& Y, const WeightedMeasure& m) {
  return inner_impl(s, X, Y, m);
}

double inner(const MetricState& s, const SymTensorField& U, const SymTensorField& W, const WeightedMeasure& m) {
  return inner_impl(s, U, W, m);
}

double inner(const MetricState& s, const Tensor3Field& T, const Tensor3Field& U, const WeightedMeasure& m) {
  check_field(s, T, "inner");
  check_field(s, U, "inner");
  ScalarField pw(field_shape(s));
  if (std::get_if<RoundFamilyState>(&s)) {
    pw.at(0, 0) = 0.0;
  } else if (auto* t = std::get_if<TorusGridState>(&s)) {
    const auto& G = t->geom;
    for (std::size_t p = 0; p < pw.data.size(); ++p) {
      const double gi[2][2] = {{G.inv11[p], G.inv12[p]}, {G.inv12[p], G.inv22[p]}};
      double acc = 0;
      for (int k = 0; k < 2; ++k)
        for (int i = 0; i < 2; ++i)
          for (int j = 0; j < 2; ++j)
            for (int a = 0; a < 2; ++a)
              for (int b = 0; b < 2; ++b)
                for (int c = 0; c < 2; ++c)
                  acc += gi[k][a] * gi[i][b] * gi[j][c] * T.at(k * 3 + i + j, p) *
                         U.at(a * 3 + b + c, p);
      pw.data[p] = acc;
    }
  } else {
    for (std::size_t p = 0; p < pw.data.size(); ++p)
      pw.data[p] = T.at(0, p) * U.at(0, p) + T.at(1, p) * U.at(1, p) +
                   2.0 * T.at(2, p) * U.at(2, p);
  }
  return integrate(pw, m);
}

double sup_norm(const MetricState& s, const ScalarField& u) {
  check_field(s, u, "sup_norm");
  double mx = 0;
  for (double v : u.data) {
    if (!std::isfinite(v)) throw invalid_field_error("sup_norm: non-finite value");
    mx = std::max(mx, std::abs(v));
  }
  return mx;
}

double sup_norm(const MetricState& s, const CovectorField& X) {
  ScalarField pw = pointwise_norm2(s, X);
  double mx = 0;
  for (double v : pw.data) mx = std::max(mx, v);
  return std::sqrt(mx);
}

double sup_norm(const MetricState& s, const SymTensorField& W) {
  ScalarField pw = pointwise_norm2(s, W);
  double mx = 0;
  for (double v : pw.data) mx = std::max(mx, v);
  return std::sqrt(mx);
}

// --- frame components ------------------------------------------------------

std::vector<Frame2> frame_components(const MetricState& s, const SymTensorField& W) {
  check_field(s, W, "frame_components");
  if (auto* t = std::get_if<TorusGridState>(&s)) return torus_ops::frame_sym(*t, W);
  if (auto* a = std::get_if<AxisymSphereState>(&s)) return axisym_ops::frame_sym(*a, W);
  throw unsupported_error("frame_components: not defined for the round-family arena");
}

std::vector<double> frame_components(const MetricState& s, const CovectorField& X) {
  check_field(s, X, "frame_components");
  if (auto* t = std::get_if<TorusGridState>(&s)) return torus_ops::frame_cov(*t, X);
  if (auto* a = std::get_if<AxisymSphereState>(&s)) return axisym_ops::frame_cov(*a, X);
  throw unsupported_error("frame_components: not defined for the round-family arena");
}

std::vector<Frame3> frame_cov_deriv(const MetricState& s, const SymTensorField& W) {
  check_field(s, W, "frame_cov_deriv");
  if (auto* t = std::get_if<TorusGridState>(&s)) return torus_ops::frame_grad_sym(*t, W);
  if (auto* a = std::get_if<AxisymSphereState>(&s)) return axisym_ops::frame_grad_sym(*a, W);
  throw unsupported_error("frame_cov_deriv: not defined for the round-family arena");
}

std::vector<Frame4> frame_second_deriv(const MetricState& s, const SymTensorField& W) {
  check_field(s, W, "frame_second_deriv");
  if (auto* t = std::get_if<TorusGridState>(&s)) return torus_ops::frame_second_sym(*t, W);
  if (auto* a = std::get_if<AxisymSphereState>(&s)) return axisym_ops::frame_second_sym(*a, W);
  throw unsupported_error("frame_second_deriv: not defined for the round-family arena");
}

}  // namespace rflab
