#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "rflab/errors.hpp"

namespace rflab {

enum class ArenaKind { round_family, torus_grid, axisym_sphere };

inline const char* arena_name(ArenaKind k) {
  switch (k) {
    case ArenaKind::round_family: return "round_family";
    case ArenaKind::torus_grid: return "torus_grid";
    case ArenaKind::axisym_sphere: return "axisym_sphere";
  }
  return "?";
}

// Node layout of a field. torus: n0 = n1 = N; axisym: n0 = M, n1 = 1;
// round family: 1x1 (homogeneous data, one value per component).
struct FieldShape {
  ArenaKind kind = ArenaKind::round_family;
  int n0 = 1;
  int n1 = 1;
  int nodes() const { return n0 * n1; }
  bool operator==(const FieldShape&) const = default;
};

namespace detail {

inline void check_same_shape(const FieldShape& a, const FieldShape& b,
                             const char* where) {
  if (!(a == b))
    throw arena_mismatch_error(std::string(where) + ": fields live on different arenas/grids");
}

struct FieldData {
  FieldShape shape;
  int ncomp = 1;
  std::vector<double> data;  // component-major: data[c * nodes + node]

  FieldData() = default;
  FieldData(const FieldShape& s, int comps)
      : shape(s), ncomp(comps), data(static_cast<std::size_t>(comps) * s.nodes(), 0.0) {}

  double& at(int c, int node) { return data[static_cast<std::size_t>(c) * shape.nodes() + node]; }
  double at(int c, int node) const { return data[static_cast<std::size_t>(c) * shape.nodes() + node]; }
  const double* comp(int c) const { return data.data() + static_cast<std::size_t>(c) * shape.nodes(); }
  double* comp(int c) { return data.data() + static_cast<std::size_t>(c) * shape.nodes(); }
};

}  // namespace detail

// Component conventions per arena:
//   ScalarField   : 1 component everywhere.
//   CovectorField : torus (X_1, X_2) coordinate components;
//                   axisym: single orthonormal-frame theta component (odd parity);
//                   round family: single component, always 0 (no invariant covectors).
//   SymTensorField: torus (W_11, W_12, W_22) coordinate components;
//                   axisym: orthonormal-frame diagonal (W_tt, W_pp);
//                   round family: single coefficient lam meaning W = lam * g.
//   Tensor3Field  : covariant derivative storage; torus: k*3+s (k = deriv index,
//                   s in {11,12,22}); axisym: frame (ttt, tpp, ptp); round: 0.
struct ScalarField : detail::FieldData {
  ScalarField() = default;
  explicit ScalarField(const FieldShape& s) : FieldData(s, 1) {}
};

struct CovectorField : detail::FieldData {
  CovectorField() = default;
  explicit CovectorField(const FieldShape& s)
      : FieldData(s, s.kind == ArenaKind::torus_grid ? 2 : 1) {}
};

struct SymTensorField : detail::FieldData {
  SymTensorField() = default;
  explicit SymTensorField(const FieldShape& s)
      : FieldData(s, s.kind == ArenaKind::torus_grid   ? 3
                     : s.kind == ArenaKind::axisym_sphere ? 2
                                                          : 1) {}
};

struct Tensor3Field : detail::FieldData {
  Tensor3Field() = default;
  explicit Tensor3Field(const FieldShape& s)
      : FieldData(s, s.kind == ArenaKind::torus_grid   ? 6
                     : s.kind == ArenaKind::axisym_sphere ? 3
                                                          : 1) {}
};

// Quadrature weights times volume element times e^{-f}, per node.
struct WeightedMeasure {
  FieldShape shape;
  std::vector<double> w;
  double mass = 0.0;  // sum of weights = integral of 1
};

template <class F>
F zeros_like(const F& f) {
  F out = f;
  std::fill(out.data.begin(), out.data.end(), 0.0);
  return out;
}

template <class F>
void axpy(double a, const F& x, F& y) {
  detail::check_same_shape(x.shape, y.shape, "axpy");
  for (std::size_t i = 0; i < y.data.size(); ++i) y.data[i] += a * x.data[i];
}

template <class F>
void scale(double a, F& x) {
  for (auto& v : x.data) v *= a;
}

template <class F>
F lincomb(double a, const F& x, double b, const F& y) {
  detail::check_same_shape(x.shape, y.shape, "lincomb");
  F out = x;
  for (std::size_t i = 0; i < out.data.size(); ++i)
    out.data[i] = a * x.data[i] + b * y.data[i];
  return out;
}

inline ScalarField constant_field(const FieldShape& s, double value) {
  ScalarField f(s);
  std::fill(f.data.begin(), f.data.end(), value);
  return f;
}

// Curvature of a state. For all three arenas the full curvature tensor has a
// single functional degree of freedom (constant sectional curvature for the
// round family, Gauss curvature for the 2-D grids); `sectional` stores it and
// R_{ijkl} = sectional * (g_jk g_il - g_ik g_jl) reconstructs the tensor with
// its algebraic symmetries exact.
struct CurvatureBundle {
  ScalarField sectional;
  SymTensorField Rc;
  ScalarField R;
};

}  // namespace rflab
