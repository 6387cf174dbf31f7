#pragma once

#include <cmath>
#include <vector>

#include "rflab/calculus.hpp"
#include "rflab/rng.hpp"

namespace rflab::testing {

constexpr double kPi = 3.14159265358979323846;

// A generic smooth bumpy torus metric (band-limited, resolvable at N = 16).
inline TorusGridState bumpy_torus(int N, int order, double amp = 0.2) {
  const double L = 2 * kPi;
  std::vector<double> g11(N * N), g12(N * N), g22(N * N);
  for (int i = 0; i < N; ++i)
    for (int j = 0; j < N; ++j) {
      const double x = i * L / N, y = j * L / N;
      g11[i * N + j] = std::exp(amp * std::sin(x + y));
      g22[i * N + j] = std::exp(0.75 * amp * std::cos(2 * x - y));
      g12[i * N + j] = 0.4 * amp * std::sin(x) * std::sin(y);
    }
  return TorusGridState(N, L, g11, g12, g22, order);
}

inline ScalarField bumpy_torus_potential(const FieldShape& sh) {
  ScalarField f(sh);
  const int N = sh.n0;
  for (int i = 0; i < N; ++i)
    for (int j = 0; j < N; ++j) {
      const double x = 2 * kPi * i / N, y = 2 * kPi * j / N;
      f.data[i * N + j] = 0.3 * std::sin(x) * std::cos(y) + 0.1 * std::cos(x);
    }
  return f;
}

// Deformed pole-regular sphere (a != beta in the interior).
inline AxisymSphereState bumpy_sphere(int M, int order, double amp = 0.25) {
  std::vector<double> av(M), bv(M);
  for (int j = 0; j < M; ++j) {
    const double th = kPi * j / (M - 1);
    const double s2 = std::sin(th) * std::sin(th);
    av[j] = 2.0 * (1 + amp * s2 * std::cos(2 * th));
    bv[j] = 2.0 * (1 + 0.6 * amp * s2);
  }
  return AxisymSphereState(M, av, bv, order);
}

inline ScalarField bumpy_sphere_potential(const FieldShape& sh) {
  ScalarField f(sh);
  const int M = sh.n0;
  for (int j = 0; j < M; ++j) {
    const double th = kPi * j / (M - 1);
    f.data[j] = 0.4 * std::cos(th) + 0.2 * std::sin(th) * std::sin(th);
  }
  return f;
}

// Band-limited random fields for property tests.
inline ScalarField random_scalar_torus(const FieldShape& sh, Rng& rng, int kmax = 2) {
  ScalarField u(sh);
  const int N = sh.n0;
  for (int kx = -kmax; kx <= kmax; ++kx)
    for (int ky = 0; ky <= kmax; ++ky) {
      if (ky == 0 && kx <= 0) continue;
      const double a = rng.normal() / (1 + kx * kx + ky * ky);
      const double ph = rng.uniform(0, 2 * kPi);
      for (int i = 0; i < N; ++i)
        for (int j = 0; j < N; ++j)
          u.data[i * N + j] += a * std::cos(2 * kPi * (kx * i + ky * j) / double(N) + ph);
    }
  return u;
}

inline SymTensorField random_sym_torus(const FieldShape& sh, Rng& rng, int kmax = 2) {
  SymTensorField W(sh);
  for (int c = 0; c < 3; ++c) {
    ScalarField u = random_scalar_torus(sh, rng, kmax);
    std::copy(u.data.begin(), u.data.end(), W.comp(c));
  }
  return W;
}

inline CovectorField random_cov_torus(const FieldShape& sh, Rng& rng, int kmax = 2) {
  CovectorField X(sh);
  for (int c = 0; c < 2; ++c) {
    ScalarField u = random_scalar_torus(sh, rng, kmax);
    std::copy(u.data.begin(), u.data.end(), X.comp(c));
  }
  return X;
}

// Pole-regular random axisym fields.
inline ScalarField random_scalar_axisym(const FieldShape& sh, Rng& rng) {
  ScalarField u(sh);
  const int M = sh.n0;
  const double a1 = rng.normal(), a2 = rng.normal(), a3 = rng.normal();
  for (int j = 0; j < M; ++j) {
    const double ct = std::cos(kPi * j / (M - 1));
    u.data[j] = a1 * ct + a2 * (ct * ct) + 0.5 * a3 * ct * ct * ct;
  }
  return u;
}

inline SymTensorField random_sym_axisym(const FieldShape& sh, Rng& rng) {
  SymTensorField W(sh);
  const int M = sh.n0;
  const double c0 = rng.normal(), c1 = rng.normal(), d1 = rng.normal(), d2 = rng.normal();
  for (int j = 0; j < M; ++j) {
    const double th = kPi * j / (M - 1);
    const double s2 = std::sin(th) * std::sin(th), ct = std::cos(th);
    const double common = c0 + c1 * ct;
    W.at(0, j) = common + s2 * (0.8 * d1 + 0.3 * d2 * ct);
    W.at(1, j) = common + s2 * (0.2 * d1 - 0.5 * d2 * ct);
  }
  return W;
}

inline CovectorField random_cov_axisym(const FieldShape& sh, Rng& rng) {
  CovectorField X(sh);
  const int M = sh.n0;
  const double a = rng.normal(), b = rng.normal();
  for (int j = 0; j < M; ++j) {
    const double th = kPi * j / (M - 1);
    X.at(0, j) = std::sin(th) * (a + b * std::cos(th));
  }
  return X;
}

}  // namespace rflab::testing
