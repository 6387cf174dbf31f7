#include <cmath>
#include <string>

#include "arena_ops.hpp"
#include "rflab/errors.hpp"

namespace rflab {

namespace {

inline int sym_index(int i, int j) { return i + j; }  // (0,0)->0 (0,1)/(1,0)->1 (1,1)->2

inline double sym_at(const SymTensorField& W, int s, int node) { return W.at(s, node); }

}  // namespace

namespace torus_ops {

namespace {

inline int wrap_up(int i, int N) { return i + 1 == N ? 0 : i + 1; }
inline int wrap_dn(int i, int N) { return i == 0 ? N - 1 : i - 1; }

}  // namespace

void d1(const std::vector<double>& u, int axis, int N, double h, int order,
        std::vector<double>& out) {
  out.resize(u.size());
  const double c2 = 1.0 / (2.0 * h);
  const double c4a = 8.0 / (12.0 * h), c4b = 1.0 / (12.0 * h);
  for (int i = 0; i < N; ++i) {
    const int ip = wrap_up(i, N), im = wrap_dn(i, N);
    const int ip2 = wrap_up(ip, N), im2 = wrap_dn(im, N);
    const double* row = u.data() + i * N;
    const double* rp = u.data() + ip * N;
    const double* rm = u.data() + im * N;
    const double* rp2 = u.data() + ip2 * N;
    const double* rm2 = u.data() + im2 * N;
    double* o = out.data() + i * N;
    if (axis == 0) {
      if (order == 2) {
        for (int j = 0; j < N; ++j) o[j] = (rp[j] - rm[j]) * c2;
      } else {
        for (int j = 0; j < N; ++j) o[j] = c4a * (rp[j] - rm[j]) - c4b * (rp2[j] - rm2[j]);
      }
    } else {
      for (int j = 0; j < N; ++j) {
        const int jp = wrap_up(j, N), jm = wrap_dn(j, N);
        if (order == 2) {
          o[j] = (row[jp] - row[jm]) * c2;
        } else {
          const int jp2 = wrap_up(jp, N), jm2 = wrap_dn(jm, N);
          o[j] = c4a * (row[jp] - row[jm]) - c4b * (row[jp2] - row[jm2]);
        }
      }
    }
  }
}

void d2(const std::vector<double>& u, int axis, int N, double h, int order,
        std::vector<double>& out) {
  out.resize(u.size());
  const double c2 = 1.0 / (h * h);
  const double c4 = 1.0 / (12.0 * h * h);
  for (int i = 0; i < N; ++i) {
    const int ip = wrap_up(i, N), im = wrap_dn(i, N);
    const int ip2 = wrap_up(ip, N), im2 = wrap_dn(im, N);
    const double* row = u.data() + i * N;
    const double* rp = u.data() + ip * N;
    const double* rm = u.data() + im * N;
    const double* rp2 = u.data() + ip2 * N;
    const double* rm2 = u.data() + im2 * N;
    double* o = out.data() + i * N;
    if (axis == 0) {
      if (order == 2) {
        for (int j = 0; j < N; ++j) o[j] = (rp[j] - 2.0 * row[j] + rm[j]) * c2;
      } else {
        for (int j = 0; j < N; ++j)
          o[j] = c4 * (-rp2[j] + 16.0 * rp[j] - 30.0 * row[j] + 16.0 * rm[j] - rm2[j]);
      }
    } else {
      for (int j = 0; j < N; ++j) {
        const int jp = wrap_up(j, N), jm = wrap_dn(j, N);
        if (order == 2) {
          o[j] = (row[jp] - 2.0 * row[j] + row[jm]) * c2;
        } else {
          const int jp2 = wrap_up(jp, N), jm2 = wrap_dn(jm, N);
          o[j] = c4 * (-row[jp2] + 16.0 * row[jp] - 30.0 * row[j] + 16.0 * row[jm] - row[jm2]);
        }
      }
    }
  }
}

void d11(const std::vector<double>& u, int N, double h, int order,
         std::vector<double>& out) {
  std::vector<double> tmp;
  d1(u, 0, N, h, order, tmp);
  d1(tmp, 1, N, h, order, out);
}

}  // namespace torus_ops

TorusGridState::TorusGridState(int N_, double L_, std::vector<double> g11_,
                               std::vector<double> g12_, std::vector<double> g22_,
                               int stencil_order_)
    : N(N_), L(L_), stencil_order(stencil_order_), g11(std::move(g11_)),
      g12(std::move(g12_)), g22(std::move(g22_)) {
  if (N < 8) throw error("torus grid: N must be >= 8");
  if (!(L > 0)) throw error("torus grid: period length must be positive");
  if (stencil_order != 2 && stencil_order != 4)
    throw error("torus grid: stencil order must be 2 or 4");
  const std::size_t n = static_cast<std::size_t>(N) * N;
  if (g11.size() != n || g12.size() != n || g22.size() != n)
    throw error("torus grid: metric component arrays must have N*N entries");

  const double hh = h();
  auto& G = geom;
  G.det.resize(n);
  G.sqrtdet.resize(n);
  G.inv11.resize(n);
  G.inv12.resize(n);
  G.inv22.resize(n);
  for (int k = 0; k < 2; ++k)
    for (int s = 0; s < 3; ++s) G.gamma[k][s].resize(n);
  for (int m = 0; m < 2; ++m)
    for (int k = 0; k < 2; ++k)
      for (int s = 0; s < 3; ++s) G.dgamma[m][k][s].resize(n);
  G.gauss.resize(n);
  G.l00.resize(n);
  G.l10.resize(n);
  G.l11.resize(n);
  G.il00.resize(n);
  G.il10.resize(n);
  G.il11.resize(n);

  for (std::size_t p = 0; p < n; ++p) {
    if (!std::isfinite(g11[p]) || !std::isfinite(g12[p]) || !std::isfinite(g22[p]))
      throw degenerate_metric_error(
          "torus grid: non-finite metric at node " + std::to_string(p), static_cast<int>(p));
    const double det = g11[p] * g22[p] - g12[p] * g12[p];
    if (!(g11[p] > 0.0) || !(det > kDetFloor))
      throw degenerate_metric_error(
          "torus grid: metric not positive definite at node " + std::to_string(p) +
              " (det = " + std::to_string(det) + ")",
          static_cast<int>(p));
    G.det[p] = det;
    G.sqrtdet[p] = std::sqrt(det);
    G.inv11[p] = g22[p] / det;
    G.inv12[p] = -g12[p] / det;
    G.inv22[p] = g11[p] / det;
    G.l00[p] = std::sqrt(g11[p]);
    G.l10[p] = g12[p] / G.l00[p];
    G.l11[p] = G.sqrtdet[p] / G.l00[p];
    G.il00[p] = 1.0 / G.l00[p];
    G.il11[p] = 1.0 / G.l11[p];
    G.il10[p] = -G.l10[p] / (G.l00[p] * G.l11[p]);
  }

  // First and second derivatives of the metric components.
  const std::vector<double>* gcomp[3] = {&g11, &g12, &g22};
  std::vector<double> dg[2][3];
  std::vector<double> ddg[3][3];  // [xx, xy, yy][comp]
  for (int s = 0; s < 3; ++s) {
    torus_ops::d1(*gcomp[s], 0, N, hh, stencil_order, dg[0][s]);
    torus_ops::d1(*gcomp[s], 1, N, hh, stencil_order, dg[1][s]);
    torus_ops::d2(*gcomp[s], 0, N, hh, stencil_order, ddg[0][s]);
    torus_ops::d11(*gcomp[s], N, hh, stencil_order, ddg[1][s]);
    torus_ops::d2(*gcomp[s], 1, N, hh, stencil_order, ddg[2][s]);
  }
  auto dd = [&](int m1, int m2, int s, std::size_t p) {
    return ddg[m1 + m2][s][p];  // (0,0)->xx, (0,1)/(1,0)->xy, (1,1)->yy
  };

  for (std::size_t p = 0; p < n; ++p) {
    const double ginv[2][2] = {{G.inv11[p], G.inv12[p]}, {G.inv12[p], G.inv22[p]}};
    double dgin[2][2][2];  // d_m g^{kl}
    for (int m = 0; m < 2; ++m)
      for (int k = 0; k < 2; ++k)
        for (int l = 0; l < 2; ++l) {
          double acc = 0;
          for (int a = 0; a < 2; ++a)
            for (int b = 0; b < 2; ++b)
              acc -= ginv[k][a] * dg[m][sym_index(a, b)][p] * ginv[b][l];
          dgin[m][k][l] = acc;
        }
    for (int k = 0; k < 2; ++k)
      for (int i = 0; i < 2; ++i)
        for (int j = i; j < 2; ++j) {
          double acc = 0;
          for (int l = 0; l < 2; ++l)
            acc += ginv[k][l] * (dg[i][sym_index(j, l)][p] + dg[j][sym_index(i, l)][p] -
                                 dg[l][sym_index(i, j)][p]);
          G.gamma[k][sym_index(i, j)][p] = 0.5 * acc;
        }
    for (int m = 0; m < 2; ++m)
      for (int k = 0; k < 2; ++k)
        for (int i = 0; i < 2; ++i)
          for (int j = i; j < 2; ++j) {
            double acc = 0;
            for (int l = 0; l < 2; ++l) {
              acc += dgin[m][k][l] * (dg[i][sym_index(j, l)][p] + dg[j][sym_index(i, l)][p] -
                                      dg[l][sym_index(i, j)][p]);
              acc += ginv[k][l] * (dd(m, i, sym_index(j, l), p) + dd(m, j, sym_index(i, l), p) -
                                   dd(m, l, sym_index(i, j), p));
            }
            G.dgamma[m][k][sym_index(i, j)][p] = 0.5 * acc;
          }
    // R_0101 = g_{m1} (d_0 Gamma^m_{10} - d_1 Gamma^m_{00}
    //                  + Gamma^m_{0p} Gamma^p_{10} - Gamma^m_{1p} Gamma^p_{00})
    const double gcol[2] = {g12[p], g22[p]};
    double r0101 = 0;
    for (int m = 0; m < 2; ++m) {
      double rm = G.dgamma[0][m][sym_index(1, 0)][p] - G.dgamma[1][m][sym_index(0, 0)][p];
      for (int q = 0; q < 2; ++q)
        rm += G.gamma[m][sym_index(0, q)][p] * G.gamma[q][sym_index(1, 0)][p] -
              G.gamma[m][sym_index(1, q)][p] * G.gamma[q][sym_index(0, 0)][p];
      r0101 += gcol[m] * rm;
    }
    G.gauss[p] = -r0101 / G.det[p];
  }
}

TorusGridState TorusGridState::flat(int N_, double L_, int stencil_order_) {
  const std::size_t n = static_cast<std::size_t>(N_) * N_;
  return TorusGridState(N_, L_, std::vector<double>(n, 1.0), std::vector<double>(n, 0.0),
                        std::vector<double>(n, 1.0), stencil_order_);
}

namespace torus_ops {

namespace {

// Expand symmetric storage to full 2x2 per node on demand.
inline double wfull(const SymTensorField& W, int i, int j, int p) {
  return W.at(sym_index(i, j), p);
}

struct Ctx {
  const TorusGridState& s;
  int N;
  double h;
  int order;
  std::size_t n;
  Ctx(const TorusGridState& st)
      : s(st), N(st.N), h(st.h()), order(st.stencil_order),
        n(static_cast<std::size_t>(st.N) * st.N) {}
  void dx(const std::vector<double>& u, int axis, std::vector<double>& out) const {
    d1(u, axis, N, h, order, out);
  }
};

}  // namespace

CovectorField grad(const TorusGridState& s, const ScalarField& u) {
  CovectorField out(s.shape());
  std::vector<double> t;
  for (int axis = 0; axis < 2; ++axis) {
    d1(u.data, axis, s.N, s.h(), s.stencil_order, t);
    std::copy(t.begin(), t.end(), out.comp(axis));
  }
  return out;
}

SymTensorField hessian(const TorusGridState& s, const ScalarField& u) {
  SymTensorField out(s.shape());
  const auto& G = s.geom;
  std::vector<double> du[2], dd[3];
  d1(u.data, 0, s.N, s.h(), s.stencil_order, du[0]);
  d1(u.data, 1, s.N, s.h(), s.stencil_order, du[1]);
  d2(u.data, 0, s.N, s.h(), s.stencil_order, dd[0]);
  d11(u.data, s.N, s.h(), s.stencil_order, dd[1]);
  d2(u.data, 1, s.N, s.h(), s.stencil_order, dd[2]);
  const std::size_t n = u.data.size();
  for (int sidx = 0; sidx < 3; ++sidx) {
    double* o = out.comp(sidx);
    for (std::size_t p = 0; p < n; ++p) {
      double corr = 0;
      for (int m = 0; m < 2; ++m) corr += G.gamma[m][sidx][p] * du[m][p];
      o[p] = dd[sidx][p] - corr;
    }
  }
  return out;
}

Tensor3Field cov_deriv(const TorusGridState& s, const SymTensorField& W) {
  Tensor3Field out(s.shape());
  const auto& G = s.geom;
  const std::size_t n = static_cast<std::size_t>(s.N) * s.N;
  std::vector<double> dW[2][3];
  for (int sidx = 0; sidx < 3; ++sidx)
    for (int k = 0; k < 2; ++k)
      d1(std::vector<double>(W.comp(sidx), W.comp(sidx) + n), k, s.N, s.h(),
         s.stencil_order, dW[k][sidx]);
  for (int k = 0; k < 2; ++k)
    for (int i = 0; i < 2; ++i)
      for (int j = i; j < 2; ++j) {
        double* o = out.comp(k * 3 + sym_index(i, j));
        for (std::size_t p = 0; p < n; ++p) {
          double acc = dW[k][sym_index(i, j)][p];
          for (int m = 0; m < 2; ++m)
            acc -= G.gamma[m][sym_index(k, i)][p] * wfull(W, m, j, p) +
                   G.gamma[m][sym_index(k, j)][p] * wfull(W, i, m, p);
          o[p] = acc;
        }
      }
  return out;
}

CovectorField div_f(const TorusGridState& s, const SymTensorField& W, const ScalarField* f) {
  Tensor3Field T = cov_deriv(s, W);
  const auto& G = s.geom;
  const std::size_t n = static_cast<std::size_t>(s.N) * s.N;
  CovectorField out(s.shape());
  std::vector<double> df[2];
  if (f) {
    d1(f->data, 0, s.N, s.h(), s.stencil_order, df[0]);
    d1(f->data, 1, s.N, s.h(), s.stencil_order, df[1]);
  }
  for (int j = 0; j < 2; ++j) {
    double* o = out.comp(j);
    for (std::size_t p = 0; p < n; ++p) {
      const double ginv[2][2] = {{G.inv11[p], G.inv12[p]}, {G.inv12[p], G.inv22[p]}};
      double acc = 0;
      for (int a = 0; a < 2; ++a)
        for (int i = 0; i < 2; ++i)
          acc += ginv[a][i] * T.at(a * 3 + sym_index(i, j), p);
      if (f) {
        for (int i = 0; i < 2; ++i)
          for (int a = 0; a < 2; ++a)
            acc -= ginv[i][a] * wfull(W, a, j, p) * df[i][p];
      }
      o[p] = acc;
    }
  }
  return out;
}

SymTensorField div_star(const TorusGridState& s, const CovectorField& X) {
  const auto& G = s.geom;
  const std::size_t n = static_cast<std::size_t>(s.N) * s.N;
  std::vector<double> dX[2][2];  // [k][i] = d_k X_i
  for (int i = 0; i < 2; ++i) {
    std::vector<double> xi(X.comp(i), X.comp(i) + n);
    d1(xi, 0, s.N, s.h(), s.stencil_order, dX[0][i]);
    d1(xi, 1, s.N, s.h(), s.stencil_order, dX[1][i]);
  }
  SymTensorField out(s.shape());
  for (int i = 0; i < 2; ++i)
    for (int j = i; j < 2; ++j) {
      double* o = out.comp(sym_index(i, j));
      for (std::size_t p = 0; p < n; ++p) {
        double nij = dX[i][j][p];
        double nji = dX[j][i][p];
        for (int m = 0; m < 2; ++m) {
          nij -= G.gamma[m][sym_index(i, j)][p] * X.at(m, p);
          nji -= G.gamma[m][sym_index(j, i)][p] * X.at(m, p);
        }
        o[p] = -0.5 * (nij + nji);
      }
    }
  return out;
}

ScalarField laplacian_f(const TorusGridState& s, const ScalarField& u, const ScalarField* f) {
  const auto& G = s.geom;
  const std::size_t n = u.data.size();
  std::vector<double> du[2], dd[3];
  d1(u.data, 0, s.N, s.h(), s.stencil_order, du[0]);
  d1(u.data, 1, s.N, s.h(), s.stencil_order, du[1]);
  d2(u.data, 0, s.N, s.h(), s.stencil_order, dd[0]);
  d11(u.data, s.N, s.h(), s.stencil_order, dd[1]);
  d2(u.data, 1, s.N, s.h(), s.stencil_order, dd[2]);
  std::vector<double> df[2];
  if (f) {
    d1(f->data, 0, s.N, s.h(), s.stencil_order, df[0]);
    d1(f->data, 1, s.N, s.h(), s.stencil_order, df[1]);
  }
  ScalarField out(s.shape());
  for (std::size_t p = 0; p < n; ++p) {
    const double ginv[2][2] = {{G.inv11[p], G.inv12[p]}, {G.inv12[p], G.inv22[p]}};
    double acc = 0;
    for (int k = 0; k < 2; ++k)
      for (int l = 0; l < 2; ++l) {
        double hkl = dd[k + l][p];
        for (int m = 0; m < 2; ++m) hkl -= G.gamma[m][sym_index(k, l)][p] * du[m][p];
        acc += ginv[k][l] * hkl;
        if (f) acc -= ginv[k][l] * df[k][p] * du[l][p];
      }
    out.data[p] = acc;
  }
  return out;
}

CovectorField laplacian_f(const TorusGridState& s, const CovectorField& X, const ScalarField* f) {
  const auto& G = s.geom;
  const std::size_t n = static_cast<std::size_t>(s.N) * s.N;
  std::vector<double> dX[2][2], ddX[3][2];
  for (int i = 0; i < 2; ++i) {
    std::vector<double> xi(X.comp(i), X.comp(i) + n);
    d1(xi, 0, s.N, s.h(), s.stencil_order, dX[0][i]);
    d1(xi, 1, s.N, s.h(), s.stencil_order, dX[1][i]);
    d2(xi, 0, s.N, s.h(), s.stencil_order, ddX[0][i]);
    d11(xi, s.N, s.h(), s.stencil_order, ddX[1][i]);
    d2(xi, 1, s.N, s.h(), s.stencil_order, ddX[2][i]);
  }
  std::vector<double> df[2];
  if (f) {
    d1(f->data, 0, s.N, s.h(), s.stencil_order, df[0]);
    d1(f->data, 1, s.N, s.h(), s.stencil_order, df[1]);
  }
  CovectorField out(s.shape());
  for (std::size_t p = 0; p < n; ++p) {
    const double ginv[2][2] = {{G.inv11[p], G.inv12[p]}, {G.inv12[p], G.inv22[p]}};
    double grad1[2][2];  // (grad X)_{l i}
    for (int l = 0; l < 2; ++l)
      for (int i = 0; i < 2; ++i) {
        double acc = dX[l][i][p];
        for (int m = 0; m < 2; ++m) acc -= G.gamma[m][sym_index(l, i)][p] * X.at(m, p);
        grad1[l][i] = acc;
      }
    for (int i = 0; i < 2; ++i) {
      double acc = 0;
      for (int k = 0; k < 2; ++k)
        for (int l = 0; l < 2; ++l) {
          double v = ddX[k + l][i][p];
          for (int m = 0; m < 2; ++m)
            v -= G.dgamma[k][m][sym_index(l, i)][p] * X.at(m, p) +
                 G.gamma[m][sym_index(l, i)][p] * dX[k][m][p];
          for (int q = 0; q < 2; ++q)
            v -= G.gamma[q][sym_index(k, l)][p] * grad1[q][i] +
                 G.gamma[q][sym_index(k, i)][p] * grad1[l][q];
          acc += ginv[k][l] * v;
          if (f) acc -= ginv[k][l] * df[k][p] * grad1[l][i];
        }
      out.at(i, p) = acc;
    }
  }
  return out;
}

namespace {

// Second covariant derivative of a symmetric 2-tensor, all coordinate
// components (grad_k grad_l W)_{ij}, evaluated per node into caller storage.
struct SecondDeriv {
  std::vector<double> v[2][2][3];
};

SecondDeriv second_deriv_sym(const TorusGridState& s, const SymTensorField& W) {
  const auto& G = s.geom;
  const std::size_t n = static_cast<std::size_t>(s.N) * s.N;
  std::vector<double> dW[2][3], ddW[3][3];
  for (int sidx = 0; sidx < 3; ++sidx) {
    std::vector<double> w(W.comp(sidx), W.comp(sidx) + n);
    d1(w, 0, s.N, s.h(), s.stencil_order, dW[0][sidx]);
    d1(w, 1, s.N, s.h(), s.stencil_order, dW[1][sidx]);
    d2(w, 0, s.N, s.h(), s.stencil_order, ddW[0][sidx]);
    d11(w, s.N, s.h(), s.stencil_order, ddW[1][sidx]);
    d2(w, 1, s.N, s.h(), s.stencil_order, ddW[2][sidx]);
  }
  SecondDeriv out;
  for (int k = 0; k < 2; ++k)
    for (int l = 0; l < 2; ++l)
      for (int sidx = 0; sidx < 3; ++sidx) out.v[k][l][sidx].resize(n);
  for (std::size_t p = 0; p < n; ++p) {
    double nabla1[2][2][2];  // (grad W)_{l, i j}
    for (int l = 0; l < 2; ++l)
      for (int i = 0; i < 2; ++i)
        for (int j = 0; j < 2; ++j) {
          double acc = dW[l][sym_index(i, j)][p];
          for (int m = 0; m < 2; ++m)
            acc -= G.gamma[m][sym_index(l, i)][p] * wfull(W, m, j, p) +
                   G.gamma[m][sym_index(l, j)][p] * wfull(W, i, m, p);
          nabla1[l][i][j] = acc;
        }
    for (int k = 0; k < 2; ++k)
      for (int l = 0; l < 2; ++l)
        for (int i = 0; i < 2; ++i)
          for (int j = i; j < 2; ++j) {
            double v = ddW[k + l][sym_index(i, j)][p];
            for (int m = 0; m < 2; ++m) {
              v -= G.dgamma[k][m][sym_index(l, i)][p] * wfull(W, m, j, p) +
                   G.gamma[m][sym_index(l, i)][p] * dW[k][sym_index(m, j)][p];
              v -= G.dgamma[k][m][sym_index(l, j)][p] * wfull(W, i, m, p) +
                   G.gamma[m][sym_index(l, j)][p] * dW[k][sym_index(i, m)][p];
            }
            for (int q = 0; q < 2; ++q) {
              v -= G.gamma[q][sym_index(k, l)][p] * nabla1[q][i][j];
              v -= G.gamma[q][sym_index(k, i)][p] * nabla1[l][q][j];
              v -= G.gamma[q][sym_index(k, j)][p] * nabla1[l][i][q];
            }
            out.v[k][l][sym_index(i, j)][p] = v;
          }
  }
  return out;
}

}  // namespace

SymTensorField laplacian_f(const TorusGridState& s, const SymTensorField& W, const ScalarField* f) {
  const auto& G = s.geom;
  const std::size_t n = static_cast<std::size_t>(s.N) * s.N;
  SecondDeriv sd = second_deriv_sym(s, W);
  Tensor3Field T = cov_deriv(s, W);
  std::vector<double> df[2];
  if (f) {
    d1(f->data, 0, s.N, s.h(), s.stencil_order, df[0]);
    d1(f->data, 1, s.N, s.h(), s.stencil_order, df[1]);
  }
  SymTensorField out(s.shape());
  for (int sidx = 0; sidx < 3; ++sidx) {
    double* o = out.comp(sidx);
    for (std::size_t p = 0; p < n; ++p) {
      const double ginv[2][2] = {{G.inv11[p], G.inv12[p]}, {G.inv12[p], G.inv22[p]}};
      double acc = 0;
      for (int k = 0; k < 2; ++k)
        for (int l = 0; l < 2; ++l) {
          acc += ginv[k][l] * sd.v[k][l][sidx][p];
          if (f) acc -= ginv[k][l] * df[k][p] * T.at(l * 3 + sidx, p);
        }
      o[p] = acc;
    }
  }
  return out;
}

SymTensorField rm_action(const TorusGridState& s, const SymTensorField& W) {
  const auto& G = s.geom;
  const std::size_t n = static_cast<std::size_t>(s.N) * s.N;
  SymTensorField out(s.shape());
  const double* g[3] = {s.g11.data(), s.g12.data(), s.g22.data()};
  for (std::size_t p = 0; p < n; ++p) {
    const double ginv[2][2] = {{G.inv11[p], G.inv12[p]}, {G.inv12[p], G.inv22[p]}};
    double tr = 0;
    for (int i = 0; i < 2; ++i)
      for (int j = 0; j < 2; ++j) tr += ginv[i][j] * wfull(W, i, j, p);
    const double K = G.gauss[p];
    for (int sidx = 0; sidx < 3; ++sidx)
      out.at(sidx, p) = K * (tr * g[sidx][p] - W.at(sidx, p));
  }
  return out;
}

WeightedMeasure measure(const TorusGridState& s, const ScalarField* f) {
  WeightedMeasure m;
  m.shape = s.shape();
  const std::size_t n = static_cast<std::size_t>(s.N) * s.N;
  m.w.resize(n);
  const double cell = s.h() * s.h();
  double mass = 0;
  for (std::size_t p = 0; p < n; ++p) {
    double w = cell * s.geom.sqrtdet[p];
    if (f) w *= std::exp(-f->data[p]);
    m.w[p] = w;
    mass += w;
  }
  m.mass = mass;
  return m;
}

std::vector<Frame2> frame_sym(const TorusGridState& s, const SymTensorField& W) {
  const auto& G = s.geom;
  const std::size_t n = static_cast<std::size_t>(s.N) * s.N;
  std::vector<Frame2> out(n);
  for (std::size_t p = 0; p < n; ++p) {
    const double il[2][2] = {{G.il00[p], 0.0}, {G.il10[p], G.il11[p]}};
    for (int a = 0; a < 2; ++a)
      for (int b = 0; b < 2; ++b) {
        double acc = 0;
        for (int i = 0; i < 2; ++i)
          for (int j = 0; j < 2; ++j)
            acc += il[a][i] * il[b][j] * wfull(W, i, j, p);
        out[p].m[a][b] = acc;
      }
  }
  return out;
}

std::vector<double> frame_cov(const TorusGridState& s, const CovectorField& X) {
  // Returns 2 components per node, node-major pairs.
  const auto& G = s.geom;
  const std::size_t n = static_cast<std::size_t>(s.N) * s.N;
  std::vector<double> out(2 * n);
  for (std::size_t p = 0; p < n; ++p) {
    const double il[2][2] = {{G.il00[p], 0.0}, {G.il10[p], G.il11[p]}};
    for (int a = 0; a < 2; ++a)
      out[2 * p + a] = il[a][0] * X.at(0, p) + il[a][1] * X.at(1, p);
  }
  return out;
}

std::vector<Frame3> frame_grad_sym(const TorusGridState& s, const SymTensorField& W) {
  const auto& G = s.geom;
  Tensor3Field T = cov_deriv(s, W);
  const std::size_t n = static_cast<std::size_t>(s.N) * s.N;
  std::vector<Frame3> out(n);
  for (std::size_t p = 0; p < n; ++p) {
    const double il[2][2] = {{G.il00[p], 0.0}, {G.il10[p], G.il11[p]}};
    for (int a = 0; a < 2; ++a)
      for (int b = 0; b < 2; ++b)
        for (int c = 0; c < 2; ++c) {
          double acc = 0;
          for (int k = 0; k < 2; ++k)
            for (int i = 0; i < 2; ++i)
              for (int j = 0; j < 2; ++j)
                acc += il[a][k] * il[b][i] * il[c][j] * T.at(k * 3 + sym_index(i, j), p);
          out[p].m[a][b][c] = acc;
        }
  }
  return out;
}

std::vector<Frame4> frame_second_sym(const TorusGridState& s, const SymTensorField& W) {
  const auto& G = s.geom;
  SecondDeriv sd = second_deriv_sym(s, W);
  const std::size_t n = static_cast<std::size_t>(s.N) * s.N;
  std::vector<Frame4> out(n);
  for (std::size_t p = 0; p < n; ++p) {
    const double il[2][2] = {{G.il00[p], 0.0}, {G.il10[p], G.il11[p]}};
    for (int a = 0; a < 2; ++a)
      for (int b = 0; b < 2; ++b)
        for (int c = 0; c < 2; ++c)
          for (int d = 0; d < 2; ++d) {
            double acc = 0;
            for (int k = 0; k < 2; ++k)
              for (int l = 0; l < 2; ++l)
                for (int i = 0; i < 2; ++i)
                  for (int j = 0; j < 2; ++j)
                    acc += il[a][k] * il[b][l] * il[c][i] * il[d][j] *
                           sd.v[k][l][sym_index(i, j)][p];
            out[p].m[a][b][c][d] = acc;
          }
  }
  return out;
}

}  // namespace torus_ops
}  // namespace rflab
