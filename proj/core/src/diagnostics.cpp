#include "rflab/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "rflab/errors.hpp"
#include "rflab/fit.hpp"

namespace rflab {

namespace {

constexpr double kDecayTol = 1e-3;  // slack in the proof-level (log E)' bounds

double weighted_dot(const ScalarField& a, const ScalarField& b, const WeightedMeasure& m) {
  double acc = 0;
  for (std::size_t p = 0; p < a.data.size(); ++p) acc += a.data[p] * b.data[p] * m.w[p];
  return acc;
}

// Metric-velocity-style coordinate components of a symmetric tensor field,
// the representation in which centered time differences are taken.
std::vector<double> sym_coords(const MetricState& s, const SymTensorField& W) {
  if (auto* r = std::get_if<RoundFamilyState>(&s)) return {W.at(0, 0) * r->c};
  if (std::get_if<TorusGridState>(&s)) return W.data;
  const auto& a = std::get<AxisymSphereState>(s);
  std::vector<double> out(2 * a.M);
  for (int j = 0; j < a.M; ++j) {
    out[j] = a.a[j] * W.at(0, j);
    out[a.M + j] = a.beta[j] * W.at(1, j);
  }
  return out;
}

SymTensorField sym_from_coords(const MetricState& s, const std::vector<double>& c) {
  SymTensorField out(field_shape(s));
  if (auto* r = std::get_if<RoundFamilyState>(&s)) {
    out.at(0, 0) = c.at(0) / r->c;
    return out;
  }
  if (std::get_if<TorusGridState>(&s)) {
    out.data = c;
    return out;
  }
  const auto& a = std::get<AxisymSphereState>(s);
  for (int j = 0; j < a.M; ++j) {
    out.at(0, j) = c[j] / a.a[j];
    out.at(1, j) = c[a.M + j] / a.beta[j];
  }
  return out;
}

// D_t S at record k: centered difference of coordinate components plus the
// contraction correction 2 S.S (product-rule-compatible convention).
SymTensorField time_centered_DtS(const Trajectory& traj, int k) {
  const auto& r0 = traj.records[k - 1];
  const auto& r1 = traj.records[k];
  const auto& r2 = traj.records[k + 1];
  std::vector<double> c0 = sym_coords(r0.state, r0.entropy.S);
  std::vector<double> c1 = sym_coords(r1.state, r1.entropy.S);
  std::vector<double> c2 = sym_coords(r2.state, r2.entropy.S);
  std::vector<double> d(c1.size());
  for (std::size_t p = 0; p < d.size(); ++p)
    d[p] = centered_derivative(r0.t, r1.t, r2.t, c0[p], c1[p], c2[p]);
  SymTensorField out = sym_from_coords(r1.state, d);
  SymTensorField corr = tensor_square(r1.state, r1.entropy.S);
  axpy(2.0, corr, out);
  return out;
}

ScalarField time_centered_scalar(const Trajectory& traj, int k,
                                 const ScalarField& u0, const ScalarField& u1,
                                 const ScalarField& u2) {
  ScalarField out = zeros_like(u1);
  for (std::size_t p = 0; p < out.data.size(); ++p)
    out.data[p] = centered_derivative(traj.records[k - 1].t, traj.records[k].t,
                                      traj.records[k + 1].t, u0.data[p], u1.data[p],
                                      u2.data[p]);
  return out;
}

// --- J-term assembly ---------------------------------------------------------

struct JTerms {
  double comm = 0;   // ([D_t, grad_i] S, grad_i S)
  double dtrm = 0;   // (D_t Rm (S), S)
  double hterm = 0;  // int H ((sigma/2)|S|^2 + |grad S|^2 - 2 Rm(S,S)) dm
};

// Frame-component evaluation on the 2-D grid arenas.
JTerms j_terms_grid(const MetricState& s, const EntropySolution& es, const ScalarField& H,
                    const WeightedMeasure& m) {
  const int sig = sigma_of(s);
  const auto Sf = frame_components(s, es.S);
  const auto Tf = frame_cov_deriv(s, es.S);
  const auto Vf = frame_second_deriv(s, es.S);
  CurvatureBundle cb = curvature(s);
  JTerms out;
  const int n = field_shape(s).nodes();
  for (int p = 0; p < n; ++p) {
    const auto& S = Sf[p].m;
    const auto& T = Tf[p].m;
    const auto& V = Vf[p].m;
    const double K = cb.sectional.data[p];

    // ([D_t, grad] S, grad S) pointwise
    double comm = 0;
    for (int i = 0; i < 2; ++i)
      for (int j = 0; j < 2; ++j)
        for (int k = 0; k < 2; ++k) {
          double A = 0;
          for (int l = 0; l < 2; ++l)
            A += S[i][l] * T[l][j][k] + (T[j][i][l] - T[l][i][j]) * S[l][k] +
                 (T[k][i][l] - T[l][i][k]) * S[j][l];
          comm += A * T[i][j][k];
        }

    // (D_t Rm(S), S): second-derivative contractions plus curvature algebra
    double t1 = 0, t3 = 0;
    for (int a = 0; a < 2; ++a)
      for (int b = 0; b < 2; ++b)
        for (int c = 0; c < 2; ++c)
          for (int d = 0; d < 2; ++d) {
            t1 += V[a][b][c][d] * S[c][d] * S[a][b];
            t3 -= V[a][b][c][d] * S[c][b] * S[a][d];
          }
    auto R4 = [&](int a, int b, int c, int d) {
      return K * ((b == c ? 1.0 : 0.0) * (a == d ? 1.0 : 0.0) -
                  (a == c ? 1.0 : 0.0) * (b == d ? 1.0 : 0.0));
    };
    double alg = 0;
    for (int i = 0; i < 2; ++i)
      for (int k = 0; k < 2; ++k)
        for (int l = 0; l < 2; ++l)
          for (int j = 0; j < 2; ++j)
            for (int q = 0; q < 2; ++q)
              alg += (S[i][q] * R4(q, k, l, j) + S[k][q] * R4(i, q, l, j)) * S[k][l] * S[i][j];
    const double dtrm = 2.0 * (t1 + t3) + alg;

    // H-weighted integrand
    double s2 = 0, trS = 0, t2n = 0;
    for (int i = 0; i < 2; ++i) {
      trS += S[i][i];
      for (int j = 0; j < 2; ++j) {
        s2 += S[i][j] * S[i][j];
        for (int k = 0; k < 2; ++k) t2n += T[i][j][k] * T[i][j][k];
      }
    }
    const double rmss = K * (trS * trS - s2);
    const double hint = H.data[p] * (0.5 * sig * s2 + t2n - 2.0 * rmss);

    out.comm += comm * m.w[p];
    out.dtrm += dtrm * m.w[p];
    out.hterm += hint * m.w[p];
  }
  return out;
}

// Closed-form single-point evaluation on the round family (any n); the
// gradient terms vanish on homogeneous data.
JTerms j_terms_round(const RoundFamilyState& r, const EntropySolution& es,
                     const WeightedMeasure& m) {
  JTerms out;
  const int n = r.n;
  const double K = r.sectional();
  const double lam = es.S.at(0, 0);
  // (D_t Rm(S), S) algebra with S = lam * delta in frame components:
  // sum over (S_{ip}R_{pklj} + S_{kp}R_{iplj}) S_{kl} S_{ij} = 2 lam^3 K n(n-1)
  const double dtrm_pt = 2.0 * lam * lam * lam * K * n * (n - 1.0);
  out.dtrm = dtrm_pt * m.mass;
  return out;
}

JTerms j_terms(const MetricState& s, const EntropySolution& es, const ScalarField& H,
               const WeightedMeasure& m) {
  if (auto* r = std::get_if<RoundFamilyState>(&s)) return j_terms_round(*r, es, m);
  return j_terms_grid(s, es, H, m);
}

// Static identity residuals shared by diagnose and check_identities.
void static_residuals(const MetricState& s, const ScalarField& f,
                      std::map<std::string, double>& out, bool weighted_l2_norm) {
  const int sig = sigma_of(s);
  SymTensorField S = s_sigma(s, f);
  ScalarField M = m_sigma(s, f);
  WeightedMeasure m = weighted_measure(s, f);

  auto resid_norm = [&](const CovectorField& X) {
    if (!weighted_l2_norm) return sup_norm(s, X);
    return std::sqrt(std::max(inner(s, X, X, m), 0.0) / m.mass);
  };

  // div_f S - grad M / 2
  CovectorField r1 = div_f(s, S, f);
  CovectorField gm = grad(s, M);
  axpy(-0.5, gm, r1);
  out["divfv"] = resid_norm(r1);

  // div_f Box_f S - Delta_f div_f S + (sigma/2) div_f S - grad|S|^2/2 - S(grad M,.)/2
  SymTensorField boxS = box_f(s, S, f);
  CovectorField r2 = div_f(s, boxS, f);
  CovectorField dfs = div_f(s, S, f);
  CovectorField ldfs = laplacian_f(s, dfs, f);
  axpy(-1.0, ldfs, r2);
  axpy(0.5 * sig, dfs, r2);
  ScalarField s2 = pointwise_norm2(s, S);
  CovectorField gs2 = grad(s, s2);
  axpy(-0.5, gs2, r2);
  CovectorField sgm = contract_vector(s, S, gm);
  axpy(-0.5, sgm, r2);
  out["comm"] = resid_norm(r2);
}

double bochner_residual(const MetricState& s, const ScalarField& f, const ScalarField& u) {
  const int sig = sigma_of(s);
  SymTensorField S = s_sigma(s, f);
  CovectorField gu = grad(s, u);
  ScalarField gu2 = pointwise_norm2(s, gu);
  ScalarField lhs = laplacian_f(s, gu2, f);
  ScalarField hu2 = pointwise_norm2(s, hessian(s, u));
  ScalarField sterm = apply_bilinear(s, S, gu);
  ScalarField lfu = laplacian_f(s, u, f);
  ScalarField cross = pointwise_inner(s, grad(s, lfu), gu);
  double mx = 0;
  for (std::size_t p = 0; p < lhs.data.size(); ++p) {
    const double r = lhs.data[p] - 2.0 * hu2.data[p] - 2.0 * sterm.data[p] +
                     sig * gu2.data[p] - 2.0 * cross.data[p];
    mx = std::max(mx, std::abs(r));
  }
  return mx;
}

// Directional-derivative check of the S linearization along deterministic
// directions (h, k), via symmetric finite differences in epsilon.
double slin_residual(const MetricState& s, const ScalarField& f) {
  const FieldShape sh = field_shape(s);
  const double eps = 1e-4;
  // deterministic smooth direction fields
  SymTensorField h(sh);
  ScalarField k(sh);
  if (auto* r = std::get_if<RoundFamilyState>(&s)) {
    h.at(0, 0) = 0.7;
    k.at(0, 0) = 0.3;
  } else if (auto* t = std::get_if<TorusGridState>(&s)) {
    const int N = t->N;
    for (int i = 0; i < N; ++i)
      for (int j = 0; j < N; ++j) {
        const double x = 2 * 3.14159265358979323846 * i / N;
        const double y = 2 * 3.14159265358979323846 * j / N;
        const int p = i * N + j;
        h.at(0, p) = 0.6 * std::sin(x) + 0.2 * std::cos(y);
        h.at(1, p) = 0.25 * std::cos(x + y);
        h.at(2, p) = 0.5 * std::cos(y) - 0.2 * std::sin(x);
        k.data[p] = 0.4 * std::sin(x + y);
      }
  } else {
    const auto& a = std::get<AxisymSphereState>(s);
    for (int j = 0; j < a.M; ++j) {
      const double th = a.geom.theta[j];
      const double s2t = std::sin(th) * std::sin(th);
      const double common = 0.3 * std::cos(th);
      h.at(0, j) = common + 0.5 * s2t;
      h.at(1, j) = common + 0.2 * s2t * std::cos(th);
      k.data[j] = 0.4 * std::cos(th);
    }
  }

  auto s_at = [&](double t_eps) {
    // metric components move along the coordinate representation of h
    std::vector<double> comps = metric_components(s);
    std::vector<double> hv = sym_coords(s, h);
    for (std::size_t p = 0; p < comps.size(); ++p) comps[p] += t_eps * hv[p];
    MetricState st = with_metric_components(s, comps);
    ScalarField ft = f;
    axpy(t_eps, k, ft);
    return s_sigma(st, ft);
  };
  SymTensorField sp = s_at(eps);
  SymTensorField sm = s_at(-eps);
  // FD in the same coordinate representation
  std::vector<double> cp = sym_coords(with_metric_components(s, [&] {
                                        std::vector<double> c = metric_components(s);
                                        std::vector<double> hv = sym_coords(s, h);
                                        for (std::size_t p = 0; p < c.size(); ++p)
                                          c[p] += eps * hv[p];
                                        return c;
                                      }()),
                                      sp);
  std::vector<double> cm = sym_coords(with_metric_components(s, [&] {
                                        std::vector<double> c = metric_components(s);
                                        std::vector<double> hv = sym_coords(s, h);
                                        for (std::size_t p = 0; p < c.size(); ++p)
                                          c[p] -= eps * hv[p];
                                        return c;
                                      }()),
                                      sm);
  std::vector<double> fd(cp.size());
  for (std::size_t p = 0; p < fd.size(); ++p) fd[p] = (cp[p] - cm[p]) / (2.0 * eps);
  SymTensorField dS = sym_from_coords(s, fd);

  // rhs of the linearization
  SymTensorField S = s_sigma(s, f);
  SymTensorField rhs = laplacian_f(s, h, f);
  scale(-0.5, rhs);
  SymTensorField rm = rm_action(s, h);
  axpy(-1.0, rm, rhs);
  CovectorField dfh = div_f(s, h, f);
  SymTensorField dsd = div_star(s, dfh);
  axpy(-1.0, dsd, rhs);
  SymTensorField sh_prod = sym_anticommutator(s, S, h);
  axpy(1.0, sh_prod, rhs);
  ScalarField trh = trace(s, h);
  ScalarField pot = k;
  axpy(-0.5, trh, pot);
  SymTensorField hess_pot = hessian(s, pot);
  axpy(1.0, hess_pot, rhs);

  axpy(-1.0, rhs, dS);
  return sup_norm(s, dS);
}

double log_floor(double v) { return std::log(std::max(v, 1e-300)); }

}  // namespace

const char* verdict_name(Verdict v) {
  switch (v) {
    case Verdict::holds: return "holds";
    case Verdict::violated: return "violated";
    case Verdict::inconclusive: return "inconclusive";
  }
  return "?";
}

double energy_E(const MetricState& s, const EntropySolution& es) {
  WeightedMeasure m = weighted_measure(s, es.f);
  return inner(s, es.S, es.S, m);
}

double dirichlet_F(const MetricState& s, const EntropySolution& es) {
  WeightedMeasure m = weighted_measure(s, es.f);
  Tensor3Field T = cov_deriv(s, es.S);
  const double grad2 = inner(s, T, T, m);
  SymTensorField rmS = rm_action(s, es.S);
  return grad2 - 2.0 * inner(s, rmS, es.S, m);
}

std::optional<double> quotient_N(double E, double F) {
  if (E < kEnergyFloor) return std::nullopt;
  return F / E;
}

LOperatorFields l_fields(const Trajectory& traj, int k, const ScalarField& H) {
  if (k < 1 || k > traj.size() - 2)
    throw error("l_fields: index must be interior (1 <= k <= size-2)");
  const auto& rec = traj.records[k];
  LOperatorFields out;
  out.DtS = time_centered_DtS(traj, k);
  out.hessH = hessian(rec.state, H);
  SymTensorField box = box_f(rec.state, rec.entropy.S, rec.entropy.f);
  out.L0S = out.DtS;
  axpy(-1.0, box, out.L0S);
  axpy(-1.0, out.hessH, out.L0S);
  out.L1S = out.DtS;
  axpy(1.0, box, out.L1S);
  axpy(-1.0, out.hessH, out.L1S);
  return out;
}

LOperatorFields l_fields(const Trajectory& traj, int k) {
  if (k < 1 || k > traj.size() - 2)
    throw error("l_fields: index must be interior (1 <= k <= size-2)");
  const auto& rec = traj.records[k];
  ScalarField H = std::holds_alternative<RoundFamilyState>(rec.state)
                      ? ScalarField(field_shape(rec.state))
                      : h_field(rec.state, rec.entropy, 1e-10);
  return l_fields(traj, k, H);
}

std::vector<double> record_times(const Trajectory& traj) {
  std::vector<double> t;
  t.reserve(traj.records.size());
  for (const auto& r : traj.records) t.push_back(r.t);
  return t;
}

FlowAnalysis analyze(const Trajectory& traj) {
  if (traj.records.empty()) throw error("diagnose: empty trajectory");
  const int n = traj.size();
  std::vector<DiagnosticsRecord> out(n);
  std::vector<ScalarField> Hs(n);

  ScalarField gap_warm;
  bool have_gap_warm = false;
  for (int k = 0; k < n; ++k) {
    const auto& rec = traj.records[k];
    DiagnosticsRecord& d = out[k];
    d.t = rec.t;
    d.mu = rec.entropy.mu;
    d.E = energy_E(rec.state, rec.entropy);
    d.F = dirichlet_F(rec.state, rec.entropy);
    d.N = quotient_N(d.E, d.F);
    d.sup_S = sup_norm(rec.state, rec.entropy.S);
    d.sup_Rm = sup_rm(rec.state);
    SpectralGapReport gap = spectral_gap(rec.state, rec.entropy.f, 1e-8,
                                         have_gap_warm ? &gap_warm : nullptr);
    d.gap = gap.gap;
    if (!std::holds_alternative<RoundFamilyState>(rec.state)) {
      gap_warm = gap.eigenfield;
      have_gap_warm = true;
    }
    if (std::holds_alternative<RoundFamilyState>(rec.state)) {
      // |S|^2 is homogeneous, so the H equation has zero right side.
      Hs[k] = ScalarField(field_shape(rec.state));
    } else {
      Hs[k] = h_field(rec.state, rec.entropy, 1e-10, &gap,
                      k > 0 ? &Hs[k - 1] : nullptr);
    }
    d.sup_H = sup_norm(rec.state, Hs[k]);
    static_residuals(rec.state, rec.entropy.f, d.residuals, false);
  }

  // interior time-difference residuals
  for (int k = 1; k + 1 < n; ++k) {
    const auto& rec = traj.records[k];
    WeightedMeasure m = weighted_measure(rec.state, rec.entropy.f);
    LOperatorFields lf = l_fields(traj, k, Hs[k]);
    const double s_norm = std::sqrt(std::max(inner(rec.state, rec.entropy.S, rec.entropy.S, m), 1e-300));
    out[k].residuals["sev"] =
        std::sqrt(std::max(inner(rec.state, lf.L0S, lf.L0S, m), 0.0)) / s_norm;

    // eq:hdef time-differencing consistency: residual of the H equation at
    // H_time = df/dt + tr S
    ScalarField dfdt = time_centered_scalar(traj, k, traj.records[k - 1].entropy.f,
                                            rec.entropy.f, traj.records[k + 1].entropy.f);
    ScalarField h_time = trace(rec.state, rec.entropy.S);
    axpy(1.0, dfdt, h_time);
    ScalarField s2 = pointwise_norm2(rec.state, rec.entropy.S);
    const double E = out[k].E;
    ScalarField resid = laplacian_f(rec.state, h_time, rec.entropy.f);
    const int sig = sigma_of(rec.state);
    for (std::size_t p = 0; p < resid.data.size(); ++p)
      resid.data[p] += -0.5 * sig * h_time.data[p] + s2.data[p] - E;
    out[k].residuals["heq"] =
        std::sqrt(std::max(weighted_dot(resid, resid, m), 0.0)) / std::max(E, kEnergyFloor);
  }
  return {std::move(out), std::move(Hs)};
}

std::vector<DiagnosticsRecord> diagnose(const Trajectory& traj) {
  return analyze(traj).records;
}

std::map<std::string, double> check_identities(const MetricState& s, const ScalarField& f,
                                               const ScalarField& u) {
  std::map<std::string, double> out;
  const bool axisym = std::holds_alternative<AxisymSphereState>(s);
  static_residuals(s, f, out, axisym);
  out["fbochner"] = bochner_residual(s, f, u);
  out["slin"] = slin_residual(s, f);
  return out;
}

std::map<std::string, double> check_identities(const MetricState& s, const ScalarField& f) {
  // deterministic low-mode auxiliary scalar
  const FieldShape sh = field_shape(s);
  ScalarField u(sh);
  if (std::get_if<RoundFamilyState>(&s)) {
    // only constants exist; the Bochner check degenerates to 0 = 0
  } else if (auto* t = std::get_if<TorusGridState>(&s)) {
    for (int i = 0; i < t->N; ++i)
      for (int j = 0; j < t->N; ++j) {
        const double x = 2 * 3.14159265358979323846 * i / t->N;
        const double y = 2 * 3.14159265358979323846 * j / t->N;
        u.data[i * t->N + j] = std::cos(x + 2 * y) + 0.5 * std::sin(y);
      }
  } else {
    const auto& a = std::get<AxisymSphereState>(s);
    for (int j = 0; j < a.M; ++j) {
      const double th = a.geom.theta[j];
      u.data[j] = std::cos(th) + 0.3 * std::sin(th) * std::sin(th);
    }
  }
  return check_identities(s, f, u);
}

BoundCheckReport check_eev(const Trajectory& traj, const FlowAnalysis& an) {
  BoundCheckReport rep;
  rep.id = "eev";
  rep.anchor = "eq:eev1";
  if (traj.size() < 3) throw error("check_eev: too few records");
  const std::vector<DiagnosticsRecord>& d = an.records;
  const int n = traj.size();
  double worst = 0;
  int used = 0;
  for (int k = 1; k + 1 < n; ++k) {
    const auto& rec = traj.records[k];
    const double Edot = centered_derivative(d[k - 1].t, d[k].t, d[k + 1].t, d[k - 1].E,
                                            d[k].E, d[k + 1].E);
    WeightedMeasure m = weighted_measure(rec.state, rec.entropy.f);
    const ScalarField& H = an.H[k];
    ScalarField s2 = pointwise_norm2(rec.state, rec.entropy.S);
    const double hss = weighted_dot(H, s2, m);
    const double rhs = -2.0 * d[k].F - hss;
    const double scale = std::max({std::abs(Edot), std::abs(rhs), 1e-300});
    const double rel = std::abs(Edot - rhs) / scale;
    if (std::abs(Edot) > 1e-12) {
      rep.margins.push_back({d[k].t, rel});
      worst = std::max(worst, rel);
      ++used;
    }
  }
  rep.fitted["max_rel_error"] = worst;
  rep.fitted["samples"] = used;
  if (used == 0) {
    rep.verdict = Verdict::inconclusive;
    rep.notes = "dE/dt below noise floor everywhere (static trajectory)";
  } else {
    rep.verdict = worst <= 0.05 ? Verdict::holds : Verdict::violated;
  }
  return rep;
}

BoundCheckReport check_fdot(const Trajectory& traj, const FlowAnalysis& an) {
  BoundCheckReport rep;
  rep.id = "fdot";
  rep.anchor = "eq:fid";
  if (traj.size() < 3) throw error("check_fdot: too few records");
  const std::vector<DiagnosticsRecord>& d = an.records;
  const int n = traj.size();
  double worst = 0;
  int used = 0;
  for (int k = 1; k + 1 < n; ++k) {
    const auto& rec = traj.records[k];
    const double Fdot = centered_derivative(d[k - 1].t, d[k].t, d[k + 1].t, d[k - 1].F,
                                            d[k].F, d[k + 1].F);
    WeightedMeasure m = weighted_measure(rec.state, rec.entropy.f);
    const ScalarField& H = an.H[k];
    LOperatorFields lf = l_fields(traj, k, H);
    const double l1n2 = inner(rec.state, lf.L1S, lf.L1S, m);
    ScalarField s2 = pointwise_norm2(rec.state, rec.entropy.S);
    ScalarField s4(s2.shape);
    for (std::size_t p = 0; p < s4.data.size(); ++p) s4.data[p] = s2.data[p] * s2.data[p];
    const double s2ss = integrate(s4, m);
    JTerms jt = j_terms(rec.state, rec.entropy, H, m);
    const double J = 2.0 * (jt.comm - jt.dtrm) - jt.hterm;
    const double rhs = -0.5 * l1n2 - d[k].E * d[k].E + s2ss + J;
    const double scale = std::max({std::abs(Fdot), std::abs(rhs), 1e-300});
    const double rel = std::abs(Fdot - rhs) / scale;
    if (std::abs(Fdot) > 1e-12) {
      rep.margins.push_back({d[k].t, rel});
      worst = std::max(worst, rel);
      ++used;
    }
  }
  rep.fitted["max_rel_error"] = worst;
  rep.fitted["samples"] = used;
  if (used == 0) {
    rep.verdict = Verdict::inconclusive;
    rep.notes = "dF/dt below noise floor everywhere (static trajectory)";
  } else {
    rep.verdict = worst <= 0.05 ? Verdict::holds : Verdict::violated;
  }
  return rep;
}

namespace {

BoundCheckReport nest_from_records(const std::vector<DiagnosticsRecord>& d) {
  BoundCheckReport rep;
  rep.id = "nest";
  rep.anchor = "eq:nest";
  const int n = static_cast<int>(d.size());
  std::vector<double> c1_grid = {0.1, 1.0, 10.0};
  double best_c0 = std::numeric_limits<double>::infinity();
  double best_c1 = c1_grid[0];
  int usable = 0;
  for (double c1 : c1_grid) {
    double c0 = 0;
    int used = 0;
    for (int k = 1; k + 1 < n; ++k) {
      if (!d[k - 1].N || !d[k].N || !d[k + 1].N) continue;
      const double ndot = centered_derivative(d[k - 1].t, d[k].t, d[k + 1].t, *d[k - 1].N,
                                              *d[k].N, *d[k + 1].N);
      if (ndot <= 0) {
        ++used;
        continue;  // inequality trivially satisfied here
      }
      const double denom = (d[k].sup_H + d[k].sup_S) * (*d[k].N + c1);
      if (denom <= 0) continue;
      c0 = std::max(c0, ndot / denom);
      ++used;
    }
    usable = std::max(usable, used);
    if (used > 0 && c0 < best_c0) {
      best_c0 = c0;
      best_c1 = c1;
    }
  }
  if (usable < 1) {
    rep.verdict = Verdict::inconclusive;
    rep.notes = "N undefined or no interior samples (static trajectory)";
    return rep;
  }
  if (!std::isfinite(best_c0)) {
    rep.verdict = Verdict::inconclusive;
    rep.notes = "no positive denominator samples";
    return rep;
  }
  rep.fitted["C0"] = best_c0;
  rep.fitted["C1"] = best_c1;
  // integrated smallness ingredient: Lambda-hat over the window
  std::vector<double> t, sh;
  for (const auto& r : d) {
    t.push_back(r.t);
    sh.push_back(r.sup_H + r.sup_S);
  }
  rep.fitted["Lambda_hat"] = trapezoid(t, sh);
  // margins: slack of the inequality with the fitted constants
  for (int k = 1; k + 1 < n; ++k) {
    if (!d[k - 1].N || !d[k].N || !d[k + 1].N) continue;
    const double ndot = centered_derivative(d[k - 1].t, d[k].t, d[k + 1].t, *d[k - 1].N,
                                            *d[k].N, *d[k + 1].N);
    const double rhs = best_c0 * (d[k].sup_H + d[k].sup_S) * (*d[k].N + best_c1);
    rep.margins.push_back({d[k].t, rhs - ndot});
  }
  rep.verdict = Verdict::holds;
  return rep;
}

BoundCheckReport decay_from_records(const std::vector<DiagnosticsRecord>& d) {
  BoundCheckReport rep;
  rep.id = "decay";
  rep.anchor = "eq:sdecay";
  const int n = static_cast<int>(d.size());
  if (n < 4) throw error("check_decay: too few records");

  // window: E above floor (truncate at first underflow)
  int last = 0;
  while (last < n && d[last].E > 1e-12) ++last;
  if (last < n) rep.notes = "window truncated at E underflow; ";
  const int w = last;
  if (w < 4) {
    rep.verdict = Verdict::inconclusive;
    rep.notes += "energy below floor almost everywhere";
    return rep;
  }

  double K0 = 0, supH_max = 0;
  for (int k = 0; k < w; ++k) {
    K0 = std::max(K0, d[k].sup_Rm);
    supH_max = std::max(supH_max, d[k].sup_H);
  }

  // pointwise proof-level inequalities on (log E)'
  bool lower_ok = true, upper_ok = true;
  for (int k = 1; k + 1 < w; ++k) {
    const double dlogE = centered_derivative(d[k - 1].t, d[k].t, d[k + 1].t,
                                             log_floor(d[k - 1].E), log_floor(d[k].E),
                                             log_floor(d[k + 1].E));
    if (!d[k].N) continue;
    const double lo = -2.0 * (*d[k].N) - d[k].sup_H - kDecayTol;
    const double hi = 4.0 * K0 + d[k].sup_H + kDecayTol;
    rep.margins.push_back({d[k].t, dlogE - lo});
    if (dlogE < lo) lower_ok = false;
    if (dlogE > hi) upper_ok = false;
  }

  // least-squares rate over the final half of the window
  std::vector<double> t_fit, y_fit;
  for (int k = w / 2; k < w; ++k) {
    t_fit.push_back(d[k].t);
    y_fit.push_back(log_floor(d[k].E));
  }
  LinearFit fit = least_squares_bootstrap(t_fit, y_fit, 20260810u);
  const double N0_fit = -fit.slope;
  rep.fitted["N0_fit"] = N0_fit;
  rep.fitted["N0_ci_lo"] = -fit.slope_ci_hi;
  rep.fitted["N0_ci_hi"] = -fit.slope_ci_lo;

  // two-sided sandwich. The lower rate combines the fitted tail rate with the
  // quotient bound 2 sup N + sup ||H||_inf, which the pointwise inequality
  // guarantees for multi-rate windows the tail fit underestimates.
  double N_max = 0, H_max = 0;
  for (int k = 0; k < w; ++k) {
    if (d[k].N) N_max = std::max(N_max, *d[k].N);
    H_max = std::max(H_max, d[k].sup_H);
  }
  const double N0_used = std::max(1.1 * std::max(N0_fit, 0.0) + kDecayTol,
                                  2.0 * N_max + H_max + kDecayTol);
  const double N1 = 4.0 * K0 + supH_max + kDecayTol;
  rep.fitted["N0_used"] = N0_used;
  rep.fitted["N1"] = N1;
  bool sandwich_ok = true;
  const double logE0 = log_floor(d[0].E);
  for (int k = 0; k < w; ++k) {
    const double lo = logE0 - N0_used * (d[k].t - d[0].t + 1.0);
    const double hi = logE0 + N1 * (d[k].t - d[0].t + 1.0);
    const double le = log_floor(d[k].E);
    if (le < lo - 1e-9 || le > hi + 1e-9) sandwich_ok = false;
  }

  // Lambda0 and the integrated entropy bound
  std::vector<double> tt, sh, ee;
  for (int k = 0; k < w; ++k) {
    tt.push_back(d[k].t);
    sh.push_back(d[k].sup_S + d[k].sup_H);
    ee.push_back(d[k].E);
  }
  rep.fitted["Lambda0"] = trapezoid(tt, sh);
  bool mu_ok = true;
  if (N0_used > 0) {
    const double s_end = d[w - 1].t;
    for (int k = 0; k + 1 < w; ++k) {
      const double lhs = d[w - 1].mu - d[k].mu;
      const double rhs = 2.0 / N0_used * d[0].E *
                         std::exp(-N0_used * (d[k].t - d[0].t + 1.0)) *
                         (1.0 - std::exp(-N0_used * (s_end - d[k].t)));
      if (lhs < rhs - kDecayTol * std::max(1.0, std::abs(lhs))) mu_ok = false;
    }
  }

  rep.fitted["lower_ok"] = lower_ok ? 1.0 : 0.0;
  rep.fitted["upper_ok"] = upper_ok ? 1.0 : 0.0;
  rep.fitted["sandwich_ok"] = sandwich_ok ? 1.0 : 0.0;
  rep.fitted["mu_integrated_ok"] = mu_ok ? 1.0 : 0.0;
  rep.verdict = (lower_ok && upper_ok && sandwich_ok && mu_ok) ? Verdict::holds
                                                               : Verdict::violated;
  return rep;
}

}  // namespace

BoundCheckReport check_eev(const Trajectory& traj) { return check_eev(traj, analyze(traj)); }

BoundCheckReport check_fdot(const Trajectory& traj) { return check_fdot(traj, analyze(traj)); }

BoundCheckReport check_nest(const Trajectory& traj) {
  if (traj.size() < 3) throw error("check_nest: degenerate window");
  return nest_from_records(diagnose(traj));
}

BoundCheckReport check_nest(const Trajectory& traj, const FlowAnalysis& an) {
  if (traj.size() < 3) throw error("check_nest: degenerate window");
  return nest_from_records(an.records);
}

BoundCheckReport check_decay(const Trajectory& traj) {
  return decay_from_records(diagnose(traj));
}

BoundCheckReport check_decay(const Trajectory& traj, const FlowAnalysis& an) {
  return decay_from_records(an.records);
}

BoundCheckReport check_error_estimates(const Trajectory& traj, const FlowAnalysis& an) {
  BoundCheckReport rep;
  rep.id = "error_estimates";
  rep.anchor = "eq:commest";
  if (traj.size() < 3) throw error("check_error_estimates: degenerate window");
  const int n = traj.size();
  double c_comm = 0, c_dtrm = 0;
  int used = 0;
  for (int k = 1; k + 1 < n; ++k) {
    const auto& rec = traj.records[k];
    WeightedMeasure m = weighted_measure(rec.state, rec.entropy.f);
    const ScalarField& H = an.H[k];
    JTerms jt = j_terms(rec.state, rec.entropy, H, m);
    const double supS = sup_norm(rec.state, rec.entropy.S);
    if (supS < 1e-14) continue;
    const double E = inner(rec.state, rec.entropy.S, rec.entropy.S, m);
    Tensor3Field T = cov_deriv(rec.state, rec.entropy.S);
    const double grad2 = inner(rec.state, T, T, m);
    const double bound = supS * (E + grad2);
    if (bound < 1e-300) continue;
    c_comm = std::max(c_comm, std::abs(jt.comm) / bound);
    c_dtrm = std::max(c_dtrm, std::abs(jt.dtrm) / bound);
    rep.margins.push_back({rec.t, std::max(std::abs(jt.comm), std::abs(jt.dtrm)) / bound});
    ++used;
  }
  if (used == 0) {
    rep.verdict = Verdict::inconclusive;
    rep.notes = "S below noise floor everywhere (static trajectory)";
    return rep;
  }
  rep.fitted["C_comm"] = c_comm;
  rep.fitted["C_dtrm"] = c_dtrm;
  rep.verdict = (std::isfinite(c_comm) && std::isfinite(c_dtrm)) ? Verdict::holds
                                                                 : Verdict::violated;
  return rep;
}

BoundCheckReport check_error_estimates(const Trajectory& traj) {
  BoundCheckReport rep;
  rep.id = "error_estimates";
  rep.anchor = "eq:commest";
  if (traj.size() < 3) throw error("check_error_estimates: degenerate window");
  const int n = traj.size();
  double c_comm = 0, c_dtrm = 0;
  int used = 0;
  for (int k = 1; k + 1 < n; ++k) {
    const auto& rec = traj.records[k];
    WeightedMeasure m = weighted_measure(rec.state, rec.entropy.f);
    ScalarField H = std::holds_alternative<RoundFamilyState>(rec.state)
                        ? ScalarField(field_shape(rec.state))
                        : h_field(rec.state, rec.entropy, 1e-10);
    JTerms jt = j_terms(rec.state, rec.entropy, H, m);
    const double supS = sup_norm(rec.state, rec.entropy.S);
    if (supS < 1e-14) continue;
    const double E = inner(rec.state, rec.entropy.S, rec.entropy.S, m);
    Tensor3Field T = cov_deriv(rec.state, rec.entropy.S);
    const double grad2 = inner(rec.state, T, T, m);
    const double bound = supS * (E + grad2);
    if (bound < 1e-300) continue;
    c_comm = std::max(c_comm, std::abs(jt.comm) / bound);
    c_dtrm = std::max(c_dtrm, std::abs(jt.dtrm) / bound);
    rep.margins.push_back({rec.t, std::max(std::abs(jt.comm), std::abs(jt.dtrm)) / bound});
    ++used;
  }
  if (used == 0) {
    rep.verdict = Verdict::inconclusive;
    rep.notes = "S below noise floor everywhere (static trajectory)";
    return rep;
  }
  rep.fitted["C_comm"] = c_comm;
  rep.fitted["C_dtrm"] = c_dtrm;
  rep.verdict = (std::isfinite(c_comm) && std::isfinite(c_dtrm)) ? Verdict::holds
                                                                 : Verdict::violated;
  return rep;
}

BoundCheckReport lojasiewicz_fit(const Trajectory& traj, double mu_limit) {
  BoundCheckReport rep;
  rep.id = "lojasiewicz";
  rep.anchor = "eq:lsineq1";
  std::vector<DiagnosticsRecord> d = diagnose(traj);
  std::vector<double> x, y;
  double prev_mu = -std::numeric_limits<double>::infinity();
  for (const auto& r : d) {
    if (r.mu < prev_mu - 1e-9)
      throw error("lojasiewicz_fit: mu is not monotone on the window");
    prev_mu = r.mu;
    const double Q = mu_limit - r.mu;
    const double s_norm = std::sqrt(std::max(r.E, 0.0));
    if (Q < 1e-12) continue;                       // noise-floor policy
    if (r.sup_S < 1e-8 || r.sup_S > 1e-1) continue;  // estimate regime window
    x.push_back(std::log(s_norm));
    y.push_back(std::log(Q));
  }
  if (x.size() < 10)
    throw error("lojasiewicz_fit: fewer than 10 usable samples");
  LinearFit fit = least_squares_bootstrap(x, y, 20260810u);
  const double theta = 1.0 / fit.slope;
  rep.fitted["theta"] = theta;
  rep.fitted["theta_ci_lo"] = 1.0 / fit.slope_ci_hi;
  rep.fitted["theta_ci_hi"] = 1.0 / fit.slope_ci_lo;
  rep.fitted["C_L"] = std::exp(-theta * fit.intercept);
  rep.fitted["samples"] = static_cast<double>(x.size());
  for (std::size_t i = 0; i < x.size(); ++i)
    rep.margins.push_back({x[i], y[i] - (fit.intercept + fit.slope * x[i])});
  rep.verdict = (theta > 0.0 && theta < 1.0 && std::isfinite(rep.fitted["C_L"]))
                    ? Verdict::holds
                    : Verdict::violated;
  return rep;
}

std::vector<DiagnosticsRecord> einstein_shortcut(const Trajectory& traj) {
  std::vector<DiagnosticsRecord> out;
  out.reserve(traj.records.size());
  for (const auto& rec : traj.records) {
    const MetricState& s = rec.state;
    const int sig = sigma_of(s);
    DiagnosticsRecord d;
    d.t = rec.t;
    d.mu = rec.entropy.mu;
    ScalarField f0(field_shape(s));  // f = 0
    CurvatureBundle cb = curvature(s);
    SymTensorField S = cb.Rc;
    SymTensorField g = metric_tensor(s);
    axpy(0.5 * sig, g, S);
    WeightedMeasure dv = volume_measure(s);
    d.E = inner(s, S, S, dv);
    Tensor3Field T = cov_deriv(s, S);
    d.F = inner(s, T, T, dv) - 2.0 * inner(s, rm_action(s, S), S, dv);
    d.N = quotient_N(d.E, d.F);
    d.sup_S = sup_norm(s, S);
    d.sup_Rm = sup_rm(s);
    ScalarField H = trace(s, S);  // H = R + sigma n / 2
    d.sup_H = sup_norm(s, H);
    static_residuals(s, f0, d.residuals, std::holds_alternative<AxisymSphereState>(s));
    out.push_back(std::move(d));
  }
  return out;
}

}  // namespace rflab
