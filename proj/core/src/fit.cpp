#include "rflab/fit.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>

#include "rflab/errors.hpp"
#include "rflab/rng.hpp"

namespace rflab {

LinearFit least_squares(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2)
    throw error("least_squares: need at least two matched samples");
  const int n = static_cast<int>(x.size());
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (int i = 0; i < n; ++i) {
    sx += x[i];
    sy += y[i];
    sxx += x[i] * x[i];
    sxy += x[i] * y[i];
  }
  const double det = n * sxx - sx * sx;
  LinearFit fit;
  fit.n = n;
  fit.slope = (n * sxy - sx * sy) / det;
  fit.intercept = (sy - fit.slope * sx) / n;
  fit.slope_ci_lo = fit.slope_ci_hi = fit.slope;
  return fit;
}

LinearFit least_squares_bootstrap(const std::vector<double>& x,
                                  const std::vector<double>& y,
                                  std::uint64_t seed, int resamples) {
  LinearFit fit = least_squares(x, y);
  const int n = fit.n;
  Rng rng(seed);
  std::vector<double> slopes;
  slopes.reserve(resamples);
  std::vector<double> bx(n), by(n);
  for (int r = 0; r < resamples; ++r) {
    for (int i = 0; i < n; ++i) {
      int j = rng.uniform_int(0, n - 1);
      bx[i] = x[j];
      by[i] = y[j];
    }
    // Degenerate resamples (all x equal) are skipped.
    double lo = *std::min_element(bx.begin(), bx.end());
    double hi = *std::max_element(bx.begin(), bx.end());
    if (hi - lo < 1e-300) continue;
    slopes.push_back(least_squares(bx, by).slope);
  }
  if (slopes.size() >= 20) {
    std::sort(slopes.begin(), slopes.end());
    auto q = [&](double p) {
      double idx = p * (slopes.size() - 1);
      std::size_t lo_i = static_cast<std::size_t>(idx);
      std::size_t hi_i = std::min(lo_i + 1, slopes.size() - 1);
      double w = idx - lo_i;
      return (1 - w) * slopes[lo_i] + w * slopes[hi_i];
    };
    fit.slope_ci_lo = q(0.025);
    fit.slope_ci_hi = q(0.975);
  }
  return fit;
}

double refinement_order(const std::vector<double>& residuals) {
  if (residuals.size() < 2)
    throw error("refinement_order: need at least two levels");
  double sum = 0;
  int count = 0;
  for (std::size_t i = 0; i + 1 < residuals.size(); ++i) {
    if (residuals[i] <= 0 || residuals[i + 1] <= 0)
      throw error("refinement_order: residuals must be positive");
    sum += std::log2(residuals[i] / residuals[i + 1]);
    ++count;
  }
  return sum / count;
}

double centered_derivative(double t0, double t1, double t2,
                           double f0, double f1, double f2) {
  const double d0 = t1 - t0;
  const double d1 = t2 - t1;
  return -d1 / (d0 * (d0 + d1)) * f0 + (d1 - d0) / (d0 * d1) * f1 +
         d0 / (d1 * (d0 + d1)) * f2;
}

double trapezoid(const std::vector<double>& t, const std::vector<double>& f) {
  if (t.size() != f.size() || t.size() < 2)
    throw error("trapezoid: need at least two matched samples");
  double acc = 0;
  for (std::size_t i = 0; i + 1 < t.size(); ++i)
    acc += 0.5 * (f[i] + f[i + 1]) * (t[i + 1] - t[i]);
  return acc;
}

}  // namespace rflab
