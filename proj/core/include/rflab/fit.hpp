#pragma once

#include <cstdint>
#include <utility>
#include <vector>

namespace rflab {

struct LinearFit {
  double intercept = 0.0;
  double slope = 0.0;
  double slope_ci_lo = 0.0;   // 95% bootstrap interval
  double slope_ci_hi = 0.0;
  int n = 0;
};

// Ordinary least squares y = a + b x.
LinearFit least_squares(const std::vector<double>& x, const std::vector<double>& y);

// Least squares plus a seeded pairs-bootstrap 95% interval for the slope.
LinearFit least_squares_bootstrap(const std::vector<double>& x,
                                  const std::vector<double>& y,
                                  std::uint64_t seed, int resamples = 199);

// Mean of log2(r[i]/r[i+1]) over consecutive refinement levels (each level
// halves h), i.e. the observed order of accuracy.
double refinement_order(const std::vector<double>& residuals);

// Three-point centered first derivative on a possibly nonuniform grid,
// evaluated at the middle point.
double centered_derivative(double t0, double t1, double t2,
                           double f0, double f1, double f2);

// Trapezoid quadrature of samples (t_i, f_i).
double trapezoid(const std::vector<double>& t, const std::vector<double>& f);

}  // namespace rflab
