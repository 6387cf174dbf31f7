#pragma once

#include <stdexcept>
#include <string>

namespace rflab {

struct error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Metric lost positive-definiteness at a node (det g below threshold).
struct degenerate_metric_error : error {
  degenerate_metric_error(const std::string& what, int node_index)
      : error(what), node(node_index) {}
  int node;
};

struct arena_mismatch_error : error {
  using error::error;
};

struct invalid_field_error : error {
  using error::error;
};

// Iterative solver ran out of iterations; carries the last residual.
struct non_convergence_error : error {
  non_convergence_error(const std::string& what, double last_residual)
      : error(what), residual(last_residual) {}
  double residual;
};

// Elliptic operator not invertible (weighted spectral gap <= 0).
struct non_invertibility_error : error {
  non_invertibility_error(const std::string& what, double gap_value)
      : error(what), gap(gap_value) {}
  double gap;
};

struct stiffness_error : error {
  using error::error;
};

struct config_error : error {
  using error::error;
};

struct io_error : error {
  using error::error;
};

struct unsupported_error : error {
  using error::error;
};

}  // namespace rflab
