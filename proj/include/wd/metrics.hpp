#pragma once

#include <string>
#include <utility>
#include <vector>

#include "wd/flow.hpp"
#include "wd/grid_field.hpp"
#include "wd/kernels_gp.hpp"

namespace wd {

// Per-frame self-warping error: masked mean squared residual between
// frame j warped by its (cumulative) flow and the reference frame.
// Entry 0 is 0 by definition.
std::vector<double> warping_error(const std::vector<Field>& frames,
                                  const FlowSequence& flows, bool to_first);

double mse(const Field& a, const Field& b);

struct NoiseReport {
  double mean_abs_max = 0.0;  // worst per-pixel mean magnitude
  double var_mean = 0.0, var_min = 0.0, var_max = 0.0;
  double ks = 0.0;  // Kolmogorov-Smirnov distance to N(0,1), pooled
  // (distance, empirical covariance) at integer-pixel lags along x
  std::vector<std::pair<double, double>> cov_curve;
};

NoiseReport noise_diagnostics(const std::vector<Field>& samples,
                              const KernelSpec& spec);

struct MetricsRow {
  int frame = 0;
  std::string scheme;
  double lambda = 0.0;
  double err_first = 0.0;
  double err_prev = 0.0;
  double mse = 0.0;
};

void write_metrics_csv(const std::vector<MetricsRow>& rows,
                       const std::string& path);

}  // namespace wd
