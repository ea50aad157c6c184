#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

#include "wd/grid_field.hpp"
#include "wd/rng.hpp"

namespace wd {

// Squared-exponential kernel kappa(x,y) = exp(-|x-y|^2 / (2 eps^2)) with
// frequency truncation at truncation_mult / length_scale per component.
struct KernelSpec {
  double length_scale = 0.004977;
  double truncation_mult = 2.0;

  double operator()(Point a, Point b) const {
    double dx = a.x - b.x, dy = a.y - b.y;
    double e2 = length_scale * length_scale;
    return std::exp(-(dx * dx + dy * dy) / (2.0 * e2));
  }
};

// Rule of thumb tying the length scale to the grid resolution so the
// truncated frequencies stay below Nyquist.
inline double default_length_scale(int resolution) {
  return 2.0 / (3.14159265358979323846 * resolution);
}

Eigen::MatrixXd kernel_matrix(const KernelSpec& spec,
                              const std::vector<Point>& X,
                              const std::vector<Point>& Y);

// Dense GP draw on X: L z with L L^T = Q(X,X) + jitter I. Jitter
// escalates x10 from the given value up to 1e-6 before failing.
Eigen::VectorXd gp_sample_exact(const KernelSpec& spec,
                                const std::vector<Point>& X, uint64_t seed,
                                double jitter = 1e-10);

struct GaussianConditional {
  Eigen::VectorXd mean;
  Eigen::MatrixXd cov;
};

// xi(Y) | xi(X) per the standard GP conditioning identities. X may be
// empty, in which case the prior (0, Q(Y,Y)) is returned.
GaussianConditional gp_condition(const KernelSpec& spec,
                                 const std::vector<Point>& X,
                                 const Eigen::VectorXd& valuesX,
                                 const std::vector<Point>& Y,
                                 double jitter = 1e-10);

// Random Fourier feature realization of the GP noise function:
//   xi(x) = sqrt(2/J) sum_j w_j cos(<z_j, x> + b_j),
// evaluable anywhere on the plane. Storage is SoA for the SIMD lane.
struct RffField {
  KernelSpec spec;
  uint64_t seed = 0;
  std::vector<double> w;   // weights, N(0,1)
  std::vector<double> zx;  // frequencies, truncated N(0, eps^-2) per component
  std::vector<double> zy;
  std::vector<double> b;   // phases, U(0, 2pi)

  int features() const { return (int)w.size(); }
};

RffField rff_sample(const KernelSpec& spec, int features, uint64_t seed);

double rff_eval(const RffField& field, Point p);
void rff_eval_points(const RffField& field, const Point* pts, int n,
                     double* out);

// Grid evaluation hot path; n_threads = 0 picks hardware concurrency.
// Output is identical across thread counts (per-point independence).
Field rff_eval_grid(const RffField& field, const Grid& grid,
                    int n_threads = 0);

// "WDRF" serialization so a run can resume with the identical noise function.
void rff_write(const RffField& field, const std::string& path);
RffField rff_read(const std::string& path);

// Selected kernel backend name ("avx2", "neon" or "scalar").
const char* rff_backend_name();
// Scalar reference evaluation, for equivalence testing against the
// dispatched backend.
double rff_eval_scalar_ref(const RffField& field, Point p);

}  // namespace wd
