#pragma once

#include <complex>
#include <vector>

#include <Eigen/Dense>

#include "wd/grid_field.hpp"

namespace wd {

// Linear operator on grid vectors given by periodic 2D convolution with a
// fixed tap stencil: (Cv)(p) = sum_q taps(p - q mod n) v(q). Diagonalized
// by the 2D DFT; apply/solve cost one forward and one inverse transform.
// Construction is not thread safe (FFTW plan creation); apply/solve are.
class CirculantOp {
 public:
  CirculantOp(const Grid& grid, const std::vector<double>& taps);
  ~CirculantOp();
  CirculantOp(const CirculantOp& other);
  CirculantOp& operator=(const CirculantOp&) = delete;

  // Taps from the squared-exponential kernel at minimum-image torus
  // distances (the periodic analogue of kernel_matrix rows). With
  // normalize, taps sum to 1: a smoothing filter with unit DC gain.
  static CirculantOp se_kernel(const Grid& grid, double length_scale,
                               bool normalize = false);

  Eigen::VectorXd apply(const Eigen::VectorXd& v) const;
  Eigen::VectorXd apply_adjoint(const Eigen::VectorXd& v) const;
  // Spectral solve; eigenvalue magnitudes are floored to avoid blowup on
  // numerically null modes.
  Eigen::VectorXd solve(const Eigen::VectorXd& v, double eig_floor = 1e-12) const;
  // (alpha I + beta C)^{-1} v, spectrally
  Eigen::VectorXd solve_shifted(const Eigen::VectorXd& v, double alpha,
                                double beta, double eig_floor = 1e-12) const;

  const Grid& grid() const { return grid_; }
  const std::vector<std::complex<double>>& eigenvalues() const { return eig_; }
  double eig_real_min() const;
  double eig_real_max() const;

 private:
  Grid grid_;
  std::vector<std::complex<double>> eig_;
  void* plan_fwd_ = nullptr;
  void* plan_bwd_ = nullptr;

  void make_plans();
  Eigen::VectorXd transform_multiply(const Eigen::VectorXd& v,
                                     const std::vector<std::complex<double>>& mult) const;
};

}  // namespace wd
