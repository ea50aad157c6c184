#include "wd/circulant.hpp"

#include <fftw3.h>

#include <cmath>
#include <stdexcept>

namespace wd {

CirculantOp::CirculantOp(const Grid& grid, const std::vector<double>& taps)
    : grid_(grid) {
  const int k = grid.size();
  if ((int)taps.size() != k)
    throw std::invalid_argument("CirculantOp: taps size must match grid");
  make_plans();
  // eigenvalues = DFT of the tap stencil
  std::vector<std::complex<double>> in(k), out(k);
  for (int i = 0; i < k; ++i) in[i] = taps[i];
  fftw_execute_dft((fftw_plan)plan_fwd_, (fftw_complex*)in.data(),
                   (fftw_complex*)out.data());
  eig_ = std::move(out);
}

CirculantOp::~CirculantOp() {
  if (plan_fwd_) fftw_destroy_plan((fftw_plan)plan_fwd_);
  if (plan_bwd_) fftw_destroy_plan((fftw_plan)plan_bwd_);
}

CirculantOp::CirculantOp(const CirculantOp& other)
    : grid_(other.grid_), eig_(other.eig_) {
  make_plans();
}

void CirculantOp::make_plans() {
  const int k = grid_.size();
  std::vector<std::complex<double>> a(k), b(k);
  plan_fwd_ = fftw_plan_dft_2d(grid_.height, grid_.width, (fftw_complex*)a.data(),
                               (fftw_complex*)b.data(), FFTW_FORWARD,
                               FFTW_ESTIMATE | FFTW_UNALIGNED);
  plan_bwd_ = fftw_plan_dft_2d(grid_.height, grid_.width, (fftw_complex*)a.data(),
                               (fftw_complex*)b.data(), FFTW_BACKWARD,
                               FFTW_ESTIMATE | FFTW_UNALIGNED);
  if (!plan_fwd_ || !plan_bwd_)
    throw std::runtime_error("CirculantOp: FFTW plan creation failed");
}

CirculantOp CirculantOp::se_kernel(const Grid& grid, double length_scale,
                                   bool normalize) {
  if (!(length_scale > 0.0))
    throw std::invalid_argument("CirculantOp: length scale must be positive");
  std::vector<double> taps(grid.size());
  double sum = 0.0;
  for (int i = 0; i < grid.height; ++i)
    for (int j = 0; j < grid.width; ++j) {
      // minimum-image displacement of lattice offset (i, j) in domain units
      double dy = (double)i / grid.height;
      double dx = (double)j / grid.width;
      if (dy > 0.5) dy -= 1.0;
      if (dx > 0.5) dx -= 1.0;
      double d2 = dx * dx + dy * dy;
      taps[grid.index(i, j)] =
          std::exp(-d2 / (2.0 * length_scale * length_scale));
      sum += taps[grid.index(i, j)];
    }
  if (normalize)
    for (double& t : taps) t /= sum;
  return CirculantOp(grid, taps);
}

Eigen::VectorXd CirculantOp::transform_multiply(
    const Eigen::VectorXd& v, const std::vector<std::complex<double>>& mult) const {
  const int k = grid_.size();
  if ((int)v.size() != k)
    throw std::invalid_argument("CirculantOp: vector size mismatch");
  std::vector<std::complex<double>> a(k), b(k);
  for (int i = 0; i < k; ++i) a[i] = v(i);
  fftw_execute_dft((fftw_plan)plan_fwd_, (fftw_complex*)a.data(),
                   (fftw_complex*)b.data());
  for (int i = 0; i < k; ++i) b[i] *= mult[i];
  fftw_execute_dft((fftw_plan)plan_bwd_, (fftw_complex*)b.data(),
                   (fftw_complex*)a.data());
  Eigen::VectorXd out(k);
  for (int i = 0; i < k; ++i) out(i) = a[i].real() / k;
  return out;
}

Eigen::VectorXd CirculantOp::apply(const Eigen::VectorXd& v) const {
  return transform_multiply(v, eig_);
}

Eigen::VectorXd CirculantOp::apply_adjoint(const Eigen::VectorXd& v) const {
  std::vector<std::complex<double>> conj(eig_.size());
  for (size_t i = 0; i < eig_.size(); ++i) conj[i] = std::conj(eig_[i]);
  return transform_multiply(v, conj);
}

Eigen::VectorXd CirculantOp::solve(const Eigen::VectorXd& v, double eig_floor) const {
  std::vector<std::complex<double>> inv(eig_.size());
  for (size_t i = 0; i < eig_.size(); ++i) {
    std::complex<double> e = eig_[i];
    if (std::abs(e) < eig_floor) e = eig_floor;
    inv[i] = 1.0 / e;
  }
  return transform_multiply(v, inv);
}

Eigen::VectorXd CirculantOp::solve_shifted(const Eigen::VectorXd& v, double alpha,
                                           double beta, double eig_floor) const {
  std::vector<std::complex<double>> inv(eig_.size());
  for (size_t i = 0; i < eig_.size(); ++i) {
    std::complex<double> e = alpha + beta * eig_[i];
    if (std::abs(e) < eig_floor) e = eig_floor;
    inv[i] = 1.0 / e;
  }
  return transform_multiply(v, inv);
}

double CirculantOp::eig_real_min() const {
  double m = eig_[0].real();
  for (const auto& e : eig_) m = std::min(m, e.real());
  return m;
}

double CirculantOp::eig_real_max() const {
  double m = eig_[0].real();
  for (const auto& e : eig_) m = std::max(m, e.real());
  return m;
}

}  // namespace wd
