#include "wd/equivariance.hpp"

#include <cmath>
#include <stdexcept>

#include "wd/rng.hpp"

namespace wd {

using Eigen::VectorXd;

VectorXd cyclic_shift(const Grid& grid, const VectorXd& v, int di, int dj) {
  if ((int)v.size() != grid.size())
    throw std::invalid_argument("cyclic_shift: size mismatch");
  const int h = grid.height, w = grid.width;
  auto wrap = [](int a, int n) { return ((a % n) + n) % n; };
  VectorXd out(v.size());
  for (int i = 0; i < h; ++i)
    for (int j = 0; j < w; ++j)
      out(grid.index(i, j)) = v(grid.index(wrap(i - di, h), wrap(j - dj, w)));
  return out;
}

namespace {

VectorXd white_noise_vec(int k, uint64_t seed) {
  RngStream rng(seed);
  VectorXd v(k);
  for (int i = 0; i < k; ++i) v(i) = rng.normal((uint64_t)i);
  return v;
}

}  // namespace

double check_convolution_equivariance(const Denoiser& den, const Grid& grid,
                                      int n_trials, uint64_t seed) {
  double worst = 0.0;
  RngStream rng(seed, 1);
  for (int trial = 0; trial < n_trials; ++trial) {
    VectorXd u = white_noise_vec(grid.size(), seed + trial);
    int di = 1 + (int)(rng.uniform(2 * trial) * (grid.height - 1));
    int dj = 1 + (int)(rng.uniform(2 * trial + 1) * (grid.width - 1));
    VectorXd lhs = den.evaluate(cyclic_shift(grid, u, di, dj), 1.0);
    VectorXd rhs = cyclic_shift(grid, den.evaluate(u, 1.0), di, dj);
    worst = std::max(worst, (lhs - rhs).cwiseAbs().maxCoeff());
  }
  return worst;
}

double check_step_equivariance(const Denoiser& den, const Grid& grid, double t,
                               double dt, int di, int dj, int n_trials,
                               uint64_t seed) {
  double worst = 0.0;
  for (int trial = 0; trial < n_trials; ++trial) {
    VectorXd u = white_noise_vec(grid.size(), seed + trial);
    VectorXd lhs = euler_step(cyclic_shift(grid, u, di, dj), t, dt, den);
    VectorXd rhs = cyclic_shift(grid, euler_step(u, t, dt, den), di, dj);
    worst = std::max(worst, (lhs - rhs).cwiseAbs().maxCoeff());
  }
  return worst;
}

double check_chain_equivariance(const Denoiser& den, const Grid& grid,
                                const Schedule& sched, int di, int dj,
                                uint64_t seed) {
  VectorXd u = sched.sigma(sched.tau) * white_noise_vec(grid.size(), seed);
  FrameResult a = sample_frame(u, sched, den);
  FrameResult b = sample_frame(cyclic_shift(grid, u, di, dj), sched, den);
  return (cyclic_shift(grid, a.u0, di, dj) - b.u0).cwiseAbs().maxCoeff();
}

}  // namespace wd
