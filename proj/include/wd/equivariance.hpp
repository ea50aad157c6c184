#pragma once

#include "wd/diffusion.hpp"
#include "wd/grid_field.hpp"

namespace wd {

// out(i, j) = v((i - di) mod h, (j - dj) mod w): content moves by (di, dj)
Eigen::VectorXd cyclic_shift(const Grid& grid, const Eigen::VectorXd& v,
                             int di, int dj);

// max over trials and random integer shifts S of |h(S u) - S h(u)|_inf
double check_convolution_equivariance(const Denoiser& den, const Grid& grid,
                                      int n_trials, uint64_t seed);

// same commutation for one Euler update u_t -> u_{t-dt}
double check_step_equivariance(const Denoiser& den, const Grid& grid, double t,
                               double dt, int di, int dj, int n_trials,
                               uint64_t seed);

// end-to-end: run the full sampler on u_tau and on S(u_tau), compare
// S(first output) against the second
double check_chain_equivariance(const Denoiser& den, const Grid& grid,
                                const Schedule& sched, int di, int dj,
                                uint64_t seed);

}  // namespace wd
