#pragma once

#include <functional>
#include <memory>
#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "wd/circulant.hpp"
#include "wd/grid_field.hpp"
#include "wd/kernels_gp.hpp"

namespace wd {

// Variance-exploding schedule sigma(t) = t on a linear time grid from tau
// down to dt, so the final Euler step lands exactly on the pure denoise.
struct Schedule {
  double tau = 10.0;
  int n_steps = 25;

  double sigma(double t) const { return t; }
  double dsigma(double) const { return 1.0; }
  double dt() const { return tau / n_steps; }
  // strictly decreasing: tau, tau - dt, ..., dt
  std::vector<double> times() const;
};

struct GaussianData {
  Eigen::VectorXd mean;
  Eigen::MatrixXd cov;
};

struct MixtureData {
  std::vector<double> weights;
  std::vector<Eigen::VectorXd> means;
  std::vector<Eigen::MatrixXd> covs;
};

// Linear observation y = M u0 + sigma_y * eta.
struct Observation {
  Eigen::MatrixXd M;
  Eigen::VectorXd y;
  double sigma_y = 0.1;
};

Eigen::MatrixXd obs_mask_matrix(int k, const std::vector<uint8_t>& mask);
Eigen::MatrixXd obs_downsample_matrix(const Grid& grid, int factor);
Field obs_mask(const Field& f, const std::vector<uint8_t>& mask);
Field obs_downsample(const Field& f, int factor);

// Exact linear-Gaussian update of the data model given the observation.
GaussianData gaussian_posterior(const GaussianData& data, const Observation& obs);

// Conditional-mean model standing in for the trained network: evaluate
// approximates E[u0 | u_t (, y)], vjp is v^T d(evaluate)/du.
class Denoiser {
 public:
  virtual ~Denoiser() = default;
  virtual int dim() const = 0;
  virtual Eigen::VectorXd evaluate(const Eigen::VectorXd& u, double t) const = 0;
  virtual Eigen::VectorXd vjp(const Eigen::VectorXd& u, double t,
                              const Eigen::VectorXd& v) const = 0;
  // column-wise evaluate; overridden where a shared factorization pays off
  virtual Eigen::MatrixXd evaluate_batch(const Eigen::MatrixXd& U, double t) const;
};

using DenoiserPtr = std::shared_ptr<const Denoiser>;

// Exact posterior mean for Gaussian data, dense algebra (k <= 1024 with a
// full covariance). An observation is folded in by updating (m, Sigma)
// first; conditioning on u_t is then the unconditional formula.
DenoiserPtr gaussian_denoiser(const GaussianData& data, const Eigen::MatrixXd& Q,
                              std::optional<Observation> obs = std::nullopt);

DenoiserPtr mixture_denoiser(const MixtureData& data, const Eigen::MatrixXd& Q);

// Large-grid Gaussian denoiser: data covariance diag_cov (diagonal), Q
// circulant; solves (D + sigma^2 Q) x = r by preconditioned CG. A masked
// observation keeps the updated covariance diagonal.
DenoiserPtr gaussian_circulant_denoiser(const Eigen::VectorXd& mean,
                                        double data_var, const CirculantOp& q);
DenoiserPtr gaussian_circulant_denoiser(const Eigen::VectorXd& mean,
                                        double data_var, const CirculantOp& q,
                                        const std::vector<uint8_t>& obs_mask,
                                        const Eigen::VectorXd& y, double sigma_y);

// Large-grid mixture denoiser: components share the diagonal covariance
// data_var I, so every solve hits the same (diag + sigma^2 Q) operator. A
// masked observation updates the means, the shared diagonal, and the
// component evidence.
DenoiserPtr mixture_circulant_denoiser(const std::vector<double>& weights,
                                       const std::vector<Eigen::VectorXd>& means,
                                       double data_var, const CirculantOp& q);
DenoiserPtr mixture_circulant_denoiser(const std::vector<double>& weights,
                                       const std::vector<Eigen::VectorXd>& means,
                                       double data_var, const CirculantOp& q,
                                       const std::vector<uint8_t>& obs_mask,
                                       const Eigen::VectorXd& y, double sigma_y);

// Time-independent linear denoiser h(u) = K (*) u, exactly equivariant to
// cyclic shifts; vjp is convolution with the flipped stencil.
DenoiserPtr circulant_denoiser(const CirculantOp& filter);

// gain (.) base(u, t): a deliberately non shift-equivariant model.
DenoiserPtr perturbed_denoiser(DenoiserPtr base, const Eigen::VectorXd& gain);
// smooth deterministic gain in [0.8, 1.2]
Eigen::VectorXd smooth_gain_field(const Grid& grid, uint64_t seed);

// Sampler for N(0, Q) values at the grid points.
using QSampler = std::function<Eigen::VectorXd(uint64_t seed)>;
QSampler q_sampler_chol(const Eigen::MatrixXd& Q);
QSampler q_sampler_rff(const KernelSpec& spec, int features, const Grid& grid);

using DataSampler = std::function<Eigen::VectorXd(uint64_t seed)>;
DataSampler data_sampler(const GaussianData& data);
DataSampler data_sampler(const MixtureData& data);

// u_t = u0 + sigma(t) xi, xi ~ N(0, Q)
Eigen::VectorXd forward_marginal(const Eigen::VectorXd& u0, double t,
                                 const Schedule& sched, const QSampler& qs,
                                 uint64_t seed);
// Euler-Maruyama on du = (2 sigma sigmadot Q)^{1/2} dW from 0 to tau
Eigen::VectorXd forward_sde_simulate(const Eigen::VectorXd& u0, double tau,
                                     int n_substeps, const Schedule& sched,
                                     const Eigen::MatrixXd& Q, uint64_t seed);

// (evaluate(u, t) - u) / sigma^2(t); the Q-weighted score
Eigen::VectorXd tweedie_weighted_score(const Denoiser& den,
                                       const Eigen::VectorXd& u, double t);

// probability-flow Euler update from t to t - dt
Eigen::VectorXd euler_step(const Eigen::VectorXd& u, double t, double dt,
                           const Denoiser& den, const Schedule& sched = {});

struct FrameResult {
  Eigen::VectorXd u0;
  // denoiser outputs per step, aligned to Schedule::times()
  std::vector<Eigen::VectorXd> trajectory;
};

FrameResult sample_frame(const Eigen::VectorXd& noise_tau, const Schedule& sched,
                         const Denoiser& den);

// All trajectories stepped together so per-time factorizations are shared;
// column e equals sample_frame on column e.
Eigen::MatrixXd sample_ensemble(const Eigen::MatrixXd& noise_tau,
                                const Schedule& sched, const Denoiser& den);

// Monte Carlo estimate of E_t E_u0 E_ut |h(u_t, t) - u0|^2, t ~ U(0, tau)
double denoising_loss(const Denoiser& den, const DataSampler& data,
                      const QSampler& qs, const Schedule& sched, int n_mc,
                      uint64_t seed);

}  // namespace wd
