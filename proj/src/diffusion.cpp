#include "wd/diffusion.hpp"

#include <cmath>
#include <limits>
#include <mutex>
#include <stdexcept>
#include <string>

#include "wd/rng.hpp"

namespace wd {

using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

Eigen::LLT<MatrixXd> llt_with_jitter(const MatrixXd& m) {
  Eigen::LLT<MatrixXd> llt(m);
  double jitter = 1e-10;
  while (llt.info() != Eigen::Success && jitter <= 1e-6) {
    MatrixXd j = m;
    j.diagonal().array() += jitter;
    llt.compute(j);
    jitter *= 10.0;
  }
  if (llt.info() != Eigen::Success)
    throw std::runtime_error("diffusion: Cholesky factorization failed");
  return llt;
}

void require_finite(const VectorXd& v, const char* what) {
  if (!v.allFinite()) throw std::invalid_argument(std::string(what) + ": non-finite input");
}

}  // namespace

std::vector<double> Schedule::times() const {
  if (n_steps < 1 || !(tau > 0.0))
    throw std::invalid_argument("Schedule: need n_steps >= 1 and tau > 0");
  std::vector<double> t(n_steps);
  double d = dt();
  for (int i = 0; i < n_steps; ++i) t[i] = tau - i * d;
  t.back() = d;  // exact terminal time despite rounding
  return t;
}

MatrixXd obs_mask_matrix(int k, const std::vector<uint8_t>& mask) {
  if ((int)mask.size() != k)
    throw std::invalid_argument("obs_mask_matrix: mask size mismatch");
  int rows = 0;
  for (auto m : mask) rows += (m != 0);
  MatrixXd M = MatrixXd::Zero(rows, k);
  int r = 0;
  for (int i = 0; i < k; ++i)
    if (mask[i]) M(r++, i) = 1.0;
  return M;
}

MatrixXd obs_downsample_matrix(const Grid& grid, int factor) {
  if (factor < 1 || grid.height % factor || grid.width % factor)
    throw std::invalid_argument("obs_downsample_matrix: factor must divide dims");
  int bh = grid.height / factor, bw = grid.width / factor;
  MatrixXd M = MatrixXd::Zero(bh * bw, grid.size());
  double w = 1.0 / (factor * factor);
  for (int bi = 0; bi < bh; ++bi)
    for (int bj = 0; bj < bw; ++bj)
      for (int di = 0; di < factor; ++di)
        for (int dj = 0; dj < factor; ++dj)
          M(bi * bw + bj, grid.index(bi * factor + di, bj * factor + dj)) = w;
  return M;
}

Field obs_mask(const Field& f, const std::vector<uint8_t>& mask) {
  if ((int)mask.size() != f.grid.size() || f.channels != 1)
    throw std::invalid_argument("obs_mask: shape mismatch");
  Field out = f;
  for (int i = 0; i < f.grid.size(); ++i)
    if (!mask[i]) out.values[i] = 0.0;
  return out;
}

Field obs_downsample(const Field& f, int factor) {
  if (f.channels != 1) throw std::invalid_argument("obs_downsample: need c=1");
  if (factor == 1) return f;
  const Grid& g = f.grid;
  if (factor < 1 || g.height % factor || g.width % factor)
    throw std::invalid_argument("obs_downsample: factor must divide dims");
  Grid og(g.width / factor, g.height / factor);
  Field out(og, 1);
  double w = 1.0 / (factor * factor);
  for (int bi = 0; bi < og.height; ++bi)
    for (int bj = 0; bj < og.width; ++bj) {
      double s = 0.0;
      for (int di = 0; di < factor; ++di)
        for (int dj = 0; dj < factor; ++dj)
          s += f.at(bi * factor + di, bj * factor + dj);
      out.at(bi, bj) = s * w;
    }
  return out;
}

GaussianData gaussian_posterior(const GaussianData& data, const Observation& obs) {
  const MatrixXd& M = obs.M;
  if (M.cols() != data.mean.size() || obs.y.size() != M.rows())
    throw std::invalid_argument("gaussian_posterior: shape mismatch");
  MatrixXd SMt = data.cov * M.transpose();
  MatrixXd Sy = M * SMt;
  Sy.diagonal().array() += obs.sigma_y * obs.sigma_y;
  Eigen::LLT<MatrixXd> llt = llt_with_jitter(Sy);
  MatrixXd K = llt.solve(SMt.transpose()).transpose();  // Sigma M^T Sy^{-1}
  GaussianData post;
  post.mean = data.mean + K * (obs.y - M * data.mean);
  post.cov = data.cov - K * SMt.transpose();
  post.cov = 0.5 * (post.cov + post.cov.transpose()).eval();
  return post;
}

MatrixXd Denoiser::evaluate_batch(const MatrixXd& U, double t) const {
  MatrixXd out(U.rows(), U.cols());
  for (int c = 0; c < U.cols(); ++c) out.col(c) = evaluate(U.col(c), t);
  return out;
}

// ---------------------------------------------------------------------------
// dense Gaussian

namespace {

class GaussianDenoiser final : public Denoiser {
 public:
  GaussianDenoiser(GaussianData data, MatrixXd Q)
      : m_(std::move(data.mean)), cov_(std::move(data.cov)), Q_(std::move(Q)) {
    if (cov_.rows() != m_.size() || Q_.rows() != m_.size())
      throw std::invalid_argument("gaussian_denoiser: shape mismatch");
  }

  int dim() const override { return (int)m_.size(); }

  VectorXd evaluate(const VectorXd& u, double t) const override {
    require_finite(u, "gaussian_denoiser");
    std::lock_guard<std::mutex> lock(mu_);
    factor(t);
    return m_ + cov_ * cache_.llt.solve(u - m_);
  }

  VectorXd vjp(const VectorXd& u, double t, const VectorXd& v) const override {
    (void)u;
    std::lock_guard<std::mutex> lock(mu_);
    factor(t);
    return cache_.llt.solve(cov_ * v);
  }

  MatrixXd evaluate_batch(const MatrixXd& U, double t) const override {
    std::lock_guard<std::mutex> lock(mu_);
    factor(t);
    MatrixXd R = U.colwise() - m_;
    return (cov_ * cache_.llt.solve(R)).colwise() + m_;
  }

 private:
  VectorXd m_;
  MatrixXd cov_, Q_;
  struct Cache {
    double t = -1.0;
    Eigen::LLT<MatrixXd> llt;
  };
  mutable Cache cache_;
  mutable std::mutex mu_;

  void factor(double t) const {
    if (cache_.t == t) return;
    double s2 = t * t;
    MatrixXd S = cov_ + s2 * Q_;
    cache_.llt = llt_with_jitter(S);
    cache_.t = t;
  }
};

}  // namespace

DenoiserPtr gaussian_denoiser(const GaussianData& data, const MatrixXd& Q,
                              std::optional<Observation> obs) {
  GaussianData d = obs ? gaussian_posterior(data, *obs) : data;
  return std::make_shared<GaussianDenoiser>(std::move(d), Q);
}

// ---------------------------------------------------------------------------
// mixture

namespace {

class MixtureDenoiser final : public Denoiser {
 public:
  MixtureDenoiser(MixtureData data, MatrixXd Q)
      : data_(std::move(data)), Q_(std::move(Q)) {
    const size_t n = data_.weights.size();
    if (n == 0 || data_.means.size() != n || data_.covs.size() != n)
      throw std::invalid_argument("mixture_denoiser: inconsistent component count");
    double wsum = 0.0;
    for (double w : data_.weights) {
      if (!(w >= 0.0)) throw std::invalid_argument("mixture_denoiser: negative weight");
      wsum += w;
    }
    if (std::abs(wsum - 1.0) > 1e-9)
      throw std::invalid_argument("mixture_denoiser: weights must sum to 1");
  }

  int dim() const override { return (int)data_.means[0].size(); }

  VectorXd evaluate(const VectorXd& u, double t) const override {
    std::lock_guard<std::mutex> lock(mu_);
    factor(t);
    std::vector<double> r = responsibilities(u);
    VectorXd out = VectorXd::Zero(dim());
    for (size_t i = 0; i < r.size(); ++i) {
      if (r[i] == 0.0) continue;
      out += r[i] * (data_.means[i] +
                     data_.covs[i] * cache_.llt[i].solve(u - data_.means[i]));
    }
    return out;
  }

  VectorXd vjp(const VectorXd& u, double t, const VectorXd& v) const override {
    std::lock_guard<std::mutex> lock(mu_);
    factor(t);
    std::vector<double> r = responsibilities(u);
    const size_t n = r.size();
    std::vector<VectorXd> g(n), post(n);
    VectorXd gbar = VectorXd::Zero(dim());
    for (size_t i = 0; i < n; ++i) {
      VectorXd d = u - data_.means[i];
      g[i] = -cache_.llt[i].solve(d);  // grad of log N_i w.r.t. u
      post[i] = data_.means[i] - data_.covs[i] * g[i];
      gbar += r[i] * g[i];
    }
    VectorXd out = VectorXd::Zero(dim());
    for (size_t i = 0; i < n; ++i) {
      if (r[i] == 0.0) continue;
      out += r[i] * cache_.llt[i].solve(data_.covs[i] * v);
      out += r[i] * (g[i] - gbar) * (post[i].dot(v));
    }
    return out;
  }

 private:
  MixtureData data_;
  MatrixXd Q_;
  struct Cache {
    double t = -1.0;
    std::vector<Eigen::LLT<MatrixXd>> llt;
    std::vector<double> logdet;
  };
  mutable Cache cache_;
  mutable std::mutex mu_;

  void factor(double t) const {
    if (cache_.t == t) return;
    const size_t n = data_.weights.size();
    cache_.llt.resize(n);
    cache_.logdet.resize(n);
    double s2 = t * t;
    for (size_t i = 0; i < n; ++i) {
      MatrixXd S = data_.covs[i] + s2 * Q_;
      cache_.llt[i] = llt_with_jitter(S);
      double ld = 0.0;
      const auto& L = cache_.llt[i].matrixLLT();
      for (int j = 0; j < L.rows(); ++j) ld += 2.0 * std::log(L(j, j));
      cache_.logdet[i] = ld;
    }
    cache_.t = t;
  }

  // softmax of log pi_i + log N(u; m_i, S_i); assumes factor(t) done
  std::vector<double> responsibilities(const VectorXd& u) const {
    const size_t n = data_.weights.size();
    std::vector<double> lw(n);
    double lmax = -std::numeric_limits<double>::infinity();
    size_t best = 0;
    for (size_t i = 0; i < n; ++i) {
      VectorXd d = u - data_.means[i];
      double quad = d.dot(cache_.llt[i].solve(d));
      lw[i] = (data_.weights[i] > 0.0 ? std::log(data_.weights[i])
                                      : -std::numeric_limits<double>::infinity()) -
              0.5 * (quad + cache_.logdet[i]);
      if (lw[i] > lmax) lmax = lw[i], best = i;
    }
    std::vector<double> r(n, 0.0);
    if (!std::isfinite(lmax)) {  // total underflow: nearest-component fallback
      r[best] = 1.0;
      return r;
    }
    double z = 0.0;
    for (size_t i = 0; i < n; ++i) z += (r[i] = std::exp(lw[i] - lmax));
    for (size_t i = 0; i < n; ++i) r[i] /= z;
    return r;
  }
};

}  // namespace

DenoiserPtr mixture_denoiser(const MixtureData& data, const MatrixXd& Q) {
  return std::make_shared<MixtureDenoiser>(data, Q);
}

// ---------------------------------------------------------------------------
// circulant-Q Gaussian (large grids)

namespace {

// (diag(d) + sigma^2 Q) x = b, CG with a circulant preconditioner at mean(d)
VectorXd circulant_cg_solve(const VectorXd& d, double dbar, const CirculantOp& q,
                            double s2, const VectorXd& b, const char* who) {
  auto apply = [&](const VectorXd& v) -> VectorXd {
    return d.cwiseProduct(v) + s2 * q.apply(v);
  };
  auto precond = [&](const VectorXd& r) -> VectorXd {
    return q.solve_shifted(r, dbar, s2);
  };
  VectorXd x = VectorXd::Zero(b.size());
  VectorXd r = b;
  double bnorm = b.norm();
  if (bnorm == 0.0) return x;
  VectorXd z = precond(r);
  VectorXd p = z;
  double rz = r.dot(z);
  for (int it = 0; it < 800; ++it) {
    VectorXd Ap = apply(p);
    double alpha = rz / p.dot(Ap);
    x += alpha * p;
    r -= alpha * Ap;
    if (r.norm() <= 1e-12 * bnorm) break;
    z = precond(r);
    double rz_new = r.dot(z);
    p = z + (rz_new / rz) * p;
    rz = rz_new;
  }
  if (!(r.norm() <= 1e-8 * bnorm))
    throw std::runtime_error(std::string(who) + ": CG did not converge");
  return x;
}

class GaussianCirculantDenoiser final : public Denoiser {
 public:
  GaussianCirculantDenoiser(VectorXd mean, VectorXd diag_cov, CirculantOp q)
      : m_(std::move(mean)), d_(std::move(diag_cov)), q_(std::move(q)) {
    if (d_.size() != m_.size() || q_.grid().size() != (int)m_.size())
      throw std::invalid_argument("gaussian_circulant_denoiser: shape mismatch");
    dbar_ = d_.mean();
  }

  int dim() const override { return (int)m_.size(); }

  VectorXd evaluate(const VectorXd& u, double t) const override {
    require_finite(u, "gaussian_circulant_denoiser");
    VectorXd x = cg_solve(u - m_, t);
    return m_ + d_.cwiseProduct(x);
  }

  VectorXd vjp(const VectorXd& u, double t, const VectorXd& v) const override {
    (void)u;
    return cg_solve(d_.cwiseProduct(v), t);
  }

 private:
  VectorXd m_, d_;
  CirculantOp q_;
  double dbar_;

  VectorXd cg_solve(const VectorXd& b, double t) const {
    return circulant_cg_solve(d_, dbar_, q_, t * t, b,
                              "gaussian_circulant_denoiser");
  }
};

}  // namespace

DenoiserPtr gaussian_circulant_denoiser(const VectorXd& mean, double data_var,
                                        const CirculantOp& q) {
  if (!(data_var > 0.0))
    throw std::invalid_argument("gaussian_circulant_denoiser: need data_var > 0");
  VectorXd d = VectorXd::Constant(mean.size(), data_var);
  return std::make_shared<GaussianCirculantDenoiser>(mean, d, q);
}

DenoiserPtr gaussian_circulant_denoiser(const VectorXd& mean, double data_var,
                                        const CirculantOp& q,
                                        const std::vector<uint8_t>& obs_mask,
                                        const Eigen::VectorXd& y, double sigma_y) {
  const int k = (int)mean.size();
  if ((int)obs_mask.size() != k)
    throw std::invalid_argument("gaussian_circulant_denoiser: mask size mismatch");
  if (!(data_var > 0.0) || !(sigma_y > 0.0))
    throw std::invalid_argument("gaussian_circulant_denoiser: need positive variances");
  // independent-pixel prior N(m, s^2 I) observed through a mask keeps the
  // y-posterior diagonal; conditioning on u_t then reuses the generic path
  VectorXd m = mean;
  VectorXd d = VectorXd::Constant(k, data_var);
  double sy2 = sigma_y * sigma_y;
  int r = 0;
  for (int i = 0; i < k; ++i) {
    if (!obs_mask[i]) continue;
    if (r >= (int)y.size())
      throw std::invalid_argument("gaussian_circulant_denoiser: y too short");
    double gain = data_var / (data_var + sy2);
    m(i) += gain * (y(r) - mean(i));
    d(i) = data_var * sy2 / (data_var + sy2);
    ++r;
  }
  if (r != (int)y.size())
    throw std::invalid_argument("gaussian_circulant_denoiser: y length mismatch");
  return std::make_shared<GaussianCirculantDenoiser>(std::move(m), std::move(d), q);
}

// ---------------------------------------------------------------------------
// circulant-Q mixture (large grids)

namespace {

// Mixture with shared diagonal component covariance diag(d): S = diag(d) +
// sigma^2 Q is the same across components, so all solves are CG against one
// operator. log_ev carries log weights plus any observation evidence.
class MixtureCirculantDenoiser final : public Denoiser {
 public:
  MixtureCirculantDenoiser(std::vector<double> log_ev, std::vector<VectorXd> means,
                           VectorXd diag_cov, CirculantOp q)
      : log_ev_(std::move(log_ev)),
        means_(std::move(means)),
        d_(std::move(diag_cov)),
        q_(std::move(q)) {
    dbar_ = d_.mean();
  }

  int dim() const override { return (int)means_[0].size(); }

  VectorXd evaluate(const VectorXd& u, double t) const override {
    require_finite(u, "mixture_circulant_denoiser");
    std::vector<VectorXd> s;
    std::vector<double> r;
    responsibilities(u, t, s, r);
    VectorXd out = VectorXd::Zero(u.size());
    for (size_t i = 0; i < means_.size(); ++i)
      out += r[i] * (means_[i] + d_.cwiseProduct(s[i]));
    return out;
  }

  VectorXd vjp(const VectorXd& u, double t, const VectorXd& v) const override {
    std::vector<VectorXd> s;
    std::vector<double> r;
    responsibilities(u, t, s, r);
    // J = sum r_i J_i + sum post_i (dr_i/du)^T with J_i^T v = S^{-1} diag(d) v
    VectorXd out = circulant_cg_solve(d_, dbar_, q_, t * t, d_.cwiseProduct(v),
                                      "mixture_circulant_denoiser");
    VectorXd sbar = VectorXd::Zero(u.size());
    for (size_t i = 0; i < means_.size(); ++i) sbar += r[i] * s[i];
    for (size_t i = 0; i < means_.size(); ++i) {
      VectorXd post = means_[i] + d_.cwiseProduct(s[i]);
      out -= r[i] * post.dot(v) * (s[i] - sbar);
    }
    return out;
  }

 private:
  std::vector<double> log_ev_;
  std::vector<VectorXd> means_;
  VectorXd d_;
  CirculantOp q_;
  double dbar_;

  // s_i = S^{-1} (u - m_i), r = softmax(log_ev_i - quad_i / 2); the shared
  // log det S cancels in the softmax
  void responsibilities(const VectorXd& u, double t, std::vector<VectorXd>& s,
                        std::vector<double>& r) const {
    const size_t n = means_.size();
    s.resize(n);
    r.resize(n);
    double lmax = -std::numeric_limits<double>::infinity();
    for (size_t i = 0; i < n; ++i) {
      VectorXd b = u - means_[i];
      s[i] = circulant_cg_solve(d_, dbar_, q_, t * t, b,
                                "mixture_circulant_denoiser");
      r[i] = log_ev_[i] - 0.5 * b.dot(s[i]);
      lmax = std::max(lmax, r[i]);
    }
    double sum = 0.0;
    for (size_t i = 0; i < n; ++i) sum += (r[i] = std::exp(r[i] - lmax));
    for (size_t i = 0; i < n; ++i) r[i] /= sum;
  }
};

}  // namespace

DenoiserPtr mixture_circulant_denoiser(const std::vector<double>& weights,
                                       const std::vector<VectorXd>& means,
                                       double data_var, const CirculantOp& q) {
  if (weights.empty() || weights.size() != means.size())
    throw std::invalid_argument("mixture_circulant_denoiser: bad component count");
  if (!(data_var > 0.0))
    throw std::invalid_argument("mixture_circulant_denoiser: need data_var > 0");
  const int k = (int)means[0].size();
  std::vector<double> log_ev(weights.size());
  for (size_t i = 0; i < weights.size(); ++i) {
    if (!(weights[i] > 0.0) || (int)means[i].size() != k)
      throw std::invalid_argument("mixture_circulant_denoiser: bad component");
    log_ev[i] = std::log(weights[i]);
  }
  return std::make_shared<MixtureCirculantDenoiser>(
      std::move(log_ev), means, VectorXd::Constant(k, data_var), q);
}

DenoiserPtr mixture_circulant_denoiser(const std::vector<double>& weights,
                                       const std::vector<VectorXd>& means,
                                       double data_var, const CirculantOp& q,
                                       const std::vector<uint8_t>& obs_mask,
                                       const Eigen::VectorXd& y, double sigma_y) {
  if (weights.empty() || weights.size() != means.size())
    throw std::invalid_argument("mixture_circulant_denoiser: bad component count");
  if (!(data_var > 0.0) || !(sigma_y > 0.0))
    throw std::invalid_argument("mixture_circulant_denoiser: need positive variances");
  const int k = (int)means[0].size();
  if ((int)obs_mask.size() != k)
    throw std::invalid_argument("mixture_circulant_denoiser: mask size mismatch");
  double sy2 = sigma_y * sigma_y;
  double gain = data_var / (data_var + sy2);
  VectorXd d = VectorXd::Constant(k, data_var);
  std::vector<double> log_ev(weights.size());
  std::vector<VectorXd> post_means(weights.size());
  for (size_t c = 0; c < weights.size(); ++c) {
    if (!(weights[c] > 0.0) || (int)means[c].size() != k)
      throw std::invalid_argument("mixture_circulant_denoiser: bad component");
    VectorXd m = means[c];
    double log_y = 0.0;  // log N(y; M m_c, (s^2 + sy^2) I) up to a shared const
    int r = 0;
    for (int i = 0; i < k; ++i) {
      if (!obs_mask[i]) continue;
      if (r >= (int)y.size())
        throw std::invalid_argument("mixture_circulant_denoiser: y too short");
      double resid = y(r) - means[c](i);
      log_y -= 0.5 * resid * resid / (data_var + sy2);
      m(i) += gain * resid;
      if (c == 0) d(i) = data_var * sy2 / (data_var + sy2);
      ++r;
    }
    if (r != (int)y.size())
      throw std::invalid_argument("mixture_circulant_denoiser: y length mismatch");
    log_ev[c] = std::log(weights[c]) + log_y;
    post_means[c] = std::move(m);
  }
  return std::make_shared<MixtureCirculantDenoiser>(
      std::move(log_ev), std::move(post_means), std::move(d), q);
}

// ---------------------------------------------------------------------------
// circulant linear denoiser and perturbation wrapper

namespace {

class CirculantDenoiser final : public Denoiser {
 public:
  explicit CirculantDenoiser(CirculantOp f) : f_(std::move(f)) {}
  int dim() const override { return f_.grid().size(); }
  VectorXd evaluate(const VectorXd& u, double) const override { return f_.apply(u); }
  VectorXd vjp(const VectorXd&, double, const VectorXd& v) const override {
    return f_.apply_adjoint(v);
  }

 private:
  CirculantOp f_;
};

class PerturbedDenoiser final : public Denoiser {
 public:
  PerturbedDenoiser(DenoiserPtr base, VectorXd gain)
      : base_(std::move(base)), gain_(std::move(gain)) {
    if (gain_.size() != base_->dim())
      throw std::invalid_argument("perturbed_denoiser: gain size mismatch");
  }
  int dim() const override { return base_->dim(); }
  VectorXd evaluate(const VectorXd& u, double t) const override {
    return gain_.cwiseProduct(base_->evaluate(u, t));
  }
  VectorXd vjp(const VectorXd& u, double t, const VectorXd& v) const override {
    return base_->vjp(u, t, gain_.cwiseProduct(v));
  }
  MatrixXd evaluate_batch(const MatrixXd& U, double t) const override {
    return gain_.asDiagonal() * base_->evaluate_batch(U, t);
  }

 private:
  DenoiserPtr base_;
  VectorXd gain_;
};

}  // namespace

DenoiserPtr circulant_denoiser(const CirculantOp& filter) {
  return std::make_shared<CirculantDenoiser>(filter);
}

DenoiserPtr perturbed_denoiser(DenoiserPtr base, const VectorXd& gain) {
  return std::make_shared<PerturbedDenoiser>(std::move(base), gain);
}

VectorXd smooth_gain_field(const Grid& grid, uint64_t seed) {
  RngStream rng(seed);
  double p1 = 2.0 * M_PI * rng.uniform(0);
  double p2 = 2.0 * M_PI * rng.uniform(1);
  VectorXd g(grid.size());
  for (int idx = 0; idx < grid.size(); ++idx) {
    Point p = grid.coords(idx);
    g(idx) = 1.0 + 0.2 * std::sin(2.0 * M_PI * p.x + p1) *
                       std::cos(2.0 * M_PI * p.y + p2);
  }
  return g;
}

// ---------------------------------------------------------------------------
// sampling plumbing

QSampler q_sampler_chol(const MatrixXd& Q) {
  auto llt = std::make_shared<Eigen::LLT<MatrixXd>>(llt_with_jitter(Q));
  int k = (int)Q.rows();
  return [llt, k](uint64_t seed) {
    RngStream rng(seed);
    VectorXd z(k);
    for (int i = 0; i < k; ++i) z(i) = rng.normal((uint64_t)i);
    return VectorXd(llt->matrixL() * z);
  };
}

QSampler q_sampler_rff(const KernelSpec& spec, int features, const Grid& grid) {
  return [spec, features, grid](uint64_t seed) {
    RffField f = rff_sample(spec, features, seed);
    Field v = rff_eval_grid(f, grid);
    return Eigen::Map<const VectorXd>(v.values.data(), (int)v.values.size()).eval();
  };
}

DataSampler data_sampler(const GaussianData& data) {
  auto llt = std::make_shared<Eigen::LLT<MatrixXd>>(llt_with_jitter(data.cov));
  VectorXd m = data.mean;
  return [llt, m](uint64_t seed) {
    RngStream rng(seed);
    VectorXd z(m.size());
    for (int i = 0; i < m.size(); ++i) z(i) = rng.normal((uint64_t)i);
    return VectorXd(m + llt->matrixL() * z);
  };
}

DataSampler data_sampler(const MixtureData& data) {
  auto llts = std::make_shared<std::vector<Eigen::LLT<MatrixXd>>>();
  for (const auto& c : data.covs) llts->push_back(llt_with_jitter(c));
  MixtureData d = data;
  return [llts, d](uint64_t seed) {
    RngStream rng(seed);
    double u = rng.uniform(0);
    size_t i = 0;
    double acc = 0.0;
    for (; i + 1 < d.weights.size(); ++i) {
      acc += d.weights[i];
      if (u < acc) break;
    }
    VectorXd z(d.means[i].size());
    for (int j = 0; j < z.size(); ++j) z(j) = rng.normal((uint64_t)j + 1);
    return VectorXd(d.means[i] + (*llts)[i].matrixL() * z);
  };
}

VectorXd forward_marginal(const VectorXd& u0, double t, const Schedule& sched,
                          const QSampler& qs, uint64_t seed) {
  if (t == 0.0) return u0;
  return u0 + sched.sigma(t) * qs(seed);
}

VectorXd forward_sde_simulate(const VectorXd& u0, double tau, int n_substeps,
                              const Schedule& sched, const MatrixXd& Q,
                              uint64_t seed) {
  if (n_substeps == 0) return u0;
  if (n_substeps < 0) throw std::invalid_argument("forward_sde_simulate: n_substeps < 0");
  Eigen::LLT<MatrixXd> llt = llt_with_jitter(Q);
  RngStream rng(seed);
  VectorXd u = u0;
  double h = tau / n_substeps;
  uint64_t ctr = 0;
  for (int s = 0; s < n_substeps; ++s) {
    double t = s * h;
    double coef = std::sqrt(2.0 * sched.sigma(t) * sched.dsigma(t) * h);
    VectorXd z(u.size());
    for (int i = 0; i < u.size(); ++i) z(i) = rng.normal(ctr++);
    VectorXd dw = llt.matrixL() * z;
    u += coef * dw;
  }
  return u;
}

VectorXd tweedie_weighted_score(const Denoiser& den, const VectorXd& u, double t) {
  if (!(t > 0.0)) throw std::invalid_argument("tweedie_weighted_score: need t > 0");
  double s2 = t * t;
  return (den.evaluate(u, t) - u) / s2;
}

VectorXd euler_step(const VectorXd& u, double t, double dt, const Denoiser& den,
                    const Schedule& sched) {
  if (dt == 0.0) return u;
  if (!(t > 0.0)) throw std::invalid_argument("euler_step: need t > 0");
  // probability-flow update toward the posterior mean; at t = dt this
  // returns the denoiser output exactly
  return u + (dt * sched.dsigma(t) / sched.sigma(t)) * (den.evaluate(u, t) - u);
}

FrameResult sample_frame(const VectorXd& noise_tau, const Schedule& sched,
                         const Denoiser& den) {
  FrameResult res;
  res.trajectory.reserve(sched.n_steps);
  VectorXd u = noise_tau;
  double d = sched.dt();
  std::vector<double> ts = sched.times();
  for (size_t i = 0; i < ts.size(); ++i) {
    VectorXd h = den.evaluate(u, ts[i]);
    res.trajectory.push_back(h);
    u = u + (d * sched.dsigma(ts[i]) / sched.sigma(ts[i])) * (h - u);
    if (!u.allFinite())
      throw std::runtime_error("sample_frame: non-finite state at step " +
                               std::to_string(i));
  }
  res.u0 = std::move(u);
  return res;
}

MatrixXd sample_ensemble(const MatrixXd& noise_tau, const Schedule& sched,
                         const Denoiser& den) {
  MatrixXd U = noise_tau;
  double d = sched.dt();
  std::vector<double> ts = sched.times();
  for (size_t i = 0; i < ts.size(); ++i) {
    MatrixXd H = den.evaluate_batch(U, ts[i]);
    double a = d * sched.dsigma(ts[i]) / sched.sigma(ts[i]);
    U = U + a * (H - U);
    if (!U.allFinite())
      throw std::runtime_error("sample_ensemble: non-finite state at step " +
                               std::to_string(i));
  }
  return U;
}

double denoising_loss(const Denoiser& den, const DataSampler& data,
                      const QSampler& qs, const Schedule& sched, int n_mc,
                      uint64_t seed) {
  if (n_mc < 1) throw std::invalid_argument("denoising_loss: n_mc < 1");
  RngStream rng(seed);
  double acc = 0.0;
  for (int i = 0; i < n_mc; ++i) {
    double t = sched.tau * rng.uniform((uint64_t)i);  // in (0, tau)
    VectorXd u0 = data(mix64(seed ^ (2ull * i + 1)));
    VectorXd ut = u0 + sched.sigma(t) * qs(mix64(seed ^ (2ull * i + 2)));
    acc += (den.evaluate(ut, t) - u0).squaredNorm();
  }
  return acc / n_mc;
}

}  // namespace wd
