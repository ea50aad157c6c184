#include "wd/guidance.hpp"

#include <cmath>
#include <cstdio>
#include <stdexcept>

#include "wd/rng.hpp"

namespace wd {

using Eigen::VectorXd;

namespace {

struct Corners {
  int i0, j0, i1, j1;
  double fx, fy;
};

// mirrors field_bilinear_sample's corner selection so the adjoint is exact
bool corners_at(const Grid& g, Point p, Corners& c) {
  double gx = p.x * g.width - 0.5;
  double gy = p.y * g.height - 0.5;
  if (!(gx >= 0.0 && gx <= g.width - 1 && gy >= 0.0 && gy <= g.height - 1))
    return false;
  c.j0 = (int)std::floor(gx);
  c.i0 = (int)std::floor(gy);
  if (c.j0 == g.width - 1) c.j0--;
  if (c.i0 == g.height - 1) c.i0--;
  if (g.width == 1) c.j0 = 0;
  if (g.height == 1) c.i0 = 0;
  c.fx = gx - c.j0;
  c.fy = gy - c.i0;
  c.j1 = (g.width == 1) ? c.j0 : c.j0 + 1;
  c.i1 = (g.height == 1) ? c.i0 : c.i0 + 1;
  return true;
}

Field to_field(const Grid& g, const VectorXd& v) {
  Field f(g, 1);
  for (int i = 0; i < g.size(); ++i) f.values[i] = v(i);
  return f;
}

VectorXd to_vector(const Field& f) {
  return Eigen::Map<const VectorXd>(f.values.data(), (int)f.values.size());
}

}  // namespace

WarpResidual warping_residual(const Field& h_curr, const Field& h_prev,
                              const FlowMap& flow) {
  if (!(h_curr.grid == h_prev.grid) || !(h_curr.grid == flow.grid) ||
      h_curr.channels != 1 || h_prev.channels != 1)
    throw std::invalid_argument("warping_residual: need matching c=1 fields");
  const Grid& g = flow.grid;
  WarpResidual wr;
  wr.residual = Field(g, 1);
  wr.mask.assign(g.size(), 0);
  double acc = 0.0;
  for (int idx = 0; idx < g.size(); ++idx) {
    Corners c;
    if (!flow.fmask[idx] || !corners_at(g, flow.forward(idx), c)) continue;
    double warped = (1 - c.fy) * ((1 - c.fx) * h_curr.at(c.i0, c.j0) +
                                  c.fx * h_curr.at(c.i0, c.j1)) +
                    c.fy * ((1 - c.fx) * h_curr.at(c.i1, c.j0) +
                            c.fx * h_curr.at(c.i1, c.j1));
    double r = warped - h_prev.values[idx];
    wr.residual.values[idx] = r;
    wr.mask[idx] = 1;
    wr.mask_count++;
    acc += r * r;
  }
  wr.e = wr.mask_count > 0 ? acc / wr.mask_count : 0.0;
  return wr;
}

Field warp_adjoint(const Field& v, const std::vector<uint8_t>& mask,
                   const FlowMap& flow) {
  if (!(v.grid == flow.grid) || v.channels != 1 ||
      (int)mask.size() != v.grid.size())
    throw std::invalid_argument("warp_adjoint: shape mismatch");
  const Grid& g = flow.grid;
  Field out = field_new_const(g, 1, 0.0);
  for (int idx = 0; idx < g.size(); ++idx) {
    if (!mask[idx]) continue;
    Corners c;
    if (!corners_at(g, flow.forward(idx), c)) continue;
    double val = v.values[idx];
    out.at(c.i0, c.j0) += (1 - c.fy) * (1 - c.fx) * val;
    out.at(c.i0, c.j1) += (1 - c.fy) * c.fx * val;
    out.at(c.i1, c.j0) += c.fy * (1 - c.fx) * val;
    out.at(c.i1, c.j1) += c.fy * c.fx * val;
  }
  return out;
}

VectorXd guidance_gradient(const Denoiser& den, const VectorXd& u_t, double t,
                           const WarpResidual& wr, const FlowMap& flow) {
  if (wr.mask_count == 0)
    throw std::invalid_argument("guidance_gradient: empty mask");
  Field scaled = wr.residual;
  double coef = 2.0 / wr.mask_count;
  for (auto& x : scaled.values) x *= coef;
  Field adj = warp_adjoint(scaled, wr.mask, flow);
  return den.vjp(u_t, t, to_vector(adj));
}

VideoResult sample_video(const Grid& grid, const FlowSequence& flows,
                         const std::vector<DenoiserPtr>& denoisers,
                         const VideoParams& p) {
  const int n_frames = (int)flows.maps.size() + 1;
  if (denoisers.empty() ||
      ((int)denoisers.size() != 1 && (int)denoisers.size() != n_frames))
    throw std::invalid_argument("sample_video: need 1 or n_frames denoisers");
  for (const auto& f : flows.maps)
    if (!(f.grid == grid))
      throw std::invalid_argument("sample_video: flow grid mismatch");
  for (const auto& d : denoisers)
    if (d->dim() != grid.size())
      throw std::invalid_argument("sample_video: denoiser dim mismatch");
  auto den_for = [&](int j) -> const Denoiser& {
    return denoisers.size() == 1 ? *denoisers[0] : *denoisers[j];
  };

  const Schedule& sched = p.schedule;
  std::vector<double> ts = sched.times();
  double d = sched.dt();
  double sig_tau = sched.sigma(sched.tau);

  VideoResult res;
  res.frames.reserve(n_frames);

  // function-space noise for the GP scheme; grid noise otherwise
  RffField rff;
  FlowMap cum = flow_identity(grid);
  Field noise(grid, 1);
  bool gp_scheme = (p.scheme == WarpScheme::Gp) && !p.no_warp;
  if (gp_scheme) {
    rff = rff_sample(p.sampler.spec, p.sampler.features, p.seed);
    noise = warp_gp(rff, cum);
  } else {
    noise = warp_resample(grid, p.sampler, p.seed);
  }

  std::vector<VectorXd> prev_traj;
  for (int j = 0; j < n_frames; ++j) {
    if (j > 0) {
      const FlowMap& fl = flows.maps[j - 1];
      if (p.no_warp || p.scheme == WarpScheme::Resample) {
        noise = warp_resample(grid, p.sampler, mix64(p.seed ^ (0x5eedull + j)));
      } else
        switch (p.scheme) {
          case WarpScheme::Fixed:
            noise = warp_fixed(noise, fl);
            break;
          case WarpScheme::Nearest:
            noise = warp_nearest(noise, fl, mix64(p.seed ^ (0xf111ull * j)));
            break;
          case WarpScheme::Bilinear:
            noise = warp_bilinear(noise, fl, mix64(p.seed ^ (0xf111ull * j)));
            break;
          case WarpScheme::Bridge:
            noise = warp_bridge(noise, fl, mix64(p.seed ^ (0xf111ull * j)));
            break;
          case WarpScheme::Gp:
            cum = flow_compose(cum, fl);
            noise = warp_gp(rff, cum);
            break;
          default:
            break;
        }
    }

    const Denoiser& den = den_for(j);
    VectorXd u = sig_tau * to_vector(noise);
    std::vector<VectorXd> traj;
    traj.reserve(ts.size());
    for (size_t i = 0; i < ts.size(); ++i) {
      double t = ts[i];
      VectorXd h = den.evaluate(u, t);
      StepLog log{j, (int)i, t, 0.0, 0.0, true};
      VectorXd u_next = u + (d * sched.dsigma(t) / sched.sigma(t)) * (h - u);
      if (j > 0) {
        Field hf = to_field(grid, h);
        Field pf = to_field(grid, prev_traj[i]);
        WarpResidual wr = warping_residual(hf, pf, flows.maps[j - 1]);
        log.e = wr.e;
        if (p.lambda > 0.0 && wr.mask_count > 0 && wr.e >= p.guard) {
          VectorXd grad =
              guidance_gradient(den, u, t, wr, flows.maps[j - 1]);
          log.grad_norm = grad.norm();
          log.skipped = false;
          // The guided step is lambda / sqrt(E) * dE/du with E the *sum* of
          // squared residuals (E = e * mask_count, dE/du = mask_count * grad).
          // This makes the step scale-invariant in the resolution: sqrt(E)
          // normalizes dE/du to a fixed-norm direction.
          u_next -= p.lambda * std::sqrt(wr.mask_count / wr.e) * grad;
        }
      }
      res.log.push_back(log);
      traj.push_back(std::move(h));
      u = std::move(u_next);
      if (!u.allFinite())
        throw std::runtime_error("sample_video: non-finite state, frame " +
                                 std::to_string(j) + " step " + std::to_string(i));
    }
    res.frames.push_back(to_field(grid, u));
    prev_traj = std::move(traj);
  }
  return res;
}

void write_step_log_csv(const std::vector<StepLog>& log, const std::string& path) {
  std::FILE* fp = std::fopen(path.c_str(), "w");
  if (!fp) throw std::runtime_error("write_step_log_csv: cannot open " + path);
  std::fputs("frame,step,t,e,grad_norm,skipped\n", fp);
  for (const auto& l : log)
    std::fprintf(fp, "%d,%d,%.17g,%.17g,%.17g,%d\n", l.frame, l.step, l.t, l.e,
                 l.grad_norm, l.skipped ? 1 : 0);
  std::fclose(fp);
}

}  // namespace wd
