#pragma once

#include <string>
#include <vector>

#include "wd/diffusion.hpp"
#include "wd/flow.hpp"
#include "wd/warp.hpp"

namespace wd {

// Mismatch between the current frame's denoiser output warped onto the
// previous frame and the previous frame's stored output, on pixels whose
// forward-mapped point stays in frame.
struct WarpResidual {
  double e = 0.0;  // mean squared residual over the mask
  Field residual;  // zero outside the mask
  std::vector<uint8_t> mask;
  int mask_count = 0;
};

WarpResidual warping_residual(const Field& h_curr, const Field& h_prev,
                              const FlowMap& flow);

// Adjoint of the masked bilinear-warp operator: scatters each masked
// pixel's value onto the four interpolation corners with its weights.
Field warp_adjoint(const Field& v, const std::vector<uint8_t>& mask,
                   const FlowMap& flow);

// gradient of e with respect to u_t through the denoiser:
// vjp(u_t, t, W^T (2/|mask|) residual)
Eigen::VectorXd guidance_gradient(const Denoiser& den, const Eigen::VectorXd& u_t,
                                  double t, const WarpResidual& wr,
                                  const FlowMap& flow);

struct StepLog {
  int frame = 0;
  int step = 0;
  double t = 0.0;
  double e = 0.0;
  double grad_norm = 0.0;
  bool skipped = true;
};

struct VideoParams {
  Schedule schedule{10.0, 50};
  double lambda = 1.0;   // guidance strength
  double guard = 1e-12;  // skip guidance when e falls below this
  WarpScheme scheme = WarpScheme::Gp;
  NoiseSampler sampler;
  uint64_t seed = 0;
  bool no_warp = false;  // ablation: fresh noise every frame
};

struct VideoResult {
  std::vector<Field> frames;
  std::vector<StepLog> log;
};

// Full multi-frame rollout: frame 0 plain, each later frame started from
// scheme-warped noise with per-step self-guidance against the previous
// frame's retained denoiser trajectory. `denoisers` holds either one
// shared model or one per frame.
VideoResult sample_video(const Grid& grid, const FlowSequence& flows,
                         const std::vector<DenoiserPtr>& denoisers,
                         const VideoParams& params);

void write_step_log_csv(const std::vector<StepLog>& log, const std::string& path);

}  // namespace wd
