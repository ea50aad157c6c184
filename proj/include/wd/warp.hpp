#pragma once

#include <cstdint>

#include "wd/flow.hpp"
#include "wd/grid_field.hpp"
#include "wd/kernels_gp.hpp"

namespace wd {

// Noise-warping schemes: produce frame-j input noise from frame-(j-1)
// noise under a flow. Out-of-frame pixels (mask off) are refilled with
// fresh seeded draws; the GP scheme needs no refill since the RFF field
// is defined on the whole plane.

enum class NoiseKind { White, Gp };

struct NoiseSampler {
  NoiseKind kind = NoiseKind::White;
  KernelSpec spec;    // used when kind == Gp
  int features = 3000;
};

enum class WarpScheme { Fixed, Resample, Nearest, Bilinear, Bridge, Gp };

Field warp_fixed(const Field& noise_prev, const FlowMap& flow);
Field warp_resample(const Grid& grid, const NoiseSampler& sampler,
                    uint64_t seed);
Field warp_nearest(const Field& noise_prev, const FlowMap& flow,
                   uint64_t refill_seed);
Field warp_bilinear(const Field& noise_prev, const FlowMap& flow,
                    uint64_t refill_seed);
Field warp_bridge(const Field& noise_prev, const FlowMap& flow,
                  uint64_t refill_seed);

// Exact function-space warping: evaluate the RFF noise function at the
// cumulative preimage of each pixel center (flow composed back to frame
// 0), with no interpolation and no refill.
Field warp_gp(const RffField& field_prev, const FlowMap& cumulative_flow);

}  // namespace wd
