#include "wd/warp.hpp"

#include <cmath>
#include <cstring>
#include <stdexcept>

#include "wd/bridge.hpp"
#include "wd/rng.hpp"

namespace wd {

namespace {

void check_noise_field(const Field& f, const FlowMap& flow, const char* op) {
  if (f.channels != 1 || !(f.grid == flow.grid))
    throw std::invalid_argument(std::string(op) + ": need c=1 field on the flow grid");
}

double refill_draw(uint64_t seed, int idx) {
  return RngStream(seed, /*stream=*/0x7eful).normal((uint64_t)idx);
}

}  // namespace

Field warp_fixed(const Field& noise_prev, const FlowMap& flow) {
  check_noise_field(noise_prev, flow, "warp_fixed");
  return noise_prev;
}

Field warp_resample(const Grid& grid, const NoiseSampler& sampler,
                    uint64_t seed) {
  if (sampler.kind == NoiseKind::White) {
    Field f(grid, 1);
    RngStream rng(seed);
    for (int idx = 0; idx < grid.size(); ++idx)
      f.values[idx] = rng.normal((uint64_t)idx);
    return f;
  }
  RffField rf = rff_sample(sampler.spec, sampler.features, seed);
  return rff_eval_grid(rf, grid);
}

Field warp_nearest(const Field& noise_prev, const FlowMap& flow,
                   uint64_t refill_seed) {
  check_noise_field(noise_prev, flow, "warp_nearest");
  const Grid& g = flow.grid;
  Field out(g, 1);
  for (int idx = 0; idx < g.size(); ++idx) {
    if (!flow.bmask[idx]) {
      out.values[idx] = refill_draw(refill_seed, idx);
      continue;
    }
    Point p = flow.backward(idx);
    double gx = p.x * g.width - 0.5;
    double gy = p.y * g.height - 0.5;
    // tie-break at exact half-pixel: lower index
    int j = (int)std::ceil(gx - 0.5);
    int i = (int)std::ceil(gy - 0.5);
    j = std::min(std::max(j, 0), g.width - 1);
    i = std::min(std::max(i, 0), g.height - 1);
    out.values[idx] = noise_prev.at(i, j);
  }
  return out;
}

Field warp_bilinear(const Field& noise_prev, const FlowMap& flow,
                    uint64_t refill_seed) {
  check_noise_field(noise_prev, flow, "warp_bilinear");
  const Grid& g = flow.grid;
  Field out(g, 1);
  for (int idx = 0; idx < g.size(); ++idx) {
    if (!flow.bmask[idx]) {
      out.values[idx] = refill_draw(refill_seed, idx);
      continue;
    }
    // no variance renormalization at subpixel offsets; this is the
    // baseline's documented flaw
    out.values[idx] = field_bilinear_sample1(noise_prev, flow.backward(idx));
  }
  return out;
}

Field warp_bridge(const Field& noise_prev, const FlowMap& flow,
                  uint64_t refill_seed) {
  check_noise_field(noise_prev, flow, "warp_bridge");
  const Grid& g = flow.grid;
  Field out(g, 1);
  for (int idx = 0; idx < g.size(); ++idx) {
    if (!flow.bmask[idx]) {
      out.values[idx] = refill_draw(refill_seed, idx);
      continue;
    }
    Point p = flow.backward(idx);
    double gx = p.x * g.width - 0.5;
    double gy = p.y * g.height - 0.5;
    int j0 = std::min(std::max((int)std::floor(gx), 0),
                      g.width >= 2 ? g.width - 2 : 0);
    int i0 = std::min(std::max((int)std::floor(gy), 0),
                      g.height >= 2 ? g.height - 2 : 0);
    int j1 = std::min(j0 + 1, g.width - 1);
    int i1 = std::min(i0 + 1, g.height - 1);
    double sx = gx - j0, sy = gy - i0;
    BridgeCell cell;
    cell.v00 = noise_prev.at(i0, j0);
    cell.v01 = noise_prev.at(i0, j1);
    cell.v10 = noise_prev.at(i1, j0);
    cell.v11 = noise_prev.at(i1, j1);
    // fresh z per query point: seed from (cell id, fractional coords)
    uint64_t fx_bits, fy_bits;
    static_assert(sizeof(double) == 8);
    std::memcpy(&fx_bits, &sx, 8);
    std::memcpy(&fy_bits, &sy, 8);
    cell.seed = mix64(refill_seed ^ mix64((uint64_t)g.index(i0, j0) + 1) ^
                      mix64(fx_bits ^ mix64(fy_bits)));
    out.values[idx] = bridge_interp_2d(cell, sx, sy);
  }
  return out;
}

Field warp_gp(const RffField& field_prev, const FlowMap& cumulative_flow) {
  const Grid& g = cumulative_flow.grid;
  Field out(g, 1);
  for (int idx = 0; idx < g.size(); ++idx)
    out.values[idx] = rff_eval(field_prev, cumulative_flow.backward(idx));
  return out;
}

}  // namespace wd
