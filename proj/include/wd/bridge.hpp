#pragma once

#include <cstdint>

namespace wd {

// Brownian-bridge stochastic interpolation between standard-normal nodal
// values: the "warp your noise" baseline scheme. Endpoint values are
// reproduced exactly; marginals stay N(0,1) but the conditional given the
// endpoints does not.

// xi(x*) = (1-x*) a + x* b + sqrt(2 x* (1-x*)) z, z ~ N(0,1) from seed.
double bridge_interp_1d(double a, double b, double xstar, uint64_t seed);

struct BridgeCell {
  // corner values: v00 top-left, v01 top-right, v10 bottom-left, v11
  // bottom-right (matching the row-major grid convention)
  double v00, v01, v10, v11;
  uint64_t seed;
};

// Tensor-product bridge: 1D bridge along x on the top and bottom edges
// with independent noise, then a bridge along y between the two results.
// (sx, sy) are fractional coordinates in the unit cell.
double bridge_interp_2d(const BridgeCell& cell, double sx, double sy);

}  // namespace wd
