#include "wd/bridge.hpp"

#include <cmath>
#include <stdexcept>

#include "wd/rng.hpp"

namespace wd {

double bridge_interp_1d(double a, double b, double xstar, uint64_t seed) {
  if (!(xstar >= 0.0 && xstar <= 1.0))
    throw std::invalid_argument("bridge_interp_1d: x* outside [0,1]");
  double z = RngStream(seed).normal(0);
  return (1.0 - xstar) * a + xstar * b +
         std::sqrt(2.0 * xstar * (1.0 - xstar)) * z;
}

double bridge_interp_2d(const BridgeCell& cell, double sx, double sy) {
  if (!(sx >= 0.0 && sx <= 1.0 && sy >= 0.0 && sy <= 1.0))
    throw std::invalid_argument("bridge_interp_2d: coords outside unit cell");
  RngStream rng(cell.seed);
  double sqx = std::sqrt(2.0 * sx * (1.0 - sx));
  double top = (1.0 - sx) * cell.v00 + sx * cell.v01 + sqx * rng.normal(0);
  double bot = (1.0 - sx) * cell.v10 + sx * cell.v11 + sqx * rng.normal(1);
  return (1.0 - sy) * top + sy * bot +
         std::sqrt(2.0 * sy * (1.0 - sy)) * rng.normal(2);
}

}  // namespace wd
