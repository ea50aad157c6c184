#pragma once

#include <string>
#include <vector>

#include "wd/grid_field.hpp"

namespace wd {

// One deformation T between consecutive frames, stored as per-pixel
// continuous displacements in domain units at pixel centers:
//   backward:  T^-1(x) = x + (bdx, bdy)   (where each output pixel came from)
//   forward:   T(x)    = x + (fdx, fdy)   (for warping network outputs)
// Masks flag pixels whose mapped point stays inside the hull of pixel
// centers.
struct FlowMap {
  Grid grid;
  std::vector<double> bdx, bdy;
  std::vector<uint8_t> bmask;
  std::vector<double> fdx, fdy;
  std::vector<uint8_t> fmask;

  FlowMap() = default;
  explicit FlowMap(const Grid& g)
      : grid(g),
        bdx(g.size(), 0.0), bdy(g.size(), 0.0), bmask(g.size(), 1),
        fdx(g.size(), 0.0), fdy(g.size(), 0.0), fmask(g.size(), 1) {}

  Point backward(int idx) const {
    Point p = grid.coords(idx);
    return {p.x + bdx[idx], p.y + bdy[idx]};
  }
  Point forward(int idx) const {
    Point p = grid.coords(idx);
    return {p.x + fdx[idx], p.y + fdy[idx]};
  }
};

// Ordered frame-to-frame flows (frame j-1 -> j), all on one grid.
struct FlowSequence {
  std::vector<FlowMap> maps;
};

FlowMap flow_identity(const Grid& grid);
// T(x) = x + a
FlowMap flow_translate(const Grid& grid, double ax, double ay);
// Rigid rotation about `center` by `angle` (radians).
FlowMap flow_rotate(const Grid& grid, double angle, Point center);
// Radius-preserving swirl about the domain center: rotation by
// strength * exp(-(r/0.3)^2) at radius r, so the inverse is exact.
FlowMap flow_swirl(const Grid& grid, double strength);

// Composition T = f2 o f1 (apply f1 first). Displacements of the first
// map are looked up bilinearly at the mapped position.
FlowMap flow_compose(const FlowMap& f1, const FlowMap& f2);

// Horn-Schunck variational estimator (Jacobi iterations), the classical
// stand-in for a learned flow network. Forward displacements are
// inverted by fixed point iteration.
FlowMap flow_estimate_hs(const Field& frame_prev, const Field& frame_next,
                         double alpha = 10.0, int iters = 200);

// "WDFL" binary format (f32 displacements + masks, both directions).
void flow_write(const FlowMap& f, const std::string& path);
FlowMap flow_read(const std::string& path);

}  // namespace wd
