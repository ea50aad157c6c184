#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace wd {

struct Point {
  double x = 0.0;
  double y = 0.0;
};

// Evaluation lattice on the unit square. Pixel centers sit at
// half-integer offsets: coords(i,j) = ((j+0.5)/width, (i+0.5)/height),
// enumerated row-major with a top-left origin.
struct Grid {
  int width = 1;
  int height = 1;

  Grid() = default;
  Grid(int w, int h);

  int size() const { return width * height; }
  int index(int i, int j) const { return i * width + j; }
  Point coords(int i, int j) const {
    return {(j + 0.5) / width, (i + 0.5) / height};
  }
  Point coords(int idx) const { return coords(idx / width, idx % width); }

  bool operator==(const Grid& o) const {
    return width == o.width && height == o.height;
  }
};

// Multi-channel scalar field sampled on a grid. Storage is row-major,
// channel-minor. Immutable by convention once built.
struct Field {
  Grid grid;
  int channels = 1;
  std::vector<double> values;

  Field() = default;
  Field(Grid g, int c, double fill = 0.0);

  double& at(int i, int j, int ch = 0) {
    return values[(size_t)(grid.index(i, j)) * channels + ch];
  }
  double at(int i, int j, int ch = 0) const {
    return values[(size_t)(grid.index(i, j)) * channels + ch];
  }
};

Field field_new_const(const Grid& grid, int channels, double value);

// Bilinear blend of the four surrounding pixel centers; exact at the
// centers. Points outside the convex hull of the centers are an error
// (out-of-frame handling belongs to FlowMap masks).
void field_bilinear_sample(const Field& f, Point p, double* out);
double field_bilinear_sample1(const Field& f, Point p);
bool point_in_hull(const Grid& g, Point p);

// "WDTN" binary tensor format; round trips are bit exact.
void tensor_write(const Field& f, const std::string& path);
Field tensor_read(const std::string& path);

// Linear [vmin,vmax] -> [0,255] with clamping, round half up.
// c=1 writes PGM (P5), c=3 writes PPM (P6).
void field_to_image(const Field& f, double vmin, double vmax,
                    const std::string& path);

}  // namespace wd
