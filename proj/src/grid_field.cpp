#include "wd/grid_field.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <stdexcept>

namespace wd {

Grid::Grid(int w, int h) : width(w), height(h) {
  if (w < 1 || h < 1) throw std::invalid_argument("Grid: width/height < 1");
}

Field::Field(Grid g, int c, double fill)
    : grid(g), channels(c), values((size_t)g.size() * c, fill) {
  if (c < 1) throw std::invalid_argument("Field: channels < 1");
}

Field field_new_const(const Grid& grid, int channels, double value) {
  if (!std::isfinite(value))
    throw std::invalid_argument("field_new_const: non-finite value");
  return Field(grid, channels, value);
}

bool point_in_hull(const Grid& g, Point p) {
  double gx = p.x * g.width - 0.5;
  double gy = p.y * g.height - 0.5;
  return gx >= 0.0 && gx <= g.width - 1 && gy >= 0.0 && gy <= g.height - 1;
}

void field_bilinear_sample(const Field& f, Point p, double* out) {
  const Grid& g = f.grid;
  double gx = p.x * g.width - 0.5;
  double gy = p.y * g.height - 0.5;
  if (!(gx >= 0.0 && gx <= g.width - 1 && gy >= 0.0 && gy <= g.height - 1))
    throw std::domain_error("field_bilinear_sample: point outside hull");
  int j0 = (int)std::floor(gx);
  int i0 = (int)std::floor(gy);
  if (j0 == g.width - 1) j0--;   // sample exactly on the far edge
  if (i0 == g.height - 1) i0--;
  if (g.width == 1) j0 = 0;
  if (g.height == 1) i0 = 0;
  double fx = gx - j0, fy = gy - i0;
  int j1 = (g.width == 1) ? j0 : j0 + 1;
  int i1 = (g.height == 1) ? i0 : i0 + 1;
  for (int ch = 0; ch < f.channels; ++ch) {
    double v00 = f.at(i0, j0, ch), v01 = f.at(i0, j1, ch);
    double v10 = f.at(i1, j0, ch), v11 = f.at(i1, j1, ch);
    out[ch] = (1 - fy) * ((1 - fx) * v00 + fx * v01) +
              fy * ((1 - fx) * v10 + fx * v11);
  }
}

double field_bilinear_sample1(const Field& f, Point p) {
  double v;
  if (f.channels != 1)
    throw std::invalid_argument("field_bilinear_sample1: channels != 1");
  field_bilinear_sample(f, p, &v);
  return v;
}

namespace {

void put_u32(std::ostream& os, uint32_t v) {
  unsigned char b[4] = {(unsigned char)(v & 0xff), (unsigned char)(v >> 8 & 0xff),
                        (unsigned char)(v >> 16 & 0xff), (unsigned char)(v >> 24)};
  os.write((const char*)b, 4);
}

uint32_t get_u32(std::istream& is) {
  unsigned char b[4];
  is.read((char*)b, 4);
  if (!is) throw std::runtime_error("WDTN: truncated file");
  return (uint32_t)b[0] | (uint32_t)b[1] << 8 | (uint32_t)b[2] << 16 |
         (uint32_t)b[3] << 24;
}

}  // namespace

void tensor_write(const Field& f, const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("tensor_write: cannot open " + path);
  os.write("WDTN", 4);
  put_u32(os, 1u);
  put_u32(os, (uint32_t)f.grid.height);
  put_u32(os, (uint32_t)f.grid.width);
  put_u32(os, (uint32_t)f.channels);
  // Little-endian f64; we target little-endian hosts.
  os.write((const char*)f.values.data(), (std::streamsize)(f.values.size() * 8));
  if (!os) throw std::runtime_error("tensor_write: write failed");
}

Field tensor_read(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("tensor_read: cannot open " + path);
  char magic[4];
  is.read(magic, 4);
  if (!is || std::memcmp(magic, "WDTN", 4) != 0)
    throw std::runtime_error("tensor_read: bad magic");
  uint32_t version = get_u32(is);
  if (version != 1) throw std::runtime_error("tensor_read: bad version");
  uint32_t h = get_u32(is), w = get_u32(is), c = get_u32(is);
  if (h < 1 || w < 1 || c < 1 || (uint64_t)h * w * c > (1ull << 31))
    throw std::runtime_error("tensor_read: bad dimensions");
  Field f(Grid((int)w, (int)h), (int)c);
  is.read((char*)f.values.data(), (std::streamsize)(f.values.size() * 8));
  if (!is) throw std::runtime_error("tensor_read: truncated file");
  return f;
}

void field_to_image(const Field& f, double vmin, double vmax,
                    const std::string& path) {
  if (!(vmin < vmax)) throw std::invalid_argument("field_to_image: vmin >= vmax");
  if (f.channels != 1 && f.channels != 3)
    throw std::invalid_argument("field_to_image: unsupported channel count");
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("field_to_image: cannot open " + path);
  os << (f.channels == 1 ? "P5" : "P6") << "\n"
     << f.grid.width << " " << f.grid.height << "\n255\n";
  double scale = 255.0 / (vmax - vmin);
  for (double v : f.values) {
    double s = (v - vmin) * scale;
    long q = (long)std::floor(s + 0.5);  // round half up
    if (q < 0) q = 0;
    if (q > 255) q = 255;
    os.put((char)(unsigned char)q);
  }
  if (!os) throw std::runtime_error("field_to_image: write failed");
}

}  // namespace wd
