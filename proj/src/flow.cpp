#include "wd/flow.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <stdexcept>

namespace wd {

namespace {

struct DispSample {
  double dx, dy;
  bool masked_in;
};

// Bilinear lookup of a displacement field with clamping; masked_in is
// true only when every contributing pixel is masked in.
DispSample sample_disp(const Grid& g, const std::vector<double>& dx,
                       const std::vector<double>& dy,
                       const std::vector<uint8_t>& mask, Point p) {
  double gx = p.x * g.width - 0.5;
  double gy = p.y * g.height - 0.5;
  gx = std::min(std::max(gx, 0.0), (double)(g.width - 1));
  gy = std::min(std::max(gy, 0.0), (double)(g.height - 1));
  int j0 = std::min((int)gx, g.width - 2 < 0 ? 0 : g.width - 2);
  int i0 = std::min((int)gy, g.height - 2 < 0 ? 0 : g.height - 2);
  int j1 = std::min(j0 + 1, g.width - 1);
  int i1 = std::min(i0 + 1, g.height - 1);
  double fx = gx - j0, fy = gy - i0;
  int a = g.index(i0, j0), b = g.index(i0, j1), c = g.index(i1, j0),
      d = g.index(i1, j1);
  DispSample out;
  out.dx = (1 - fy) * ((1 - fx) * dx[a] + fx * dx[b]) +
           fy * ((1 - fx) * dx[c] + fx * dx[d]);
  out.dy = (1 - fy) * ((1 - fx) * dy[a] + fx * dy[b]) +
           fy * ((1 - fx) * dy[c] + fx * dy[d]);
  out.masked_in = true;
  if ((1 - fx) * (1 - fy) > 0 && !mask[a]) out.masked_in = false;
  if (fx * (1 - fy) > 0 && !mask[b]) out.masked_in = false;
  if ((1 - fx) * fy > 0 && !mask[c]) out.masked_in = false;
  if (fx * fy > 0 && !mask[d]) out.masked_in = false;
  return out;
}

void require_finite(double v, const char* what) {
  if (!std::isfinite(v)) throw std::invalid_argument(std::string(what) + ": non-finite parameter");
}

}  // namespace

FlowMap flow_identity(const Grid& grid) { return FlowMap(grid); }

FlowMap flow_translate(const Grid& grid, double ax, double ay) {
  require_finite(ax, "flow_translate");
  require_finite(ay, "flow_translate");
  FlowMap f(grid);
  for (int idx = 0; idx < grid.size(); ++idx) {
    Point p = grid.coords(idx);
    f.bdx[idx] = -ax;
    f.bdy[idx] = -ay;
    f.bmask[idx] = point_in_hull(grid, {p.x - ax, p.y - ay});
    f.fdx[idx] = ax;
    f.fdy[idx] = ay;
    f.fmask[idx] = point_in_hull(grid, {p.x + ax, p.y + ay});
  }
  return f;
}

FlowMap flow_rotate(const Grid& grid, double angle, Point center) {
  require_finite(angle, "flow_rotate");
  FlowMap f(grid);
  double c = std::cos(angle), s = std::sin(angle);
  for (int idx = 0; idx < grid.size(); ++idx) {
    Point p = grid.coords(idx);
    double rx = p.x - center.x, ry = p.y - center.y;
    // forward: rotate by +angle; backward: by -angle
    Point fw = {center.x + c * rx - s * ry, center.y + s * rx + c * ry};
    Point bw = {center.x + c * rx + s * ry, center.y - s * rx + c * ry};
    f.fdx[idx] = fw.x - p.x;
    f.fdy[idx] = fw.y - p.y;
    f.fmask[idx] = point_in_hull(grid, fw);
    f.bdx[idx] = bw.x - p.x;
    f.bdy[idx] = bw.y - p.y;
    f.bmask[idx] = point_in_hull(grid, bw);
  }
  return f;
}

FlowMap flow_swirl(const Grid& grid, double strength) {
  require_finite(strength, "flow_swirl");
  FlowMap f(grid);
  Point center{0.5, 0.5};
  for (int idx = 0; idx < grid.size(); ++idx) {
    Point p = grid.coords(idx);
    double rx = p.x - center.x, ry = p.y - center.y;
    double r2 = rx * rx + ry * ry;
    double ang = strength * std::exp(-r2 / (0.3 * 0.3));
    double c = std::cos(ang), s = std::sin(ang);
    Point fw = {center.x + c * rx - s * ry, center.y + s * rx + c * ry};
    Point bw = {center.x + c * rx + s * ry, center.y - s * rx + c * ry};
    f.fdx[idx] = fw.x - p.x;
    f.fdy[idx] = fw.y - p.y;
    f.fmask[idx] = point_in_hull(grid, fw);
    f.bdx[idx] = bw.x - p.x;
    f.bdy[idx] = bw.y - p.y;
    f.bmask[idx] = point_in_hull(grid, bw);
  }
  return f;
}

FlowMap flow_compose(const FlowMap& f1, const FlowMap& f2) {
  if (!(f1.grid == f2.grid))
    throw std::invalid_argument("flow_compose: grid mismatch");
  const Grid& g = f1.grid;
  FlowMap out(g);
  for (int idx = 0; idx < g.size(); ++idx) {
    Point x = g.coords(idx);
    // backward of (f2 o f1): first undo f2, then undo f1
    {
      Point p = {x.x + f2.bdx[idx], x.y + f2.bdy[idx]};
      bool in = point_in_hull(g, p);
      DispSample d1 = sample_disp(g, f1.bdx, f1.bdy, f1.bmask, p);
      out.bdx[idx] = p.x + d1.dx - x.x;
      out.bdy[idx] = p.y + d1.dy - x.y;
      out.bmask[idx] = f2.bmask[idx] && in && d1.masked_in;
    }
    // forward: apply f1, then f2
    {
      Point q = {x.x + f1.fdx[idx], x.y + f1.fdy[idx]};
      bool in = point_in_hull(g, q);
      DispSample d2 = sample_disp(g, f2.fdx, f2.fdy, f2.fmask, q);
      out.fdx[idx] = q.x + d2.dx - x.x;
      out.fdy[idx] = q.y + d2.dy - x.y;
      out.fmask[idx] = f1.fmask[idx] && in && d2.masked_in;
    }
  }
  return out;
}

FlowMap flow_estimate_hs(const Field& frame_prev, const Field& frame_next,
                         double alpha, int iters) {
  if (!(frame_prev.grid == frame_next.grid) || frame_prev.channels != 1 ||
      frame_next.channels != 1)
    throw std::invalid_argument("flow_estimate_hs: need matching c=1 fields");
  const Grid& g = frame_prev.grid;
  const int w = g.width, h = g.height, k = g.size();
  std::vector<double> Ix(k), Iy(k), It(k), u(k, 0.0), v(k, 0.0);
  auto at = [&](const Field& f, int i, int j) {
    i = std::min(std::max(i, 0), h - 1);
    j = std::min(std::max(j, 0), w - 1);
    return f.at(i, j);
  };
  for (int i = 0; i < h; ++i)
    for (int j = 0; j < w; ++j) {
      int idx = g.index(i, j);
      // averaged central differences over the two frames, pixel units
      Ix[idx] = 0.25 * (at(frame_prev, i, j + 1) - at(frame_prev, i, j - 1) +
                        at(frame_next, i, j + 1) - at(frame_next, i, j - 1));
      Iy[idx] = 0.25 * (at(frame_prev, i + 1, j) - at(frame_prev, i - 1, j) +
                        at(frame_next, i + 1, j) - at(frame_next, i - 1, j));
      It[idx] = frame_next.at(i, j) - frame_prev.at(i, j);
    }
  std::vector<double> un(k), vn(k);
  double a2 = alpha * alpha;
  for (int it = 0; it < iters; ++it) {
    for (int i = 0; i < h; ++i)
      for (int j = 0; j < w; ++j) {
        int idx = g.index(i, j);
        auto nb = [&](const std::vector<double>& f, int ii, int jj) {
          ii = std::min(std::max(ii, 0), h - 1);
          jj = std::min(std::max(jj, 0), w - 1);
          return f[g.index(ii, jj)];
        };
        double ub = 0.25 * (nb(u, i - 1, j) + nb(u, i + 1, j) +
                            nb(u, i, j - 1) + nb(u, i, j + 1));
        double vb = 0.25 * (nb(v, i - 1, j) + nb(v, i + 1, j) +
                            nb(v, i, j - 1) + nb(v, i, j + 1));
        double num = Ix[idx] * ub + Iy[idx] * vb + It[idx];
        double den = a2 + Ix[idx] * Ix[idx] + Iy[idx] * Iy[idx];
        un[idx] = ub - Ix[idx] * num / den;
        vn[idx] = vb - Iy[idx] * num / den;
      }
    u.swap(un);
    v.swap(vn);
  }
  FlowMap f(g);
  // forward displacement in domain units
  for (int idx = 0; idx < k; ++idx) {
    f.fdx[idx] = u[idx] / w;
    f.fdy[idx] = v[idx] / h;
    Point p = g.coords(idx);
    f.fmask[idx] = point_in_hull(g, {p.x + f.fdx[idx], p.y + f.fdy[idx]});
  }
  // backward via fixed point: T^-1(x) = x - d(T^-1(x))
  for (int idx = 0; idx < k; ++idx) {
    Point x = g.coords(idx);
    Point p = x;
    for (int it = 0; it < 8; ++it) {
      DispSample d = sample_disp(g, f.fdx, f.fdy, f.fmask, p);
      p = {x.x - d.dx, x.y - d.dy};
    }
    f.bdx[idx] = p.x - x.x;
    f.bdy[idx] = p.y - x.y;
    f.bmask[idx] = point_in_hull(g, p);
  }
  return f;
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
  if (!is) throw std::runtime_error("WDFL: truncated file");
  return (uint32_t)b[0] | (uint32_t)b[1] << 8 | (uint32_t)b[2] << 16 |
         (uint32_t)b[3] << 24;
}

void put_dir(std::ostream& os, const std::vector<double>& dx,
             const std::vector<double>& dy, const std::vector<uint8_t>& mask) {
  for (size_t i = 0; i < dx.size(); ++i) {
    float fx = (float)dx[i], fy = (float)dy[i];
    os.write((const char*)&fx, 4);
    os.write((const char*)&fy, 4);
  }
  os.write((const char*)mask.data(), (std::streamsize)mask.size());
}

void get_dir(std::istream& is, std::vector<double>& dx, std::vector<double>& dy,
             std::vector<uint8_t>& mask) {
  for (size_t i = 0; i < dx.size(); ++i) {
    float fx, fy;
    is.read((char*)&fx, 4);
    is.read((char*)&fy, 4);
    dx[i] = fx;
    dy[i] = fy;
  }
  is.read((char*)mask.data(), (std::streamsize)mask.size());
  if (!is) throw std::runtime_error("WDFL: truncated file");
}

}  // namespace

void flow_write(const FlowMap& f, const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("flow_write: cannot open " + path);
  os.write("WDFL", 4);
  put_u32(os, 1u);
  put_u32(os, (uint32_t)f.grid.height);
  put_u32(os, (uint32_t)f.grid.width);
  put_dir(os, f.bdx, f.bdy, f.bmask);
  put_dir(os, f.fdx, f.fdy, f.fmask);
  if (!os) throw std::runtime_error("flow_write: write failed");
}

FlowMap flow_read(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("flow_read: cannot open " + path);
  char magic[4];
  is.read(magic, 4);
  if (!is || std::memcmp(magic, "WDFL", 4) != 0)
    throw std::runtime_error("flow_read: bad magic");
  if (get_u32(is) != 1) throw std::runtime_error("flow_read: bad version");
  uint32_t h = get_u32(is), w = get_u32(is);
  if (h < 1 || w < 1 || (uint64_t)h * w > (1ull << 30))
    throw std::runtime_error("flow_read: bad dimensions");
  FlowMap f(Grid((int)w, (int)h));
  get_dir(is, f.bdx, f.bdy, f.bmask);
  get_dir(is, f.fdx, f.fdy, f.fmask);
  return f;
}

}  // namespace wd
