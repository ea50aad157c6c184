#include "wd/kernels_gp.hpp"

#include <cstring>
#include <fstream>
#include <stdexcept>
#include <thread>

#include "rff_kernel_impl.hpp"

namespace wd {

Eigen::MatrixXd kernel_matrix(const KernelSpec& spec,
                              const std::vector<Point>& X,
                              const std::vector<Point>& Y) {
  Eigen::MatrixXd m((Eigen::Index)X.size(), (Eigen::Index)Y.size());
  for (size_t i = 0; i < X.size(); ++i)
    for (size_t j = 0; j < Y.size(); ++j)
      m((Eigen::Index)i, (Eigen::Index)j) = spec(X[i], Y[j]);
  return m;
}

namespace {

// Cholesky with jitter escalation; squared-exponential kernel matrices
// are notoriously ill-conditioned.
Eigen::LLT<Eigen::MatrixXd> chol_with_jitter(Eigen::MatrixXd Q, double jitter) {
  const double max_jitter = 1e-6;
  for (double j = jitter; j <= max_jitter * 1.0001; j *= 10.0) {
    Eigen::MatrixXd A = Q;
    A.diagonal().array() += j;
    Eigen::LLT<Eigen::MatrixXd> llt(A);
    if (llt.info() == Eigen::Success) return llt;
  }
  throw std::runtime_error("chol_with_jitter: factorization failed");
}

}  // namespace

Eigen::VectorXd gp_sample_exact(const KernelSpec& spec,
                                const std::vector<Point>& X, uint64_t seed,
                                double jitter) {
  if (X.size() > 16384)
    throw std::invalid_argument("gp_sample_exact: |X| > 16384");
  auto llt = chol_with_jitter(kernel_matrix(spec, X, X), jitter);
  RngStream rng(seed);
  Eigen::VectorXd z((Eigen::Index)X.size());
  for (Eigen::Index i = 0; i < z.size(); ++i) z(i) = rng.normal((uint64_t)i);
  return llt.matrixL() * z;
}

GaussianConditional gp_condition(const KernelSpec& spec,
                                 const std::vector<Point>& X,
                                 const Eigen::VectorXd& valuesX,
                                 const std::vector<Point>& Y,
                                 double jitter) {
  GaussianConditional out;
  Eigen::MatrixXd Qyy = kernel_matrix(spec, Y, Y);
  if (X.empty()) {
    out.mean = Eigen::VectorXd::Zero((Eigen::Index)Y.size());
    out.cov = Qyy;
    return out;
  }
  if ((size_t)valuesX.size() != X.size())
    throw std::invalid_argument("gp_condition: values/points size mismatch");
  auto llt = chol_with_jitter(kernel_matrix(spec, X, X), jitter);
  Eigen::MatrixXd Qyx = kernel_matrix(spec, Y, X);
  Eigen::MatrixXd solved = llt.solve(Qyx.transpose());  // Q(X,X)^-1 Q(X,Y)
  out.mean = Qyx * llt.solve(valuesX);
  out.cov = Qyy - Qyx * solved;
  return out;
}

RffField rff_sample(const KernelSpec& spec, int features, uint64_t seed) {
  if (features < 1) throw std::invalid_argument("rff_sample: J < 1");
  RffField f;
  f.spec = spec;
  f.seed = seed;
  f.w.resize(features);
  f.zx.resize(features);
  f.zy.resize(features);
  f.b.resize(features);
  RngStream rng(seed);
  RngStream rw = rng.substream(0);
  RngStream rb = rng.substream(1);
  RngStream rz = rng.substream(2);
  const double inv_eps = 1.0 / spec.length_scale;
  const double bound = spec.truncation_mult * inv_eps;
  const double two_pi = 6.283185307179586476925286766559;
  auto truncated = [&](uint64_t base) {
    // per-component rejection at truncation_mult standard deviations
    for (uint64_t a = 0;; ++a) {
      double v = inv_eps * rz.normal(base + a);
      if (std::abs(v) <= bound) return v;
    }
  };
  for (int j = 0; j < features; ++j) {
    f.w[j] = rw.normal((uint64_t)j);
    f.b[j] = two_pi * rb.uniform((uint64_t)j);
    f.zx[j] = truncated((uint64_t)j * 256);
    f.zy[j] = truncated((uint64_t)j * 256 + 128);
  }
  return f;
}

namespace {

detail::RffAccumFn select_accum() {
#ifdef WD_BUILD_AVX2
  if (detail::rff_avx2_supported()) return &detail::rff_accum_avx2;
#endif
#ifdef WD_BUILD_NEON
  return &detail::rff_accum_neon;
#endif
  return &detail::rff_accum_scalar;
}

detail::RffAccumFn g_accum = select_accum();

}  // namespace

const char* rff_backend_name() {
#ifdef WD_BUILD_AVX2
  if (g_accum == &detail::rff_accum_avx2) return "avx2";
#endif
#ifdef WD_BUILD_NEON
  if (g_accum == &detail::rff_accum_neon) return "neon";
#endif
  return "scalar";
}

double rff_eval_scalar_ref(const RffField& field, Point p) {
  int J = field.features();
  double s = detail::rff_accum_scalar(field.w.data(), field.zx.data(),
                                      field.zy.data(), field.b.data(), J, p.x,
                                      p.y);
  return std::sqrt(2.0 / J) * s;
}

double rff_eval(const RffField& field, Point p) {
  int J = field.features();
  double s = g_accum(field.w.data(), field.zx.data(), field.zy.data(),
                     field.b.data(), J, p.x, p.y);
  return std::sqrt(2.0 / J) * s;
}

void rff_eval_points(const RffField& field, const Point* pts, int n,
                     double* out) {
  for (int i = 0; i < n; ++i) out[i] = rff_eval(field, pts[i]);
}

Field rff_eval_grid(const RffField& field, const Grid& grid, int n_threads) {
  Field out(grid, 1);
  if (n_threads <= 0) {
    n_threads = (int)std::thread::hardware_concurrency();
    if (n_threads < 1) n_threads = 1;
  }
  if (n_threads > grid.height) n_threads = grid.height;
  auto run_rows = [&](int i0, int i1) {
    for (int i = i0; i < i1; ++i)
      for (int j = 0; j < grid.width; ++j)
        out.at(i, j) = rff_eval(field, grid.coords(i, j));
  };
  if (n_threads == 1) {
    run_rows(0, grid.height);
    return out;
  }
  std::vector<std::thread> pool;
  int rows_per = (grid.height + n_threads - 1) / n_threads;
  for (int t = 0; t < n_threads; ++t) {
    int i0 = t * rows_per;
    int i1 = std::min(grid.height, i0 + rows_per);
    if (i0 >= i1) break;
    pool.emplace_back(run_rows, i0, i1);
  }
  for (auto& th : pool) th.join();
  return out;
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
  if (!is) throw std::runtime_error("WDRF: truncated file");
  return (uint32_t)b[0] | (uint32_t)b[1] << 8 | (uint32_t)b[2] << 16 |
         (uint32_t)b[3] << 24;
}

void put_f64s(std::ostream& os, const std::vector<double>& v) {
  os.write((const char*)v.data(), (std::streamsize)(v.size() * 8));
}

void get_f64s(std::istream& is, std::vector<double>& v) {
  is.read((char*)v.data(), (std::streamsize)(v.size() * 8));
  if (!is) throw std::runtime_error("WDRF: truncated file");
}

}  // namespace

void rff_write(const RffField& field, const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("rff_write: cannot open " + path);
  os.write("WDRF", 4);
  put_u32(os, 1u);
  put_u32(os, (uint32_t)field.features());
  uint64_t seed = field.seed;
  put_u32(os, (uint32_t)(seed & 0xffffffffu));
  put_u32(os, (uint32_t)(seed >> 32));
  double ls = field.spec.length_scale, tm = field.spec.truncation_mult;
  os.write((const char*)&ls, 8);
  os.write((const char*)&tm, 8);
  put_f64s(os, field.w);
  put_f64s(os, field.zx);
  put_f64s(os, field.zy);
  put_f64s(os, field.b);
  if (!os) throw std::runtime_error("rff_write: write failed");
}

RffField rff_read(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("rff_read: cannot open " + path);
  char magic[4];
  is.read(magic, 4);
  if (!is || std::memcmp(magic, "WDRF", 4) != 0)
    throw std::runtime_error("rff_read: bad magic");
  if (get_u32(is) != 1) throw std::runtime_error("rff_read: bad version");
  uint32_t J = get_u32(is);
  uint64_t slo = get_u32(is), shi = get_u32(is);
  RffField f;
  f.seed = slo | (shi << 32);
  is.read((char*)&f.spec.length_scale, 8);
  is.read((char*)&f.spec.truncation_mult, 8);
  if (!is || J < 1 || J > (1u << 28)) throw std::runtime_error("rff_read: bad header");
  f.w.resize(J);
  f.zx.resize(J);
  f.zy.resize(J);
  f.b.resize(J);
  get_f64s(is, f.w);
  get_f64s(is, f.zx);
  get_f64s(is, f.zy);
  get_f64s(is, f.b);
  return f;
}

}  // namespace wd
