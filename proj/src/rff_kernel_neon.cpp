#include <arm_neon.h>

#include <cmath>

#include "rff_kernel_impl.hpp"

// NEON (aarch64) kernel, mirroring the AVX2 lane: Cody-Waite reduction
// plus fdlibm minimax polynomials on two doubles at a time.

namespace wd::detail {

namespace {

constexpr double kInvPio2 = 6.36619772367581382433e-01;
constexpr double kPio2Hi = 1.57079632673412561417e+00;
constexpr double kPio2Lo = 6.07710050650619224932e-11;
constexpr double kPio2Tail = 2.02226624879595063154e-21;

constexpr double S1 = -1.66666666666666324348e-01;
constexpr double S2 = 8.33333333332248946124e-03;
constexpr double S3 = -1.98412698298579493134e-04;
constexpr double S4 = 2.75573137070700676789e-06;
constexpr double S5 = -2.50507602534068634195e-08;
constexpr double S6 = 1.58969099521155010221e-10;

constexpr double C1 = 4.16666666666666019037e-02;
constexpr double C2 = -1.38888888888741095749e-03;
constexpr double C3 = 2.48015872894767294178e-05;
constexpr double C4 = -2.75573143513906633035e-07;
constexpr double C5 = 2.08757232129817482790e-09;
constexpr double C6 = -1.13596475577881948265e-11;

inline float64x2_t cos2(float64x2_t v) {
  float64x2_t n = vrndnq_f64(vmulq_f64(v, vdupq_n_f64(kInvPio2)));
  float64x2_t r = vfmsq_f64(v, n, vdupq_n_f64(kPio2Hi));
  r = vfmsq_f64(r, n, vdupq_n_f64(kPio2Lo));
  r = vfmsq_f64(r, n, vdupq_n_f64(kPio2Tail));

  float64x2_t z = vmulq_f64(r, r);

  float64x2_t ps = vdupq_n_f64(S6);
  ps = vfmaq_f64(vdupq_n_f64(S5), ps, z);
  ps = vfmaq_f64(vdupq_n_f64(S4), ps, z);
  ps = vfmaq_f64(vdupq_n_f64(S3), ps, z);
  ps = vfmaq_f64(vdupq_n_f64(S2), ps, z);
  ps = vfmaq_f64(vdupq_n_f64(S1), ps, z);
  float64x2_t sinr = vfmaq_f64(r, vmulq_f64(r, z), ps);

  float64x2_t pc = vdupq_n_f64(C6);
  pc = vfmaq_f64(vdupq_n_f64(C5), pc, z);
  pc = vfmaq_f64(vdupq_n_f64(C4), pc, z);
  pc = vfmaq_f64(vdupq_n_f64(C3), pc, z);
  pc = vfmaq_f64(vdupq_n_f64(C2), pc, z);
  pc = vfmaq_f64(vdupq_n_f64(C1), pc, z);
  float64x2_t cosr = vfmaq_f64(vfmsq_f64(vdupq_n_f64(1.0), z, vdupq_n_f64(0.5)),
                               vmulq_f64(z, z), pc);

  int64x2_t q = vcvtq_s64_f64(n);
  uint64x2_t use_sin = vceqq_s64(vandq_s64(q, vdupq_n_s64(1)), vdupq_n_s64(1));
  int64x2_t sgn = vshlq_n_s64(
      vandq_s64(vaddq_s64(q, vdupq_n_s64(1)), vdupq_n_s64(2)), 62);
  float64x2_t res = vbslq_f64(use_sin, sinr, cosr);
  return vreinterpretq_f64_s64(
      veorq_s64(vreinterpretq_s64_f64(res), sgn));
}

}  // namespace

double rff_accum_neon(const double* w, const double* zx, const double* zy,
                      const double* b, int n, double x, double y) {
  float64x2_t X = vdupq_n_f64(x);
  float64x2_t Y = vdupq_n_f64(y);
  float64x2_t acc = vdupq_n_f64(0.0);
  int j = 0;
  for (; j + 2 <= n; j += 2) {
    float64x2_t arg = vld1q_f64(b + j);
    arg = vfmaq_f64(arg, vld1q_f64(zx + j), X);
    arg = vfmaq_f64(arg, vld1q_f64(zy + j), Y);
    acc = vfmaq_f64(acc, vld1q_f64(w + j), cos2(arg));
  }
  double out = vaddvq_f64(acc);
  for (; j < n; ++j) out += w[j] * std::cos(zx[j] * x + zy[j] * y + b[j]);
  return out;
}

}  // namespace wd::detail
