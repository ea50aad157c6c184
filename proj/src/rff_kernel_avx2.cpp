#include <immintrin.h>

#include <cmath>

#include "rff_kernel_impl.hpp"

// AVX2+FMA kernel. The vector cosine uses Cody-Waite reduction against
// pi/2 and the classic fdlibm minimax polynomials, accurate to a couple
// of ulps for |arg| < 2^17, which covers every argument the RFF
// evaluator can produce at sane length scales.

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

inline __m256d cos4(__m256d v) {
  // n = round(v * 2/pi), r = v - n*pi/2 in [-pi/4, pi/4]
  __m256d n = _mm256_round_pd(_mm256_mul_pd(v, _mm256_set1_pd(kInvPio2)),
                              _MM_FROUND_TO_NEAREST_INT | _MM_FROUND_NO_EXC);
  __m256d r = _mm256_fnmadd_pd(n, _mm256_set1_pd(kPio2Hi), v);
  r = _mm256_fnmadd_pd(n, _mm256_set1_pd(kPio2Lo), r);
  r = _mm256_fnmadd_pd(n, _mm256_set1_pd(kPio2Tail), r);

  __m256d z = _mm256_mul_pd(r, r);

  // sin kernel: r + r*z*(S1 + z*(...))
  __m256d ps = _mm256_set1_pd(S6);
  ps = _mm256_fmadd_pd(ps, z, _mm256_set1_pd(S5));
  ps = _mm256_fmadd_pd(ps, z, _mm256_set1_pd(S4));
  ps = _mm256_fmadd_pd(ps, z, _mm256_set1_pd(S3));
  ps = _mm256_fmadd_pd(ps, z, _mm256_set1_pd(S2));
  ps = _mm256_fmadd_pd(ps, z, _mm256_set1_pd(S1));
  __m256d sinr = _mm256_fmadd_pd(_mm256_mul_pd(r, z), ps, r);

  // cos kernel: 1 - z/2 + z*z*(C1 + z*(...))
  __m256d pc = _mm256_set1_pd(C6);
  pc = _mm256_fmadd_pd(pc, z, _mm256_set1_pd(C5));
  pc = _mm256_fmadd_pd(pc, z, _mm256_set1_pd(C4));
  pc = _mm256_fmadd_pd(pc, z, _mm256_set1_pd(C3));
  pc = _mm256_fmadd_pd(pc, z, _mm256_set1_pd(C2));
  pc = _mm256_fmadd_pd(pc, z, _mm256_set1_pd(C1));
  __m256d cosr = _mm256_fmadd_pd(_mm256_mul_pd(z, z), pc,
                                 _mm256_fnmadd_pd(z, _mm256_set1_pd(0.5),
                                                  _mm256_set1_pd(1.0)));

  // quadrant q = n mod 4: cos(v) = {cos(r), -sin(r), -cos(r), sin(r)}[q]
  __m128i q32 = _mm256_cvtpd_epi32(n);
  __m256i q = _mm256_cvtepi32_epi64(q32);
  __m256i odd = _mm256_slli_epi64(_mm256_and_si256(q, _mm256_set1_epi64x(1)), 63);
  // sign is negative for q mod 4 in {1,2}: bit 1 of (q+1)
  __m256i sgn = _mm256_slli_epi64(
      _mm256_and_si256(_mm256_add_epi64(q, _mm256_set1_epi64x(1)),
                       _mm256_set1_epi64x(2)),
      62);
  __m256d use_sin = _mm256_castsi256_pd(
      _mm256_cmpeq_epi64(_mm256_srli_epi64(odd, 63), _mm256_set1_epi64x(1)));
  __m256d res = _mm256_blendv_pd(cosr, sinr, use_sin);
  return _mm256_xor_pd(res, _mm256_castsi256_pd(sgn));
}

}  // namespace

bool rff_avx2_supported() {
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
}

double rff_accum_avx2(const double* w, const double* zx, const double* zy,
                      const double* b, int n, double x, double y) {
  __m256d X = _mm256_set1_pd(x);
  __m256d Y = _mm256_set1_pd(y);
  __m256d acc = _mm256_setzero_pd();
  int j = 0;
  for (; j + 4 <= n; j += 4) {
    __m256d arg = _mm256_loadu_pd(b + j);
    arg = _mm256_fmadd_pd(_mm256_loadu_pd(zx + j), X, arg);
    arg = _mm256_fmadd_pd(_mm256_loadu_pd(zy + j), Y, arg);
    acc = _mm256_fmadd_pd(_mm256_loadu_pd(w + j), cos4(arg), acc);
  }
  __m128d lo = _mm256_castpd256_pd128(acc);
  __m128d hi = _mm256_extractf128_pd(acc, 1);
  __m128d s = _mm_add_pd(lo, hi);
  double out = _mm_cvtsd_f64(_mm_add_sd(s, _mm_unpackhi_pd(s, s)));
  for (; j < n; ++j) out += w[j] * std::cos(zx[j] * x + zy[j] * y + b[j]);
  return out;
}

}  // namespace wd::detail
