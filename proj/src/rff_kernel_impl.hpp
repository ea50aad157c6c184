#pragma once

// Internal interface between the RFF evaluator and its kernel backends.
// Each backend computes sum_j w[j] * cos(zx[j]*x + zy[j]*y + b[j]).

namespace wd::detail {

using RffAccumFn = double (*)(const double* w, const double* zx,
                              const double* zy, const double* b, int n,
                              double x, double y);

double rff_accum_scalar(const double* w, const double* zx, const double* zy,
                        const double* b, int n, double x, double y);

#ifdef WD_BUILD_AVX2
bool rff_avx2_supported();
double rff_accum_avx2(const double* w, const double* zx, const double* zy,
                      const double* b, int n, double x, double y);
#endif

#ifdef WD_BUILD_NEON
double rff_accum_neon(const double* w, const double* zx, const double* zy,
                      const double* b, int n, double x, double y);
#endif

}  // namespace wd::detail
