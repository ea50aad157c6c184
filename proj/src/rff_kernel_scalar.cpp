#include <cmath>

#include "rff_kernel_impl.hpp"

namespace wd::detail {

double rff_accum_scalar(const double* w, const double* zx, const double* zy,
                        const double* b, int n, double x, double y) {
  double acc = 0.0;
  for (int j = 0; j < n; ++j) {
    acc += w[j] * std::cos(zx[j] * x + zy[j] * y + b[j]);
  }
  return acc;
}

}  // namespace wd::detail
