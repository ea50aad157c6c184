#include "wd/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <stdexcept>

#include "wd/guidance.hpp"

namespace wd {

std::vector<double> warping_error(const std::vector<Field>& frames,
                                  const FlowSequence& flows, bool to_first) {
  if (frames.empty()) return {};
  if (flows.maps.size() + 1 != frames.size())
    throw std::invalid_argument("warping_error: need one flow per frame pair");
  std::vector<double> err(frames.size(), 0.0);
  FlowMap cum = flow_identity(frames[0].grid);
  for (size_t j = 1; j < frames.size(); ++j) {
    const FlowMap& fl = flows.maps[j - 1];
    if (to_first) {
      cum = flow_compose(cum, fl);
      WarpResidual wr = warping_residual(frames[j], frames[0], cum);
      if (wr.mask_count == 0)
        throw std::runtime_error("warping_error: empty mask at frame " +
                                 std::to_string(j));
      err[j] = wr.e;
    } else {
      WarpResidual wr = warping_residual(frames[j], frames[j - 1], fl);
      if (wr.mask_count == 0)
        throw std::runtime_error("warping_error: empty mask at frame " +
                                 std::to_string(j));
      err[j] = wr.e;
    }
  }
  return err;
}

double mse(const Field& a, const Field& b) {
  if (!(a.grid == b.grid) || a.channels != b.channels)
    throw std::invalid_argument("mse: shape mismatch");
  double acc = 0.0;
  for (size_t i = 0; i < a.values.size(); ++i) {
    double d = a.values[i] - b.values[i];
    acc += d * d;
  }
  return acc / (double)a.values.size();
}

namespace {

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

}  // namespace

NoiseReport noise_diagnostics(const std::vector<Field>& samples,
                              const KernelSpec& spec) {
  if (samples.empty())
    throw std::invalid_argument("noise_diagnostics: no samples");
  const Grid& g = samples[0].grid;
  for (const auto& s : samples)
    if (!(s.grid == g) || s.channels != 1)
      throw std::invalid_argument("noise_diagnostics: mismatched samples");
  const int k = g.size();
  const int n = (int)samples.size();

  NoiseReport rep;
  std::vector<double> mean(k, 0.0), var(k, 0.0);
  for (const auto& s : samples)
    for (int i = 0; i < k; ++i) mean[i] += s.values[i];
  for (auto& m : mean) m /= n;
  for (const auto& s : samples)
    for (int i = 0; i < k; ++i) {
      double d = s.values[i] - mean[i];
      var[i] += d * d;
    }
  for (auto& v : var) v /= std::max(1, n - 1);
  rep.mean_abs_max = 0.0;
  rep.var_min = var[0];
  rep.var_max = var[0];
  double vsum = 0.0;
  for (int i = 0; i < k; ++i) {
    rep.mean_abs_max = std::max(rep.mean_abs_max, std::abs(mean[i]));
    rep.var_min = std::min(rep.var_min, var[i]);
    rep.var_max = std::max(rep.var_max, var[i]);
    vsum += var[i];
  }
  rep.var_mean = vsum / k;

  // covariance curve at integer-pixel lags along x
  int max_lag = std::min(8, g.width - 1);
  for (int lag = 0; lag <= max_lag; ++lag) {
    double acc = 0.0;
    long cnt = 0;
    for (const auto& s : samples)
      for (int i = 0; i < g.height; ++i)
        for (int j = 0; j + lag < g.width; ++j) {
          acc += s.at(i, j) * s.at(i, j + lag);
          ++cnt;
        }
    rep.cov_curve.push_back({(double)lag / g.width, acc / cnt});
  }
  (void)spec;

  // KS distance of the pooled values against N(0,1)
  std::vector<double> pooled;
  pooled.reserve((size_t)n * k);
  for (const auto& s : samples)
    pooled.insert(pooled.end(), s.values.begin(), s.values.end());
  std::sort(pooled.begin(), pooled.end());
  double d = 0.0;
  size_t m = pooled.size();
  for (size_t i = 0; i < m; ++i) {
    double c = normal_cdf(pooled[i]);
    d = std::max(d, std::abs(c - (double)(i + 1) / m));
    d = std::max(d, std::abs(c - (double)i / m));
  }
  rep.ks = d;
  return rep;
}

void write_metrics_csv(const std::vector<MetricsRow>& rows,
                       const std::string& path) {
  std::FILE* fp = std::fopen(path.c_str(), "w");
  if (!fp) throw std::runtime_error("write_metrics_csv: cannot open " + path);
  std::fputs("frame_index,scheme,lambda,err_first,err_prev,mse\n", fp);
  for (const auto& r : rows)
    std::fprintf(fp, "%d,%s,%.17g,%.17g,%.17g,%.17g\n", r.frame,
                 r.scheme.c_str(), r.lambda, r.err_first, r.err_prev, r.mse);
  std::fclose(fp);
}

}  // namespace wd
