// wd: noise fields, flows, warped-noise video sampling, metrics and checks.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "CLI11.hpp"
#include "wd/diffusion.hpp"
#include "wd/equivariance.hpp"
#include "wd/flow.hpp"
#include "wd/guidance.hpp"
#include "wd/kernels_gp.hpp"
#include "wd/metrics.hpp"
#include "wd/rng.hpp"
#include "wd/warp.hpp"

namespace fs = std::filesystem;
using namespace wd;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

constexpr int kExitUsage = 2;
constexpr int kExitNumerical = 3;

VectorXd field_vec(const Field& f) {
  return Eigen::Map<const VectorXd>(f.values.data(), (int)f.values.size());
}

Field vec_field(const Grid& g, const VectorXd& v) {
  Field f(g, 1);
  for (int i = 0; i < g.size(); ++i) f.values[i] = v(i);
  return f;
}

std::string zpad(int n) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%03d", n);
  return buf;
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  return v[v.size() / 2];
}

// ---------------------------------------------------------------------------
// noise

struct NoiseArgs {
  int resolution = 128;
  double length_scale = 0.004977;
  int features = 3000;
  double truncation = 2.0;
  uint64_t seed = 0;
  std::string mode = "gp";
  std::string out = "noise";
};

int run_noise(const NoiseArgs& a) {
  Grid g(a.resolution, a.resolution);
  Field f(g, 1);
  if (a.mode == "gp") {
    KernelSpec spec{a.length_scale, a.truncation};
    RffField rff = rff_sample(spec, a.features, a.seed);
    f = rff_eval_grid(rff, g);
    rff_write(rff, a.out + ".wdrf");
  } else {
    RngStream rng(a.seed);
    for (int i = 0; i < g.size(); ++i) f.values[i] = rng.normal((uint64_t)i);
  }
  tensor_write(f, a.out + ".wdtn");
  field_to_image(f, -3.0, 3.0, a.out + ".pgm");
  std::cout << "wrote " << a.out << ".wdtn and " << a.out << ".pgm\n";
  return 0;
}

// ---------------------------------------------------------------------------
// flow

struct FlowArgs {
  int resolution = 64;
  std::string out = "flow.wdfl";
  double ax = 0.0, ay = 0.0;
  double angle = 0.0, cx = 0.5, cy = 0.5;
  double strength = 0.5;
  std::string prev, next;
  double alpha = 10.0;
  int iters = 200;
  std::string first, second;
};

int run_flow(const std::string& sub, const FlowArgs& a) {
  Grid g(a.resolution, a.resolution);
  FlowMap f;
  if (sub == "translate") {
    f = flow_translate(g, a.ax, a.ay);
  } else if (sub == "rotate") {
    f = flow_rotate(g, a.angle, {a.cx, a.cy});
  } else if (sub == "swirl") {
    f = flow_swirl(g, a.strength);
  } else if (sub == "estimate") {
    Field fp = tensor_read(a.prev);
    Field fn = tensor_read(a.next);
    f = flow_estimate_hs(fp, fn, a.alpha, a.iters);
  } else {  // compose
    FlowMap f1 = flow_read(a.first);
    FlowMap f2 = flow_read(a.second);
    f = flow_compose(f1, f2);
  }
  flow_write(f, a.out);
  std::cout << "wrote " << a.out << "\n";
  return 0;
}

// ---------------------------------------------------------------------------
// video

struct VideoArgs {
  int resolution = 64;
  int frames = 16;
  int steps = 50;
  double tau = 10.0;
  std::string scheme = "gp";
  double guidance = 1.0;
  double guard = 1e-12;
  std::string task = "mask";
  std::string data = "mixture";
  double data_var = 0.25;
  double sigma_y = 0.1;
  int shift_px = 1;
  double length_scale = 0.0;  // 0: resolved to the resolution rule of thumb
  int features = 3000;
  double truncation = 2.0;
  int downsample_factor = 4;
  uint64_t seed = 1;
  bool no_warp = false;
  std::string out_dir = "run";
};

WarpScheme parse_scheme(const std::string& s) {
  if (s == "fixed") return WarpScheme::Fixed;
  if (s == "resample") return WarpScheme::Resample;
  if (s == "nearest") return WarpScheme::Nearest;
  if (s == "bilinear") return WarpScheme::Bilinear;
  if (s == "bridge") return WarpScheme::Bridge;
  return WarpScheme::Gp;
}

// smooth, distinguishable component means on the unit square
std::vector<VectorXd> component_means(const Grid& g, int n_comp) {
  std::vector<VectorXd> means;
  for (int c = 0; c < n_comp; ++c) {
    VectorXd m(g.size());
    double phase = c / (double)n_comp;
    for (int idx = 0; idx < g.size(); ++idx) {
      Point p = g.coords(idx);
      m(idx) = std::sin(2 * M_PI * ((c + 1) * p.x + phase)) *
               std::sin(2 * M_PI * (p.y + phase));
    }
    means.push_back(std::move(m));
  }
  return means;
}

// ground-truth draw from the declared data model (diagonal covariance)
VectorXd draw_ground_truth(const std::vector<double>& weights,
                           const std::vector<VectorXd>& means, double data_var,
                           uint64_t seed) {
  RngStream rng(seed, 0xDA7A);
  double u = rng.uniform(0);
  size_t c = 0;
  double acc = 0.0;
  for (; c + 1 < weights.size(); ++c) {
    acc += weights[c];
    if (u < acc) break;
  }
  VectorXd out = means[c];
  double s = std::sqrt(data_var);
  for (int i = 0; i < out.size(); ++i) out(i) += s * rng.normal(1 + (uint64_t)i);
  return out;
}

VectorXd cyclic_shift_px(const Grid& g, const VectorXd& v, int dj_total) {
  return cyclic_shift(g, v, 0, dj_total);
}

// per-component linear-Gaussian update plus evidence reweighting, for the
// dense (block-average observation) pathway
MixtureData fold_observation(const MixtureData& data, const Observation& obs) {
  MixtureData out;
  MatrixXd S =
      obs.M * data.covs[0] * obs.M.transpose() +
      obs.sigma_y * obs.sigma_y * MatrixXd::Identity(obs.y.size(), obs.y.size());
  Eigen::LLT<MatrixXd> llt(S);
  double log_max = -std::numeric_limits<double>::infinity();
  std::vector<double> logw(data.weights.size());
  for (size_t c = 0; c < data.weights.size(); ++c) {
    GaussianData post =
        gaussian_posterior(GaussianData{data.means[c], data.covs[c]}, obs);
    VectorXd r = obs.y - obs.M * data.means[c];
    logw[c] = std::log(data.weights[c]) - 0.5 * r.dot(llt.solve(r));
    log_max = std::max(log_max, logw[c]);
    out.means.push_back(post.mean);
    out.covs.push_back(post.cov);
  }
  double sum = 0.0;
  for (double lw : logw) sum += std::exp(lw - log_max);
  for (double lw : logw) out.weights.push_back(std::exp(lw - log_max) / sum);
  return out;
}

void write_manifest(const VideoArgs& a, const std::string& path) {
  std::ofstream out(path);
  out.precision(17);
  out << "[video]\n";
  out << "resolution = " << a.resolution << "\n";
  out << "frames = " << a.frames << "\n";
  out << "steps = " << a.steps << "\n";
  out << "tau = " << a.tau << "\n";
  out << "scheme = " << a.scheme << "\n";
  out << "guidance = " << a.guidance << "\n";
  out << "guard = " << a.guard << "\n";
  out << "task = " << a.task << "\n";
  out << "data = " << a.data << "\n";
  out << "data-var = " << a.data_var << "\n";
  out << "sigma-y = " << a.sigma_y << "\n";
  out << "shift-px = " << a.shift_px << "\n";
  out << "length-scale = " << a.length_scale << "\n";
  out << "features = " << a.features << "\n";
  out << "truncation = " << a.truncation << "\n";
  out << "downsample-factor = " << a.downsample_factor << "\n";
  out << "seed = " << a.seed << "\n";
  out << "no-warp = " << (a.no_warp ? "true" : "false") << "\n";
  out << "out-dir = " << a.out_dir << "\n";
}

int run_video(VideoArgs a) {
  Grid g(a.resolution, a.resolution);
  const int k = g.size();
  if (a.length_scale <= 0.0) a.length_scale = default_length_scale(a.resolution);
  bool dense_task = (a.task == "downsample");
  if (dense_task && a.resolution > 32)
    throw CLI::ValidationError(
        "video", "--task downsample uses dense algebra; --resolution <= 32");

  // data model: one or three components with diagonal covariance
  std::vector<double> weights;
  std::vector<VectorXd> means;
  if (a.data == "gaussian") {
    weights = {1.0};
    means = component_means(g, 1);
  } else {
    weights = {0.5, 0.3, 0.2};
    means = component_means(g, 3);
  }
  VectorXd gt0 = draw_ground_truth(weights, means, a.data_var, a.seed);
  std::vector<VectorXd> gt = {gt0};
  for (int j = 1; j < a.frames; ++j)
    gt.push_back(cyclic_shift_px(g, gt0, j * a.shift_px));

  FlowSequence flows;
  for (int j = 1; j < a.frames; ++j)
    flows.maps.push_back(flow_translate(g, a.shift_px / (double)a.resolution, 0.0));

  bool gp_noise = (a.scheme == "gp");
  KernelSpec spec{a.length_scale, a.truncation};
  CirculantOp q = gp_noise ? CirculantOp::se_kernel(g, a.length_scale)
                           : CirculantOp(g, [&] {
                               std::vector<double> taps(k, 0.0);
                               taps[0] = 1.0;
                               return taps;
                             }());

  // static inpainting mask: a centered hole covering 1/4 of the frame
  std::vector<uint8_t> obs_mask(k, 1);
  for (int i = a.resolution / 4; i < 3 * a.resolution / 4; ++i)
    for (int j = a.resolution / 4; j < 3 * a.resolution / 4; ++j)
      obs_mask[g.index(i, j)] = 0;
  int n_obs = 0;
  for (uint8_t b : obs_mask) n_obs += b;

  std::vector<DenoiserPtr> denoisers;
  for (int j = 0; j < a.frames; ++j) {
    if (a.task == "none") {
      denoisers.push_back(a.data == "gaussian"
                              ? gaussian_circulant_denoiser(means[0], a.data_var, q)
                              : mixture_circulant_denoiser(weights, means,
                                                           a.data_var, q));
      break;  // shared across frames
    }
    if (a.task == "mask") {
      VectorXd y(n_obs);
      RngStream rng(a.seed, 0x0b5 + j);
      int r = 0;
      for (int i = 0; i < k; ++i)
        if (obs_mask[i]) {
          y(r) = gt[j](i) + a.sigma_y * rng.normal((uint64_t)r);
          ++r;
        }
      denoisers.push_back(
          a.data == "gaussian"
              ? gaussian_circulant_denoiser(means[0], a.data_var, q, obs_mask, y,
                                            a.sigma_y)
              : mixture_circulant_denoiser(weights, means, a.data_var, q,
                                           obs_mask, y, a.sigma_y));
    } else {  // downsample, dense algebra
      MatrixXd M = obs_downsample_matrix(g, a.downsample_factor);
      VectorXd y = M * gt[j];
      RngStream rng(a.seed, 0x0b5 + j);
      for (int r = 0; r < y.size(); ++r) y(r) += a.sigma_y * rng.normal((uint64_t)r);
      MatrixXd Qd(k, k);
      for (int c = 0; c < k; ++c) {
        VectorXd e = VectorXd::Zero(k);
        e(c) = 1.0;
        Qd.col(c) = q.apply(e);
      }
      MixtureData md;
      md.weights = weights;
      md.means = means;
      md.covs.assign(weights.size(), a.data_var * MatrixXd::Identity(k, k));
      MixtureData post = fold_observation(md, Observation{M, y, a.sigma_y});
      denoisers.push_back(post.weights.size() == 1
                              ? gaussian_denoiser(
                                    GaussianData{post.means[0], post.covs[0]}, Qd)
                              : mixture_denoiser(post, Qd));
    }
  }

  VideoParams p;
  p.schedule = Schedule{a.tau, a.steps};
  p.lambda = a.guidance;
  p.guard = a.guard;
  p.scheme = parse_scheme(a.scheme);
  p.sampler.kind = gp_noise ? NoiseKind::Gp : NoiseKind::White;
  p.sampler.spec = spec;
  p.sampler.features = a.features;
  p.seed = a.seed;
  p.no_warp = a.no_warp;

  VideoResult res = sample_video(g, flows, denoisers, p);

  fs::create_directories(a.out_dir);
  write_manifest(a, a.out_dir + "/manifest.txt");
  std::vector<MetricsRow> rows;
  std::vector<double> err_first = warping_error(res.frames, flows, true);
  std::vector<double> err_prev = warping_error(res.frames, flows, false);
  for (int j = 0; j < a.frames; ++j) {
    std::string stem = a.out_dir + "/frame_" + zpad(j);
    tensor_write(res.frames[j], stem + ".wdtn");
    field_to_image(res.frames[j], -2.0, 2.0, stem + ".pgm");
    if (j + 1 < a.frames)
      flow_write(flows.maps[j], a.out_dir + "/flow_" + zpad(j) + ".wdfl");
    rows.push_back({j, a.scheme, a.guidance, err_first[j], err_prev[j],
                    mse(res.frames[j], vec_field(g, gt[j]))});
  }
  write_metrics_csv(rows, a.out_dir + "/metrics.csv");
  write_step_log_csv(res.log, a.out_dir + "/steps.csv");
  std::cout << "wrote " << a.frames << " frames to " << a.out_dir << "\n";
  return 0;
}

// ---------------------------------------------------------------------------
// eval

struct EvalArgs {
  std::string frames_dir;
  std::string flows_dir;
  std::string reference = "prev";
};

int run_eval(const EvalArgs& a) {
  std::vector<Field> frames;
  for (int j = 0;; ++j) {
    fs::path p = fs::path(a.frames_dir) / ("frame_" + zpad(j) + ".wdtn");
    if (!fs::exists(p)) break;
    frames.push_back(tensor_read(p.string()));
  }
  if (frames.empty()) throw CLI::ValidationError("eval", "no frames found");
  FlowSequence flows;
  for (size_t j = 0; j + 1 < frames.size(); ++j) {
    fs::path p = fs::path(a.flows_dir) / ("flow_" + zpad((int)j) + ".wdfl");
    if (!fs::exists(p))
      throw CLI::ValidationError("eval", "missing flow " + p.string());
    flows.maps.push_back(flow_read(p.string()));
  }
  std::vector<double> err = warping_error(frames, flows, a.reference == "first");
  std::cout << "frame,warping_error\n";
  for (size_t j = 0; j < err.size(); ++j)
    std::cout << j << "," << err[j] << "\n";
  return 0;
}

// ---------------------------------------------------------------------------
// bench

struct BenchArgs {
  int resolution = 256;
  int features = 3000;
  int threads = 0;
  int repeats = 5;
};

int run_bench(const BenchArgs& a) {
  Grid g(a.resolution, a.resolution);
  KernelSpec spec{default_length_scale(a.resolution), 2.0};
  RffField f = rff_sample(spec, a.features, 42);
  int max_threads = a.threads > 0
                        ? a.threads
                        : std::max(1u, std::thread::hardware_concurrency());
  Field ref = rff_eval_grid(f, g, 1);
  std::cout << "op,threads,median_ms\n";
  double last = 0.0;
  bool monotone_warned = false;
  for (int th = 1; th <= max_threads; th *= 2) {
    std::vector<double> ms;
    Field out = ref;
    for (int r = 0; r < a.repeats; ++r) {
      auto t0 = std::chrono::steady_clock::now();
      out = rff_eval_grid(f, g, th);
      auto t1 = std::chrono::steady_clock::now();
      ms.push_back(std::chrono::duration<double, std::milli>(t1 - t0).count());
    }
    double worst = 0.0;
    for (int i = 0; i < g.size(); ++i)
      worst = std::max(worst, std::abs(out.values[i] - ref.values[i]));
    if (worst > 1e-12)
      throw std::runtime_error("bench: thread count changed the output");
    double med = median(ms);
    std::cout << "rff_eval_grid," << th << "," << med << "\n";
    if (th > 1 && med > last * 1.05 && !monotone_warned) {
      std::cerr << "warning: no speedup from " << th / 2 << " to " << th
                << " threads\n";
      monotone_warned = true;
    }
    last = med;
  }
  FlowMap half = flow_translate(g, 0.5 / a.resolution, 0.3 / a.resolution);
  std::vector<double> ms;
  for (int r = 0; r < a.repeats; ++r) {
    auto t0 = std::chrono::steady_clock::now();
    Field out = warp_gp(f, half);
    auto t1 = std::chrono::steady_clock::now();
    (void)out;
    ms.push_back(std::chrono::duration<double, std::milli>(t1 - t0).count());
  }
  std::cout << "warp_gp," << max_threads << "," << median(ms) << "\n";
  std::cout << "# backend: " << rff_backend_name() << "\n";
  return 0;
}

// ---------------------------------------------------------------------------
// check

struct CheckArgs {
  int resolution = 64;
  int steps = 25;
  uint64_t seed = 7;
};

// subpixel shift through the actual warp operator (bilinear with hull
// cropping and refill), for the reported (not asserted) row: a periodic
// fractional shift is itself circulant and would commute exactly
VectorXd subpixel_warp_shift(const Grid& g, const VectorXd& v, double px) {
  FlowMap fl = flow_translate(g, px / g.width, 0.0);
  Field f(g, 1);
  for (int i = 0; i < g.size(); ++i) f.values[i] = v(i);
  Field out = warp_bilinear(f, fl, 99);
  return Eigen::Map<const VectorXd>(out.values.data(), g.size());
}

int run_check(const CheckArgs& a) {
  Grid g(a.resolution, a.resolution);
  CirculantOp filt = CirculantOp::se_kernel(g, 2.0 / a.resolution, true);
  DenoiserPtr circ = circulant_denoiser(filt);
  DenoiserPtr pert = perturbed_denoiser(circ, smooth_gain_field(g, a.seed));
  Schedule sched{10.0, a.steps};

  struct Row {
    std::string name;
    double measured;
    double threshold;
    bool upper;  // pass iff measured <= threshold (else >=)
  };
  std::vector<Row> rows;
  rows.push_back({"convolution equivariance (circulant)",
                  check_convolution_equivariance(*circ, g, 8, a.seed), 1e-12,
                  true});
  rows.push_back({"convolution equivariance (perturbed)",
                  check_convolution_equivariance(*pert, g, 8, a.seed), 1e-3,
                  false});
  rows.push_back({"single-step equivariance (circulant)",
                  check_step_equivariance(*circ, g, 4.0, 0.4, 3, 5, 5, a.seed),
                  1e-12, true});
  rows.push_back({"chain equivariance (circulant)",
                  check_chain_equivariance(*circ, g, sched, 3, 7, a.seed), 1e-8,
                  true});
  rows.push_back({"chain equivariance (perturbed)",
                  check_chain_equivariance(*pert, g, sched, 3, 7, a.seed), 1e-3,
                  false});

  bool ok = true;
  std::printf("%-42s %12s %12s  %s\n", "check", "measured", "threshold",
              "result");
  for (const Row& r : rows) {
    bool pass = r.upper ? r.measured <= r.threshold : r.measured >= r.threshold;
    ok = ok && pass;
    std::printf("%-42s %12.3e %9s%.0e  %s\n", r.name.c_str(), r.measured,
                r.upper ? "<= " : ">= ", r.threshold, pass ? "PASS" : "FAIL");
  }
  // subpixel shifts break exactness through interpolation: reported only
  {
    RngStream rng(a.seed, 9);
    VectorXd u(g.size());
    for (int i = 0; i < g.size(); ++i) u(i) = rng.normal((uint64_t)i);
    VectorXd lhs = circ->evaluate(subpixel_warp_shift(g, u, 0.5), 1.0);
    VectorXd rhs = subpixel_warp_shift(g, circ->evaluate(u, 1.0), 0.5);
    std::printf("%-42s %12.3e %12s  %s\n",
                "subpixel (half-pixel) commutation",
                (lhs - rhs).cwiseAbs().maxCoeff(), "-", "INFO");
  }
  return ok ? 0 : kExitNumerical;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"warped-diffusion sampling toolkit"};
  app.require_subcommand(1);
  // rerun a video manifest with: wd --config run/manifest.txt video
  app.set_config("--config");

  NoiseArgs na;
  CLI::App* noise = app.add_subcommand("noise", "write one noise realization");
  noise->add_option("--resolution", na.resolution)->check(CLI::PositiveNumber);
  noise->add_option("--length-scale", na.length_scale)->check(CLI::PositiveNumber);
  noise->add_option("--features", na.features)->check(CLI::PositiveNumber);
  noise->add_option("--truncation", na.truncation)->check(CLI::PositiveNumber);
  noise->add_option("--seed", na.seed);
  noise->add_option("--mode", na.mode)->check(CLI::IsMember({"gp", "white"}));
  noise->add_option("--out", na.out);

  FlowArgs fa;
  CLI::App* flow = app.add_subcommand("flow", "generate or estimate flows");
  flow->require_subcommand(1);
  auto add_common = [&](CLI::App* s) {
    s->add_option("--resolution", fa.resolution)->check(CLI::PositiveNumber);
    s->add_option("--out", fa.out);
  };
  CLI::App* ftr = flow->add_subcommand("translate");
  add_common(ftr);
  ftr->add_option("--ax", fa.ax);
  ftr->add_option("--ay", fa.ay);
  CLI::App* fro = flow->add_subcommand("rotate");
  add_common(fro);
  fro->add_option("--angle", fa.angle);
  fro->add_option("--cx", fa.cx);
  fro->add_option("--cy", fa.cy);
  CLI::App* fsw = flow->add_subcommand("swirl");
  add_common(fsw);
  fsw->add_option("--strength", fa.strength);
  CLI::App* fes = flow->add_subcommand("estimate");
  add_common(fes);
  fes->add_option("--prev", fa.prev)->required();
  fes->add_option("--next", fa.next)->required();
  fes->add_option("--alpha", fa.alpha)->check(CLI::PositiveNumber);
  fes->add_option("--iters", fa.iters)->check(CLI::PositiveNumber);
  CLI::App* fco = flow->add_subcommand("compose");
  add_common(fco);
  fco->add_option("--first", fa.first)->required();
  fco->add_option("--second", fa.second)->required();

  VideoArgs va;
  CLI::App* video = app.add_subcommand("video", "sample a warped-noise video");
  video->add_option("--resolution", va.resolution)->check(CLI::PositiveNumber);
  video->add_option("--frames", va.frames)->check(CLI::PositiveNumber);
  video->add_option("--steps", va.steps)->check(CLI::PositiveNumber);
  video->add_option("--tau", va.tau)->check(CLI::PositiveNumber);
  video->add_option("--scheme", va.scheme)
      ->check(CLI::IsMember(
          {"fixed", "resample", "nearest", "bilinear", "bridge", "gp"}));
  video->add_option("--guidance", va.guidance)->check(CLI::NonNegativeNumber);
  video->add_option("--guard", va.guard)->check(CLI::NonNegativeNumber);
  video->add_option("--task", va.task)
      ->check(CLI::IsMember({"none", "mask", "downsample"}));
  video->add_option("--data", va.data)
      ->check(CLI::IsMember({"gaussian", "mixture"}));
  video->add_option("--data-var", va.data_var)->check(CLI::PositiveNumber);
  video->add_option("--sigma-y", va.sigma_y)->check(CLI::PositiveNumber);
  video->add_option("--shift-px", va.shift_px);
  video->add_option("--length-scale", va.length_scale);
  video->add_option("--features", va.features)->check(CLI::PositiveNumber);
  video->add_option("--truncation", va.truncation)->check(CLI::PositiveNumber);
  video->add_option("--downsample-factor", va.downsample_factor)
      ->check(CLI::PositiveNumber);
  video->add_option("--seed", va.seed);
  video->add_flag("--no-warp", va.no_warp);
  video->add_option("--out-dir", va.out_dir);

  EvalArgs ea;
  CLI::App* eval = app.add_subcommand("eval", "self-warping error of frames");
  eval->add_option("--frames-dir", ea.frames_dir)->required();
  eval->add_option("--flows", ea.flows_dir)->required();
  eval->add_option("--reference", ea.reference)
      ->check(CLI::IsMember({"first", "prev"}));

  BenchArgs ba;
  CLI::App* bench = app.add_subcommand("bench", "time the evaluation hot path");
  bench->add_option("--resolution", ba.resolution)->check(CLI::PositiveNumber);
  bench->add_option("--features", ba.features)->check(CLI::PositiveNumber);
  bench->add_option("--threads", ba.threads)->check(CLI::NonNegativeNumber);
  bench->add_option("--repeats", ba.repeats)->check(CLI::PositiveNumber);

  CheckArgs ca;
  CLI::App* check = app.add_subcommand("check", "equivariance pass/fail table");
  check->add_option("--resolution", ca.resolution)->check(CLI::PositiveNumber);
  check->add_option("--steps", ca.steps)->check(CLI::PositiveNumber);
  check->add_option("--seed", ca.seed);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  try {
    if (*noise) return run_noise(na);
    if (*flow) {
      for (CLI::App* s : flow->get_subcommands()) return run_flow(s->get_name(), fa);
    }
    if (*video) return run_video(va);
    if (*eval) return run_eval(ea);
    if (*bench) return run_bench(ba);
    if (*check) return run_check(ca);
  } catch (const CLI::ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitNumerical;
  }
  return 0;
}
