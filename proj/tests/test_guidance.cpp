#include <cmath>
#include <cstdio>
#include <fstream>
#include <string>

#include "doctest.h"
#include "wd/guidance.hpp"
#include "wd/metrics.hpp"
#include "wd/rng.hpp"

using namespace wd;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

Field random_field(const Grid& g, uint64_t seed) {
  RngStream rng(seed);
  Field f(g, 1);
  for (int i = 0; i < g.size(); ++i) f.values[i] = rng.normal((uint64_t)i);
  return f;
}

Field vec_to_field(const Grid& g, const VectorXd& v) {
  Field f(g, 1);
  for (int i = 0; i < g.size(); ++i) f.values[i] = v(i);
  return f;
}

VectorXd field_to_vec(const Field& f) {
  return Eigen::Map<const VectorXd>(f.values.data(), (int)f.values.size());
}

MatrixXd random_spd(int k, uint64_t seed, double ridge) {
  RngStream rng(seed);
  MatrixXd A(k, k);
  for (int i = 0; i < k; ++i)
    for (int j = 0; j < k; ++j) A(i, j) = rng.normal((uint64_t)(i * k + j));
  return A * A.transpose() / k + ridge * MatrixXd::Identity(k, k);
}

}  // namespace

TEST_CASE("warping residual: identity flow on identical fields is zero") {
  Grid g(6, 5);
  Field h = random_field(g, 11);
  WarpResidual wr = warping_residual(h, h, flow_identity(g));
  CHECK(wr.mask_count == g.size());
  CHECK(wr.e == 0.0);
  for (double r : wr.residual.values) CHECK(r == 0.0);
}

TEST_CASE("warping residual: exactly shifted content has zero residual") {
  Grid g(8, 8);
  Field prev = random_field(g, 21);
  // content moved one pixel right: curr(x) = prev(x - a)
  Field curr(g, 1);
  for (int i = 0; i < 8; ++i)
    for (int j = 0; j < 8; ++j)
      curr.at(i, j) = prev.at(i, (j + 7) % 8);
  FlowMap fl = flow_translate(g, 1.0 / 8, 0.0);
  WarpResidual wr = warping_residual(curr, prev, fl);
  CHECK(wr.mask_count == 8 * 7);  // last column maps out of frame
  CHECK(wr.e == 0.0);
}

TEST_CASE("warping residual: hand-computed mean square") {
  Grid g(2, 2);
  Field curr(g, 1), prev(g, 1, 0.0);
  curr.values = {1.0, 2.0, 3.0, 4.0};
  WarpResidual wr = warping_residual(curr, prev, flow_identity(g));
  CHECK(wr.mask_count == 4);
  CHECK(wr.e == doctest::Approx((1.0 + 4.0 + 9.0 + 16.0) / 4.0));
}

TEST_CASE("warp adjoint satisfies the inner-product identity") {
  Grid g(9, 7);
  for (uint64_t seed : {0ull, 1ull, 2ull}) {
    FlowMap fl = flow_swirl(g, 0.3 + 0.1 * seed);
    Field h = random_field(g, 100 + seed);
    Field v = random_field(g, 200 + seed);
    Field zero(g, 1, 0.0);
    WarpResidual wr = warping_residual(h, zero, fl);  // residual = W h on mask
    REQUIRE(wr.mask_count > 0);
    double lhs = 0.0;
    for (int i = 0; i < g.size(); ++i)
      if (wr.mask[i]) lhs += wr.residual.values[i] * v.values[i];
    Field adj = warp_adjoint(v, wr.mask, fl);
    double rhs = 0.0;
    for (int i = 0; i < g.size(); ++i) rhs += h.values[i] * adj.values[i];
    CHECK(lhs == doctest::Approx(rhs).epsilon(1e-12));
  }
}

TEST_CASE("guidance gradient matches finite differences of the residual energy") {
  Grid g(4, 4);
  const int k = g.size();
  RngStream rng(7);
  GaussianData data;
  data.mean = VectorXd::NullaryExpr(k, [&](int i) { return rng.normal(500 + i); });
  data.cov = random_spd(k, 31, 0.2);
  MatrixXd Q = random_spd(k, 32, 0.3);
  DenoiserPtr den = gaussian_denoiser(data, Q);

  FlowMap fl = flow_translate(g, 0.3 / 4, -0.2 / 4);
  Field h_prev = random_field(g, 41);
  VectorXd u = 2.0 * VectorXd::NullaryExpr(k, [&](int i) { return rng.normal(900 + i); });
  double t = 2.0;

  auto energy = [&](const VectorXd& uu) {
    Field h = vec_to_field(g, den->evaluate(uu, t));
    return warping_residual(h, h_prev, fl).e;
  };
  WarpResidual wr =
      warping_residual(vec_to_field(g, den->evaluate(u, t)), h_prev, fl);
  REQUIRE(wr.e > 0.0);
  VectorXd grad = guidance_gradient(*den, u, t, wr, fl);

  for (int probe = 0; probe < 5; ++probe) {
    VectorXd dir = VectorXd::NullaryExpr(
        k, [&](int i) { return rng.normal(2000 + 100 * probe + i); });
    dir.normalize();
    double eps = 1e-6;
    double fd = (energy(u + eps * dir) - energy(u - eps * dir)) / (2 * eps);
    double an = grad.dot(dir);
    CHECK(an == doctest::Approx(fd).epsilon(1e-4));
  }
}

TEST_CASE("video: lambda 0 reduces bitwise to per-frame sampling") {
  Grid g(8, 8);
  CirculantOp q = CirculantOp::se_kernel(g, 0.15);
  DenoiserPtr den = gaussian_circulant_denoiser(VectorXd::Zero(g.size()), 1.0, q);

  FlowSequence flows;
  flows.maps.push_back(flow_translate(g, 1.0 / 8, 0.0));
  flows.maps.push_back(flow_translate(g, 0.0, 1.0 / 8));

  VideoParams p;
  p.schedule = Schedule{10.0, 10};
  p.lambda = 0.0;
  p.scheme = WarpScheme::Fixed;
  p.seed = 5;
  VideoResult res = sample_video(g, flows, {den}, p);
  REQUIRE(res.frames.size() == 3);

  // replay the scheme's noise chain and sample each frame independently
  Field noise = warp_resample(g, p.sampler, p.seed);
  for (int j = 0; j < 3; ++j) {
    if (j > 0) noise = warp_fixed(noise, flows.maps[j - 1]);
    VectorXd u_tau = p.schedule.sigma(p.schedule.tau) * field_to_vec(noise);
    FrameResult fr = sample_frame(u_tau, p.schedule, *den);
    CHECK((fr.u0 - field_to_vec(res.frames[j])).norm() == 0.0);
  }
  for (const auto& l : res.log) CHECK(l.skipped);
}

TEST_CASE("video: frame 0 is unaffected by the guidance strength") {
  Grid g(8, 8);
  CirculantOp q = CirculantOp::se_kernel(g, 0.15);
  DenoiserPtr den = gaussian_circulant_denoiser(VectorXd::Zero(g.size()), 1.0, q);
  FlowSequence flows;
  flows.maps.push_back(flow_translate(g, 1.0 / 8, 0.0));

  VideoParams p;
  p.schedule = Schedule{10.0, 8};
  p.scheme = WarpScheme::Bilinear;
  p.seed = 9;
  p.lambda = 0.0;
  VideoResult off = sample_video(g, flows, {den}, p);
  p.lambda = 1.0;
  VideoResult on = sample_video(g, flows, {den}, p);
  CHECK((field_to_vec(on.frames[0]) - field_to_vec(off.frames[0])).norm() == 0.0);
}

TEST_CASE("video: gp scheme with identity flows repeats the first frame") {
  Grid g(8, 8);
  CirculantOp q = CirculantOp::se_kernel(g, 0.15);
  DenoiserPtr den = gaussian_circulant_denoiser(VectorXd::Zero(g.size()), 1.0, q);
  FlowSequence flows;
  flows.maps.push_back(flow_identity(g));
  flows.maps.push_back(flow_identity(g));

  VideoParams p;
  p.schedule = Schedule{10.0, 10};
  p.lambda = 1.0;  // residual stays at zero, so the guard must skip it
  p.scheme = WarpScheme::Gp;
  p.sampler.kind = NoiseKind::Gp;
  p.sampler.spec.length_scale = default_length_scale(8);
  p.sampler.features = 500;
  p.seed = 3;
  VideoResult res = sample_video(g, flows, {den}, p);
  CHECK((field_to_vec(res.frames[1]) - field_to_vec(res.frames[0])).norm() == 0.0);
  CHECK((field_to_vec(res.frames[2]) - field_to_vec(res.frames[0])).norm() == 0.0);
  for (const auto& l : res.log)
    if (l.frame > 0) {
      CHECK(l.skipped);
      CHECK(l.e <= 1e-20);
    }
}

TEST_CASE("video: guidance engages and keeps the state finite") {
  Grid g(8, 8);
  CirculantOp q = CirculantOp::se_kernel(g, 0.15);
  DenoiserPtr base = gaussian_circulant_denoiser(VectorXd::Zero(g.size()), 1.0, q);
  DenoiserPtr den = perturbed_denoiser(base, smooth_gain_field(g, 77));
  FlowSequence flows;
  flows.maps.push_back(flow_translate(g, 0.6 / 8, 0.0));
  flows.maps.push_back(flow_translate(g, 0.6 / 8, 0.0));

  VideoParams p;
  p.schedule = Schedule{10.0, 12};
  p.lambda = 0.2;
  p.scheme = WarpScheme::Bilinear;
  p.seed = 13;
  VideoResult res = sample_video(g, flows, {den}, p);
  int engaged = 0;
  for (const auto& l : res.log)
    if (l.frame > 0 && !l.skipped) {
      ++engaged;
      CHECK(l.grad_norm > 0.0);
      CHECK(std::isfinite(l.e));
    }
  CHECK(engaged > 0);
  for (const auto& f : res.frames)
    for (double v : f.values) CHECK(std::isfinite(v));
}

TEST_CASE("step log csv round trip") {
  std::vector<StepLog> log = {{0, 0, 10.0, 0.0, 0.0, true},
                              {1, 0, 10.0, 0.25, 1.5, false}};
  std::string path = "step_log_test.csv";
  write_step_log_csv(log, path);
  std::ifstream in(path);
  std::string line;
  REQUIRE(std::getline(in, line));
  CHECK(line == "frame,step,t,e,grad_norm,skipped");
  int rows = 0;
  while (std::getline(in, line)) ++rows;
  CHECK(rows == 2);
  std::remove(path.c_str());
}
