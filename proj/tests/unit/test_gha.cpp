#include "doctest.h"

#include <cmath>
#include <limits>
#include <sstream>

#include "spls/datagen.hpp"
#include "spls/diffusion.hpp"
#include "spls/gha.hpp"
#include "spls/oracle.hpp"

using namespace spls;

namespace {

Vec e(Eigen::Index n, Eigen::Index i) { return Vec::Unit(n, i); }

TwoViewSample make(const Vec& x, const Vec& y) { return {x, y, {}, {}}; }

Vec unit_random(Eigen::Index n, Rng& rng) {
  std::normal_distribution<double> nd;
  Vec v(n);
  for (Eigen::Index i = 0; i < n; ++i) v(i) = nd(rng);
  return v.normalized();
}

std::shared_ptr<const CovarianceModel> synthetic_model() {
  const LatentSpec ls = default_latent_spec();
  return std::make_shared<const CovarianceModel>(
      build_model(ls.sigma_xx, ls.sigma_xy, ls.sigma_yy, 3, 3, 2024));
}

// the update written out coordinate by coordinate
PlsIterate scalar_step(const PlsIterate& it, const Vec& x, const Vec& y, double eta) {
  double ux = 0, yv = 0;
  for (Eigen::Index i = 0; i < x.size(); ++i) ux += it.u(i) * x(i);
  for (Eigen::Index i = 0; i < y.size(); ++i) yv += y(i) * it.v(i);
  PlsIterate out = it;
  for (Eigen::Index i = 0; i < x.size(); ++i) out.u(i) = it.u(i) + eta * (x(i) * yv - ux * yv * it.u(i));
  for (Eigen::Index i = 0; i < y.size(); ++i) out.v(i) = it.v(i) + eta * (y(i) * ux - ux * yv * it.v(i));
  return out;
}

}  // namespace

TEST_CASE("gha_step examples") {
  const PlsIterate aligned{e(2, 0), e(2, 0), 0};
  auto r = gha_step(aligned, make(e(2, 0), e(2, 0)), 0.1);
  CHECK(r.u == e(2, 0));
  CHECK(r.v == e(2, 0));
  CHECK(r.step_count == 1);

  Rng rng(1);
  const PlsIterate any{unit_random(4, rng), unit_random(3, rng), 0};
  const auto s = make(unit_random(4, rng) * 3, unit_random(3, rng));
  r = gha_step(any, s, 0.0);
  CHECK(r.u == any.u);
  CHECK(r.v == any.v);

  r = gha_step(aligned, make(e(2, 0), e(2, 1)), 0.1);
  CHECK(r.u(0) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(r.u(1) == 0.0);
  CHECK(r.v(0) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(r.v(1) == doctest::Approx(0.1).epsilon(1e-15));
}

TEST_CASE("gha_step matches the scalar form and is simultaneous") {
  Rng rng(2);
  for (int t = 0; t < 100; ++t) {
    const PlsIterate it{unit_random(5, rng), unit_random(4, rng), 0};
    const Vec x = unit_random(5, rng) * 2.0, y = unit_random(4, rng) * 1.5;
    const auto got = gha_step(it, make(x, y), 0.05);
    const auto want = scalar_step(it, x, y, 0.05);
    CHECK((got.u - want.u).cwiseAbs().maxCoeff() < 1e-14);
    CHECK((got.v - want.v).cwiseAbs().maxCoeff() < 1e-14);
  }
}

TEST_CASE("gha_step rejects bad input") {
  const PlsIterate it{e(2, 0), e(2, 0), 0};
  CHECK_THROWS_AS(gha_step(it, make(e(3, 0), e(2, 0)), 0.1), InvalidInput);
  Vec bad = e(2, 0);
  bad(1) = std::numeric_limits<double>::infinity();
  CHECK_THROWS_AS(gha_step(it, make(bad, e(2, 0)), 0.1), InvalidInput);
  CHECK_THROWS_AS(gha_step(it, make(e(2, 0), e(2, 0)), -0.1), InvalidInput);
}

TEST_CASE("renormalize keeps the iterate on the sphere") {
  Rng rng(3);
  const PlsIterate it{unit_random(4, rng), unit_random(4, rng), 0};
  const auto r = gha_step(it, make(unit_random(4, rng) * 5, unit_random(4, rng) * 5), 0.3, true);
  CHECK(std::abs(r.u.norm() - 1.0) < 1e-15);
  CHECK(std::abs(r.v.norm() - 1.0) < 1e-15);
}

TEST_CASE("gha_step_missing examples") {
  const PlsIterate it{e(2, 0), e(2, 0), 0};
  TwoViewSample s = make(e(2, 0), e(2, 1));
  s.mask_x = std::vector<bool>{true, false};
  s.mask_y = std::vector<bool>{true, true};
  const auto r = gha_step_missing(it, s, 0.2);
  CHECK(r.u == e(2, 0));
  CHECK(r.v(0) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(r.v(1) == doctest::Approx(0.2).epsilon(1e-15));

  // x fully masked: nothing moves
  TwoViewSample z = make(Vec::Zero(2), e(2, 1));
  z.mask_x = std::vector<bool>{false, false};
  const auto r0 = gha_step_missing(it, z, 0.5);
  CHECK(r0.u == it.u);
  CHECK(r0.v == it.v);

  // masks must exist and be honoured
  CHECK_THROWS_AS(gha_step_missing(it, make(e(2, 0), e(2, 1)), 0.1), InvalidInput);
  TwoViewSample lying = make(e(2, 0), e(2, 1));
  lying.mask_x = std::vector<bool>{false, true};
  CHECK_THROWS_AS(gha_step_missing(it, lying, 0.1), InvalidInput);
}

TEST_CASE("fully observed masks reproduce gha_step bitwise") {
  const auto model = synthetic_model();
  Rng rng(4), mrng(5);
  PlsIterate a{unit_random(3, rng), unit_random(3, rng), 0}, b = a;
  for (int k = 0; k < 1000; ++k) {
    TwoViewSample s = sample(*model, rng);
    TwoViewSample m = mask(s, 1.0, mrng);
    a = gha_step(a, s, 0.01);
    b = gha_step_missing(b, m, 0.01);
    REQUIRE(a.u == b.u);
    REQUIRE(a.v == b.v);
  }
}

TEST_CASE("norm drift identity holds to machine precision") {
  Rng rng(6);
  const double eps = std::numeric_limits<double>::epsilon();
  std::uniform_int_distribution<int> dim(1, 50);
  std::uniform_real_distribution<double> step(1e-4, 0.5);
  for (int t = 0; t < 1000; ++t) {
    const int m = dim(rng), d = dim(rng);
    const PlsIterate it{unit_random(m, rng), unit_random(d, rng), 0};
    const Vec x = unit_random(m, rng), y = unit_random(d, rng);
    const double eta = step(rng);
    const double c = it.u.dot(x) * y.dot(it.v);
    const Vec ru = x * y.dot(it.v) - c * it.u;
    const Vec rv = y * it.u.dot(x) - c * it.v;
    const auto r = gha_step(it, make(x, y), eta);
    CHECK(std::abs(r.u.squaredNorm() - 1.0 - eta * eta * ru.squaredNorm()) <= 8 * eps);
    CHECK(std::abs(r.v.squaredNorm() - 1.0 - eta * eta * rv.squaredNorm()) <= 8 * eps);
  }
}

TEST_CASE("sphere drift over a fixed horizon shrinks with the step size") {
  // same sample path, t = ηN fixed: max |‖u_k‖² − 1| at η and η/2
  const auto model = synthetic_model();
  const double eta = 2e-3, horizon = 2.0;
  double ratio_sum = 0;
  const int seeds = 20;
  for (int sd = 0; sd < seeds; ++sd) {
    Rng rng(100 + sd);
    const auto n2 = static_cast<std::size_t>(horizon / (eta / 2));
    std::vector<TwoViewSample> path(n2);
    for (auto& s : path) sample_into(*model, rng, s);
    Rng irng(500 + sd);
    const PlsIterate init{unit_random(3, irng), unit_random(3, irng), 0};
    // coarse run: one step of η on every other sample
    PlsIterate a = init, b = init;
    double wa = 0, wb = 0;
    for (std::size_t k = 0; k < n2; k += 2) {
      a = gha_step(a, path[k], eta);
      wa = std::max(wa, std::abs(a.u.squaredNorm() - 1.0));
    }
    for (std::size_t k = 0; k < n2; ++k) {
      b = gha_step(b, path[k], eta / 2);
      wb = std::max(wb, std::abs(b.u.squaredNorm() - 1.0));
    }
    ratio_sum += wa / wb;
  }
  const double ratio = ratio_sum / seeds;
  MESSAGE("mean drift ratio " << ratio);
  CHECK(ratio >= 1.5);
  CHECK(ratio <= 3.0);
}

TEST_CASE("successor depends only on state, sample and step") {
  const auto model = synthetic_model();
  Rng rng(7);
  PlsIterate it{unit_random(3, rng), unit_random(3, rng), 0};
  std::vector<PlsIterate> states;
  std::vector<TwoViewSample> samples;
  for (int k = 0; k < 200; ++k) {
    states.push_back(it);
    samples.push_back(sample(*model, rng));
    it = gha_step(it, samples.back(), 1e-2);
  }
  states.push_back(it);
  for (int k = 0; k < 200; k += 17) {
    const auto again = gha_step(states[k], samples[k], 1e-2);
    CHECK(again.u == states[k + 1].u);
    CHECK(again.v == states[k + 1].v);
  }
}

TEST_CASE("deterministic unit-singular stream leaves the optimum fixed") {
  Rng rng(8);
  const Vec uh = unit_random(4, rng), vh = unit_random(3, rng);
  PlsIterate it{uh, vh, 0};
  for (int k = 0; k < 1000; ++k) it = gha_step(it, make(uh, vh), 0.1);
  CHECK((it.u - uh).cwiseAbs().maxCoeff() < 1e-13);
  CHECK((it.v - vh).cwiseAbs().maxCoeff() < 1e-13);
}

TEST_CASE("objective and alignment error") {
  const auto model = synthetic_model();
  const auto sv = oracle::svd(model->sigma_xy);
  const PlsIterate top{sv.o_x.col(0), sv.o_y.col(0), 0};
  const PlsIterate second{sv.o_x.col(1), sv.o_y.col(1), 0};
  CHECK(objective(top, model->sigma_xy) == doctest::Approx(4.0).epsilon(1e-10));
  CHECK(objective(second, model->sigma_xy) == doctest::Approx(2.0).epsilon(1e-10));

  // left null space of a rank-deficient Σ
  Mat s = Mat::Zero(3, 2);
  s(0, 0) = 1.0;
  CHECK(objective({e(3, 2), Vec::Ones(2).normalized(), 0}, s) == 0.0);
  CHECK_THROWS_AS(objective({e(2, 0), e(2, 0), 0}, s), InvalidInput);

  CHECK(alignment_error(top, sv.o_x.col(0), sv.o_y.col(0)) == 0.0);
  CHECK(alignment_error({-sv.o_x.col(0), -sv.o_y.col(0), 0}, sv.o_x.col(0), sv.o_y.col(0)) == 0.0);
  CHECK(alignment_error({e(3, 0), e(3, 1), 0}, e(3, 1), e(3, 1)) == doctest::Approx(2.0));
}

TEST_CASE("step schedules") {
  StepConfig c;
  c.eta = 0.1;
  CHECK(c.eta_at(7) == 0.1);
  c.schedule = Schedule::inverse;
  CHECK(c.eta_at(4) == doctest::Approx(0.025));
  c.schedule = Schedule::inverse_sqrt;
  CHECK(c.eta_at(4) == doctest::Approx(0.05));
  c.observe_prob = 0.0;
  CHECK_THROWS_AS(c.validate(), InvalidInput);
}

TEST_CASE("run_gha: one step, logging, determinism") {
  const auto model = synthetic_model();
  const SpectralBasis basis = build_basis(model->sigma_xy);
  const PlsIterate init{basis.o_x.col(1), basis.o_y.col(1), 0};
  StepConfig cfg;
  cfg.eta = 5e-3;

  LogSpec log;
  log.h_indices = {1, 2};
  log.basis = &basis;
  log.objective = true;
  log.sigma_xy = &model->sigma_xy;
  log.norms = true;

  GaussianSampler s1(model, Rng(9));
  PlsIterate fin;
  const Trajectory t1 = run_gha(s1, init, cfg, 1, log, 0, &fin);
  CHECK(t1.rows() == 2);
  CHECK(t1.iters[0] == 0);
  CHECK(t1.iters[1] == 1);
  Rng r(9);
  const auto manual = gha_step(init, sample(*model, r), cfg.eta);
  CHECK(fin.u == manual.u);
  CHECK(t1.at(1, t1.column("objective")) == objective(manual, model->sigma_xy));
  CHECK(std::abs(t1.at(0, t1.column("h2")) - 1.0) < 1e-12);

  log.stride = 10;
  log.extra = {3, 15};
  GaussianSampler a(model, Rng(10)), b(model, Rng(10));
  const Trajectory ta = run_gha(a, init, cfg, 25, log);
  const Trajectory tb = run_gha(b, init, cfg, 25, log);
  CHECK(ta.values == tb.values);
  CHECK(ta.iters == std::vector<std::size_t>{0, 3, 10, 15, 20, 25});

  std::ostringstream oa, ob;
  write_trajectories_csv(oa, std::span<const Trajectory>(&ta, 1));
  write_trajectories_csv(ob, std::span<const Trajectory>(&tb, 1));
  CHECK(oa.str() == ob.str());
  CHECK(oa.str().rfind("iter,coord_name,value,seed\n0,h1,", 0) == 0);
}

TEST_CASE("run_gha reports stream exhaustion and bad logging requests") {
  auto data = std::make_shared<std::vector<TwoViewSample>>(5, make(e(2, 0), e(2, 0)));
  ReplaySource src(data);
  StepConfig cfg;
  try {
    run_gha(src, {e(2, 0), e(2, 1), 0}, cfg, 8, {});
    FAIL("expected exhaustion");
  } catch (const StreamExhausted& ex) {
    CHECK(ex.completed() == 5);
  }
  src.rewind();
  LogSpec log;
  log.h_indices = {1};
  CHECK_THROWS_AS(run_gha(src, {e(2, 0), e(2, 1), 0}, cfg, 1, log), InvalidInput);
  CHECK_THROWS_AS(run_gha(src, {e(2, 0), e(2, 1), 0}, cfg, 0, {}), InvalidInput);
}

TEST_CASE("run_gha with missing values uses masked samples") {
  const auto model = synthetic_model();
  StepConfig cfg;
  cfg.eta = 1e-3;
  cfg.observe_prob = 0.7;
  const PlsIterate init{e(3, 0), e(3, 0), 0};
  GaussianSampler a(model, Rng(11)), b(model, Rng(11));
  PlsIterate fa, fb;
  run_gha(a, init, cfg, 50, {}, 5, &fa);
  // replay by hand
  Rng srng(11), mrng(5);
  PlsIterate it = init;
  for (int k = 0; k < 50; ++k) {
    TwoViewSample s = sample(*model, srng);
    mask_in_place(s, 0.7, mrng);
    it = gha_step_missing(it, s, 1e-3);
  }
  CHECK(fa.u == it.u);
  run_gha(b, init, cfg, 50, {}, 6, &fb);
  CHECK(fa.u != fb.u);
}
