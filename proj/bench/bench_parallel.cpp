// Serial reference vs OpenMP versions of the three parallel kernels:
// the empirical cross-covariance reduction, batched O-U paths and
// multi-seed GHA runs. Each pair must agree before its timing counts.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <memory>

#include <omp.h>

#include "spls/datagen.hpp"
#include "spls/diffusion.hpp"
#include "spls/experiment.hpp"
#include "spls/oracle.hpp"

using namespace spls;
using clk = std::chrono::steady_clock;

template <class F>
static double seconds(F&& f) {
  const auto t0 = clk::now();
  f();
  return std::chrono::duration<double>(clk::now() - t0).count();
}

static void row(const char* name, double ts, double tp, bool agree) {
  std::printf("%-22s serial %8.4fs  parallel %8.4fs  speedup %5.2fx  %s\n", name, ts, tp,
              ts / tp, agree ? "agree" : "MISMATCH");
}

int main(int argc, char** argv) {
  const bool quick = argc > 1 && std::strcmp(argv[1], "--quick") == 0;
  std::printf("threads: %d\n", omp_get_max_threads());
  bool ok = true;

  // empirical_cov over a stored stream
  {
    const std::size_t n = quick ? 20000 : 1000000;
    const LatentSpec ls = default_latent_spec();
    auto model = build_model(ls.sigma_xx, ls.sigma_xy, ls.sigma_yy, 3, 3, 7);
    Rng rng(11);
    std::vector<TwoViewSample> data(n);
    for (auto& s : data) sample_into(model, rng, s);
    Mat a, b;
    const double ts = seconds([&] { a = oracle::empirical_cov(data); });
    const double tp = seconds([&] { b = oracle::empirical_cov_parallel(data); });
    const bool agree = (a - b).cwiseAbs().maxCoeff() <= 1e-12 * (1.0 + a.cwiseAbs().maxCoeff());
    ok = ok && agree;
    row("empirical_cov", ts, tp, agree);
  }

  // O-U terminal values
  {
    const std::size_t paths = quick ? 2000 : 100000;
    Vec a, b;
    const double ts = seconds(
        [&] { a = simulate_ou_terminal_serial(0.0, 2.0, 4.9, 0.5, 1e-3, paths, 3, OuPhase::escape); });
    const double tp =
        seconds([&] { b = simulate_ou_terminal(0.0, 2.0, 4.9, 0.5, 1e-3, paths, 3, OuPhase::escape); });
    const bool agree = a == b;
    ok = ok && agree;
    row("ou_paths", ts, tp, agree);
  }

  // seeds of the synthetic experiment
  {
    ExperimentConfig cfg = default_config();
    cfg.n_seeds = quick ? 4 : 32;
    cfg.n_iters = quick ? 5000 : 200000;
    cfg.log_stride = 1000;
    ExperimentResult a, b;
    cfg.parallel = false;
    const double ts = seconds([&] { a = run_experiment(cfg); });
    cfg.parallel = true;
    const double tp = seconds([&] { b = run_experiment(cfg); });
    bool agree = a.seeds.size() == b.seeds.size();
    for (std::size_t i = 0; agree && i < a.seeds.size(); ++i) {
      agree = a.seeds[i].traj.values == b.seeds[i].traj.values;
    }
    ok = ok && agree;
    row("gha_seeds", ts, tp, agree);
  }
  return ok ? 0 : 1;
}
