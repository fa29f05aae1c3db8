// spls: command-line front end for the streaming PLS experiments.
//
//   spls run       multi-seed GHA or MSG runs, writes trajectories/summary/phases
//   spls compare   GHA vs MSG on shared streams
//   spls landscape stationary points of the Lagrangian as JSON
//   spls predict   phase-time predictions as JSON
//   spls oujudge   O-U moment comparison at the standard checkpoints
//
// exit codes: 0 ok, 2 config/input error, 3 numerical failure

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "CLI11.hpp"
#include "json.hpp"

#include "spls/experiment.hpp"
#include "spls/landscape.hpp"

using nlohmann::json;
using namespace spls;

namespace {

struct Overrides {
  std::string config;
  double eta = 0, observe_prob = 0, epsilon = 0, nu = 0, mu = 0;
  std::size_t n_iters = 0, n_seeds = 0, init_index = 0, stride = 0;
  std::uint64_t base_seed = 0;
  std::string init, output, algorithm;
  bool serial = false;
  std::map<std::string, CLI::Option*> opts;

  void attach(CLI::App* app) {
    app->add_option("-c,--config", config, "JSON config file");
    opts["eta"] = app->add_option("--eta", eta, "step size");
    opts["observe_prob"] = app->add_option("--observe-prob", observe_prob, "keep probability p");
    opts["epsilon"] = app->add_option("--epsilon", epsilon, "target accuracy");
    opts["nu"] = app->add_option("--nu", nu, "confidence parameter");
    opts["mu"] = app->add_option("--mu", mu, "delta exponent");
    opts["n_iters"] = app->add_option("-n,--n-iters", n_iters, "iterations per seed");
    opts["n_seeds"] = app->add_option("-s,--n-seeds", n_seeds, "number of seeds");
    opts["base_seed"] = app->add_option("--base-seed", base_seed, "first seed");
    opts["init"] = app->add_option("--init", init, "saddle | random_sphere | given");
    opts["init_index"] = app->add_option("--init-index", init_index, "singular pair for saddle init");
    opts["stride"] = app->add_option("--stride", stride, "log stride");
    opts["output"] = app->add_option("-o,--output", output, "output directory");
    opts["algorithm"] = app->add_option("--algorithm", algorithm, "gha | msg | both");
    app->add_flag("--serial", serial, "run seeds on one thread");
  }

  bool given(const char* k) const { return opts.at(k)->count() > 0; }

  ExperimentConfig resolve() const {
    json j = json::object();
    if (!config.empty()) {
      std::ifstream in(config);
      if (!in) throw ConfigError("config", "cannot open " + config);
      try {
        j = json::parse(in);
      } catch (const json::parse_error& e) {
        throw ConfigError("config", e.what());
      }
    }
    if (given("eta")) j["eta"] = eta;
    if (given("observe_prob")) j["observe_prob"] = observe_prob;
    if (given("epsilon")) j["epsilon"] = epsilon;
    if (given("nu")) j["nu"] = nu;
    if (given("mu")) j["mu_exponent"] = mu;
    if (given("n_iters")) j["n_iters"] = n_iters;
    if (given("n_seeds")) j["n_seeds"] = n_seeds;
    if (given("base_seed")) j["base_seed"] = base_seed;
    if (given("init")) j["init"] = init;
    if (given("init_index")) j["init_index"] = init_index;
    if (given("stride")) j["log"]["stride"] = stride;
    if (given("output")) j["output_dir"] = output;
    if (given("algorithm")) j["algorithm"] = algorithm;
    if (serial) j["parallel"] = false;
    ExperimentConfig cfg = config_from_json(j);
    cfg.validate();
    return cfg;
  }
};

int cmd_run(const Overrides& o) {
  ExperimentConfig cfg = o.resolve();
  if (cfg.algorithm == Algorithm::both) {
    const CompareResult r = compare_algorithms(cfg);
    write_comparison(r, cfg.output_dir);
    std::cout << "wrote comparison for " << r.seeds.size() << " seeds to " << cfg.output_dir << "\n";
    return 0;
  }
  const ExperimentResult r = run_experiment(cfg);
  write_artifacts(r, cfg.output_dir);
  std::size_t good = 0;
  for (const auto& s : r.seeds) good += s.final_h1_sq >= 0.99;
  std::cout << r.seeds.size() << " seeds, " << good << " with final h1^2 >= 0.99\n";
  if (r.phases) {
    std::cout << "median escape " << r.phases->escape.median << ", arrival "
              << r.phases->arrival.median << ", convergence " << r.phases->convergence.median
              << "\n";
  }
  std::cout << "artifacts in " << cfg.output_dir << "\n";
  return 0;
}

int cmd_compare(const Overrides& o) {
  ExperimentConfig cfg = o.resolve();
  cfg.algorithm = Algorithm::both;
  const CompareResult r = compare_algorithms(cfg);
  write_comparison(r, cfg.output_dir);
  std::size_t fewer = 0;
  double tg = 0, tm = 0;
  for (const auto& s : r.seeds) {
    fewer += s.gha_hit && (!s.msg_hit || *s.gha_hit < *s.msg_hit);
    tg += s.gha_seconds_per_1k;
    tm += s.msg_seconds_per_1k;
  }
  const double n = static_cast<double>(r.seeds.size());
  std::cout << "GHA reached gap <= " << r.threshold << " first on " << fewer << "/" << r.seeds.size()
            << " seeds; s/1k iters: gha " << tg / n << ", msg " << tm / n << "\n";
  return 0;
}

int cmd_landscape(const Overrides& o) {
  const ExperimentConfig cfg = o.resolve();
  const Problem p = build_problem(cfg);
  json pts = json::array();
  for (const auto& sp : enumerate_stationary_points(p.sigma_xy)) {
    pts.push_back({{"kind", to_string(sp.kind)},
                   {"singular_value", sp.singular_value},
                   {"multiplier", sp.multiplier},
                   {"max_hessian_eig", sp.max_hessian_eig},
                   {"u", std::vector<double>(sp.u.data(), sp.u.data() + sp.u.size())},
                   {"v", std::vector<double>(sp.v.data(), sp.v.data() + sp.v.size())}});
  }
  std::cout << json{{"points", pts}}.dump(2) << "\n";
  return 0;
}

int cmd_predict(const Overrides& o, bool strict) {
  const ExperimentConfig cfg = o.resolve();
  const Problem p = build_problem(cfg);
  if (!p.model) throw ConfigError("model", "predict needs a synthetic model (latent moments)");
  const double eta = cfg.effective_eta();
  PhasePrediction pred =
      strict ? phase_times(p.basis.singular, p.model->moments, eta, cfg.nu, cfg.epsilon, cfg.mu_exponent)
             : phase_times_partial(p.basis.singular, p.model->moments, eta, cfg.nu, cfg.epsilon,
                                   cfg.mu_exponent);
  json j = to_json(pred);
  j["recommended_eta"] =
      recommended_eta(cfg.epsilon, p.basis.singular(0), p.basis.singular(1), pred.phi);
  std::cout << j.dump(2) << "\n";
  return 0;
}

int cmd_oujudge(const Overrides& o, const std::string& traj_path) {
  ExperimentConfig cfg = o.resolve();
  const Problem p = build_problem(cfg);
  std::vector<Trajectory> trajs;
  if (!traj_path.empty()) {
    std::ifstream in(traj_path);
    if (!in) throw InvalidInput("cannot open " + traj_path);
    trajs = read_trajectories_csv(in);
  } else {
    cfg.algorithm = Algorithm::gha;
    for (auto& r : run_experiment(cfg).seeds) trajs.push_back(std::move(r.traj));
  }
  json out = json::array();
  for (const auto& spec : default_ou_judges(cfg, p)) {
    if (!spec.checkpoints.empty()) out.push_back(ou_distribution_report(trajs, spec));
  }
  std::cout << out.dump(2) << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"streaming PLS: GHA, MSG and diffusion diagnostics"};
  app.require_subcommand(1);

  Overrides run_o, cmp_o, land_o, pred_o, ou_o;
  auto* run = app.add_subcommand("run", "multi-seed experiment");
  run_o.attach(run);
  auto* cmp = app.add_subcommand("compare", "GHA vs MSG on shared streams");
  cmp_o.attach(cmp);
  auto* land = app.add_subcommand("landscape", "stationary points and their stability");
  land_o.attach(land);
  auto* pred = app.add_subcommand("predict", "phase-time predictions");
  pred_o.attach(pred);
  bool strict = false;
  pred->add_flag("--strict", strict, "fail when phase III is undefined");
  auto* ou = app.add_subcommand("oujudge", "O-U moment comparison");
  ou_o.attach(ou);
  std::string traj_path;
  ou->add_option("--trajectories", traj_path, "reuse a trajectories.csv instead of running");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (*run) return cmd_run(run_o);
    if (*cmp) return cmd_compare(cmp_o);
    if (*land) return cmd_landscape(land_o);
    if (*pred) return cmd_predict(pred_o, strict);
    if (*ou) return cmd_oujudge(ou_o, traj_path);
  } catch (const InvalidInput& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const StreamExhausted& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const NumericalFailure& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return 3;
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
