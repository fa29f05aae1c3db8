#include "spls/experiment.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstring>
#include <exception>
#include <filesystem>
#include <fstream>
#include <istream>
#include <map>
#include <sstream>

#include "spls/oracle.hpp"

namespace spls {

using nlohmann::json;

double ExperimentConfig::effective_eta() const {
  if (!std::isnan(eta)) return eta;
  if (observe_prob < 1.0) return observe_prob * observe_prob * 1e-4;
  return 5e-5;
}

StepConfig ExperimentConfig::step_config() const {
  StepConfig s;
  s.schedule = schedule;
  s.eta = effective_eta();
  s.renormalize = renormalize;
  s.observe_prob = observe_prob;
  return s;
}

void ExperimentConfig::validate() const {
  if (n_iters < 1) throw ConfigError("n_iters", "must be ≥ 1");
  if (n_seeds < 1) throw ConfigError("n_seeds", "must be ≥ 1");
  if (log_stride < 1) throw ConfigError("log.stride", "must be ≥ 1");
  if (!std::isnan(eta) && !(eta >= 0.0 && std::isfinite(eta))) {
    throw ConfigError("eta", "must be finite and ≥ 0");
  }
  if (!(observe_prob > 0.0 && observe_prob <= 1.0)) {
    throw ConfigError("observe_prob", "must lie in (0,1]");
  }
  if (observe_prob < 1.0 && algorithm != Algorithm::gha) {
    throw ConfigError("observe_prob", "missing values are only supported for algorithm gha");
  }
  if (!(msg_eta_c >= 0.0)) throw ConfigError("msg_eta_c", "must be ≥ 0");
  if (!(gap_fraction > 0.0)) throw ConfigError("gap_fraction", "must be > 0");
  if (!(mu_exponent > 0.0)) throw ConfigError("mu_exponent", "must be > 0");
  if (!(nu > 0.0 && nu < 1.0)) throw ConfigError("nu", "must lie in (0,1)");
  if (!(epsilon > 0.0 && epsilon < 1.0)) throw ConfigError("epsilon", "must lie in (0,1)");

  if (uses_csv()) {
    if (csv_y.empty()) throw ConfigError("csv.y", "required when csv.x is set");
  } else {
    if (d < 1 || m < d) throw ConfigError("model.d", "need 1 ≤ d ≤ m");
    if (latent_xx.rows() != static_cast<Eigen::Index>(m) || latent_xx.cols() != latent_xx.rows()) {
      throw ConfigError("model.sigma_latent_xx", "must be m×m");
    }
    if (latent_yy.rows() != static_cast<Eigen::Index>(d) || latent_yy.cols() != latent_yy.rows()) {
      throw ConfigError("model.sigma_latent_yy", "must be d×d");
    }
    if (latent_xy.size() != static_cast<Eigen::Index>(d)) {
      throw ConfigError("model.sigma_latent_xy", "must have length d");
    }
    for (auto h : log_h) {
      if (h < 1 || h > m + d) throw ConfigError("log.h", "indices must lie in 1..m+d");
    }
    if (init == InitKind::saddle && (init_index < 1 || init_index > d)) {
      throw ConfigError("init_index", "must lie in 1..min(m,d)");
    }
    if (init == InitKind::given) {
      if (init_u.size() != static_cast<Eigen::Index>(m)) throw ConfigError("init_u", "must have length m");
      if (init_v.size() != static_cast<Eigen::Index>(d)) throw ConfigError("init_v", "must have length d");
    }
  }
  if (init == InitKind::given) {
    if (std::abs(init_u.norm() - 1.0) > 1e-6) throw ConfigError("init_u", "must be a unit vector");
    if (std::abs(init_v.norm() - 1.0) > 1e-6) throw ConfigError("init_v", "must be a unit vector");
  }
}

ExperimentConfig default_config() {
  ExperimentConfig c;
  const LatentSpec spec = default_latent_spec();
  c.latent_xx = spec.sigma_xx;
  c.latent_xy = spec.sigma_xy;
  c.latent_yy = spec.sigma_yy;
  return c;
}

const char* to_string(Algorithm a) {
  switch (a) {
    case Algorithm::gha: return "gha";
    case Algorithm::msg: return "msg";
    case Algorithm::both: return "both";
  }
  return "?";
}

const char* to_string(InitKind k) {
  switch (k) {
    case InitKind::saddle: return "saddle";
    case InitKind::random_sphere: return "random_sphere";
    case InitKind::given: return "given";
  }
  return "?";
}

namespace {

const char* schedule_name(Schedule s) {
  switch (s) {
    case Schedule::constant: return "constant";
    case Schedule::inverse: return "inverse";
    case Schedule::inverse_sqrt: return "inverse_sqrt";
  }
  return "?";
}

template <class T>
T take(const json& j, const std::string& field) {
  try {
    return j.get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(field, std::string("wrong type (") + e.what() + ")");
  }
}

std::size_t take_count(const json& j, const std::string& field) {
  if (!j.is_number_integer() || j.get<std::int64_t>() < 0) {
    throw ConfigError(field, "must be a nonnegative integer");
  }
  return j.get<std::size_t>();
}

Vec take_vec(const json& j, const std::string& field) {
  const auto v = take<std::vector<double>>(j, field);
  return Eigen::Map<const Vec>(v.data(), static_cast<Eigen::Index>(v.size()));
}

Mat take_mat(const json& j, const std::string& field) {
  const auto rows = take<std::vector<std::vector<double>>>(j, field);
  if (rows.empty()) throw ConfigError(field, "empty matrix");
  Mat out(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows[0].size()));
  for (std::size_t r = 0; r < rows.size(); ++r) {
    if (rows[r].size() != rows[0].size()) throw ConfigError(field, "ragged rows");
    for (std::size_t c = 0; c < rows[r].size(); ++c) {
      out(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = rows[r][c];
    }
  }
  return out;
}

template <class E>
E take_enum(const json& j, const std::string& field,
            std::initializer_list<std::pair<const char*, E>> names) {
  const auto s = take<std::string>(j, field);
  for (const auto& [n, e] : names) {
    if (s == n) return e;
  }
  throw ConfigError(field, "unknown value '" + s + "'");
}

json vec_json(const Vec& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

json mat_json(const Mat& m) {
  json rows = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) rows.push_back(vec_json(m.row(r).transpose()));
  return rows;
}

}  // namespace

ExperimentConfig config_from_json(const json& j, ExperimentConfig c) {
  if (!j.is_object()) throw ConfigError("<root>", "config must be a JSON object");
  for (const auto& [key, val] : j.items()) {
    if (key == "model") {
      for (const auto& [k, v] : val.items()) {
        const std::string f = "model." + k;
        if (k == "m") c.m = take_count(v, f);
        else if (k == "d") c.d = take_count(v, f);
        else if (k == "seed") c.model_seed = take_count(v, f);
        else if (k == "sigma_latent_xx") c.latent_xx = take_mat(v, f);
        else if (k == "sigma_latent_xy") c.latent_xy = take_vec(v, f);
        else if (k == "sigma_latent_yy") c.latent_yy = take_mat(v, f);
        else throw ConfigError(f, "unknown key");
      }
    } else if (key == "csv") {
      for (const auto& [k, v] : val.items()) {
        const std::string f = "csv." + k;
        if (k == "x") c.csv_x = take<std::string>(v, f);
        else if (k == "y") c.csv_y = take<std::string>(v, f);
        else if (k == "header") c.csv_header = take<bool>(v, f);
        else if (k == "center") c.csv_center = take<bool>(v, f);
        else throw ConfigError(f, "unknown key");
      }
    } else if (key == "log") {
      for (const auto& [k, v] : val.items()) {
        const std::string f = "log." + k;
        if (k == "stride") c.log_stride = take_count(v, f);
        else if (k == "at") c.log_at = take<std::vector<std::size_t>>(v, f);
        else if (k == "h") c.log_h = take<std::vector<std::size_t>>(v, f);
        else if (k == "objective") c.log_objective = take<bool>(v, f);
        else if (k == "alignment") c.log_alignment = take<bool>(v, f);
        else if (k == "tail") c.log_tail = take<bool>(v, f);
        else throw ConfigError(f, "unknown key");
      }
    } else if (key == "algorithm") {
      c.algorithm = take_enum<Algorithm>(
          val, key, {{"gha", Algorithm::gha}, {"msg", Algorithm::msg}, {"both", Algorithm::both}});
    } else if (key == "schedule") {
      c.schedule = take_enum<Schedule>(val, key,
                                       {{"constant", Schedule::constant},
                                        {"inverse", Schedule::inverse},
                                        {"inverse_sqrt", Schedule::inverse_sqrt}});
    } else if (key == "init") {
      c.init = take_enum<InitKind>(val, key,
                                   {{"saddle", InitKind::saddle},
                                    {"random_sphere", InitKind::random_sphere},
                                    {"given", InitKind::given}});
    } else if (key == "eta") {
      c.eta = val.is_null() ? std::numeric_limits<double>::quiet_NaN() : take<double>(val, key);
    } else if (key == "renormalize") c.renormalize = take<bool>(val, key);
    else if (key == "observe_prob") c.observe_prob = take<double>(val, key);
    else if (key == "msg_eta_c") c.msg_eta_c = take<double>(val, key);
    else if (key == "gap_fraction") c.gap_fraction = take<double>(val, key);
    else if (key == "n_iters") c.n_iters = take_count(val, key);
    else if (key == "n_seeds") c.n_seeds = take_count(val, key);
    else if (key == "base_seed") c.base_seed = take_count(val, key);
    else if (key == "init_index") c.init_index = take_count(val, key);
    else if (key == "init_u") c.init_u = take_vec(val, key);
    else if (key == "init_v") c.init_v = take_vec(val, key);
    else if (key == "mu_exponent") c.mu_exponent = take<double>(val, key);
    else if (key == "nu") c.nu = take<double>(val, key);
    else if (key == "epsilon") c.epsilon = take<double>(val, key);
    else if (key == "output_dir") c.output_dir = take<std::string>(val, key);
    else if (key == "parallel") c.parallel = take<bool>(val, key);
    else throw ConfigError(key, "unknown key");
  }
  return c;
}

json to_json(const ExperimentConfig& c) {
  json j;
  if (c.uses_csv()) {
    j["csv"] = {{"x", c.csv_x}, {"y", c.csv_y}, {"header", c.csv_header}, {"center", c.csv_center}};
  } else {
    j["model"] = {{"m", c.m},
                  {"d", c.d},
                  {"seed", c.model_seed},
                  {"sigma_latent_xx", mat_json(c.latent_xx)},
                  {"sigma_latent_xy", vec_json(c.latent_xy)},
                  {"sigma_latent_yy", mat_json(c.latent_yy)}};
  }
  j["algorithm"] = to_string(c.algorithm);
  j["eta"] = c.effective_eta();
  j["schedule"] = schedule_name(c.schedule);
  j["renormalize"] = c.renormalize;
  j["observe_prob"] = c.observe_prob;
  j["msg_eta_c"] = c.msg_eta_c;
  j["gap_fraction"] = c.gap_fraction;
  j["n_iters"] = c.n_iters;
  j["n_seeds"] = c.n_seeds;
  j["base_seed"] = c.base_seed;
  j["init"] = to_string(c.init);
  if (c.init == InitKind::saddle) j["init_index"] = c.init_index;
  if (c.init == InitKind::given) {
    j["init_u"] = vec_json(c.init_u);
    j["init_v"] = vec_json(c.init_v);
  }
  j["log"] = {{"stride", c.log_stride},   {"at", c.log_at},
              {"h", c.log_h},             {"objective", c.log_objective},
              {"alignment", c.log_alignment}, {"tail", c.log_tail}};
  j["mu_exponent"] = c.mu_exponent;
  j["nu"] = c.nu;
  j["epsilon"] = c.epsilon;
  return j;
}

Problem build_problem(const ExperimentConfig& cfg) {
  cfg.validate();
  Problem p;
  if (cfg.uses_csv()) {
    ReplaySource src = load_two_view_csv(cfg.csv_x, cfg.csv_y, {cfg.csv_header, cfg.csv_center});
    p.data = std::make_shared<const std::vector<TwoViewSample>>(src.samples());
    p.sigma_xy = oracle::empirical_cov(*p.data);
    const auto n = static_cast<std::size_t>(p.sigma_xy.rows() + p.sigma_xy.cols());
    for (auto h : cfg.log_h) {
      if (h < 1 || h > n) throw ConfigError("log.h", "indices must lie in 1..m+d");
    }
    const auto k = static_cast<std::size_t>(std::min(p.sigma_xy.rows(), p.sigma_xy.cols()));
    if (cfg.init == InitKind::saddle && (cfg.init_index < 1 || cfg.init_index > k)) {
      throw ConfigError("init_index", "must lie in 1..min(m,d)");
    }
  } else {
    p.model = std::make_shared<const CovarianceModel>(build_model(
        cfg.latent_xx, cfg.latent_xy, cfg.latent_yy, cfg.m, cfg.d, cfg.model_seed));
    p.sigma_xy = p.model->sigma_xy;
  }
  p.basis = build_basis(p.sigma_xy);
  p.u_hat = p.basis.o_x.col(0);
  p.v_hat = p.basis.o_y.col(0);
  p.lambda1 = p.basis.singular(0);
  return p;
}

namespace {

std::seed_seq seq_for(std::uint64_t seed, std::uint32_t stream) {
  return std::seed_seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                       stream};
}

}  // namespace

Rng stream_rng(std::uint64_t seed) {
  auto s = seq_for(seed, 1);
  return Rng(s);
}

std::uint64_t mask_seed(std::uint64_t seed) {
  auto s = seq_for(seed, 2);
  return Rng(s)();
}

std::unique_ptr<SampleSource> make_stream(const Problem& p, std::uint64_t seed) {
  if (p.model) return std::make_unique<GaussianSampler>(p.model, stream_rng(seed));
  return std::make_unique<ReplaySource>(p.data);
}

PlsIterate make_init(const ExperimentConfig& cfg, const Problem& p, std::uint64_t seed) {
  PlsIterate it;
  switch (cfg.init) {
    case InitKind::saddle: {
      const auto j = static_cast<Eigen::Index>(cfg.init_index - 1);
      it.u = p.basis.o_x.col(j);
      it.v = p.basis.o_y.col(j);
      break;
    }
    case InitKind::random_sphere: {
      auto s = seq_for(seed, 3);
      Rng rng(s);
      std::normal_distribution<double> nd;
      it.u = Vec(p.sigma_xy.rows());
      it.v = Vec(p.sigma_xy.cols());
      for (Eigen::Index i = 0; i < it.u.size(); ++i) it.u(i) = nd(rng);
      for (Eigen::Index i = 0; i < it.v.size(); ++i) it.v(i) = nd(rng);
      it.u.normalize();
      it.v.normalize();
      break;
    }
    case InitKind::given:
      if (cfg.init_u.size() != p.sigma_xy.rows()) throw ConfigError("init_u", "must have length m");
      if (cfg.init_v.size() != p.sigma_xy.cols()) throw ConfigError("init_v", "must have length d");
      it.u = cfg.init_u.normalized();
      it.v = cfg.init_v.normalized();
      break;
  }
  return it;
}

namespace {

SeedResult run_gha_seed(const ExperimentConfig& cfg, const Problem& p, std::uint64_t seed,
                        double delta) {
  SeedResult r;
  r.seed = seed;
  auto stream = make_stream(p, seed);
  const PlsIterate init = make_init(cfg, p, seed);

  LogSpec log;
  log.stride = cfg.log_stride;
  log.extra = cfg.log_at;
  log.h_indices = cfg.log_h;
  log.tail = cfg.log_tail;
  log.basis = &p.basis;
  log.objective = cfg.log_objective;
  log.sigma_xy = &p.sigma_xy;
  log.alignment = cfg.log_alignment;
  if (cfg.log_alignment) {
    log.u_hat = p.u_hat;
    log.v_hat = p.v_hat;
  }
  std::optional<PhaseDetector> det;
  if (!cfg.log_h.empty()) {
    det.emplace(delta, cfg.epsilon);
    log.on_step = [&](std::size_t k, const PlsIterate& it) { det->observe(k, to_h(it, p.basis)); };
  }
  r.traj = run_gha(*stream, init, cfg.step_config(), cfg.n_iters, log, mask_seed(seed),
                   &r.final_iterate);
  r.traj.seed = seed;
  if (det) r.crossings = det->crossings();
  r.final_alignment = alignment_error(r.final_iterate, p.u_hat, p.v_hat);
  r.final_objective = objective(r.final_iterate, p.sigma_xy);
  const Vec h = to_h(r.final_iterate, p.basis);
  r.final_h1_sq = h(0) * h(0);
  return r;
}

SeedResult run_msg_seed(const ExperimentConfig& cfg, const Problem& p, std::uint64_t seed) {
  SeedResult r;
  r.seed = seed;
  auto stream = make_stream(p, seed);
  Trajectory& t = r.traj;
  t.seed = seed;
  t.coord_names.emplace_back("objective_gap");
  if (cfg.log_alignment) t.coord_names.emplace_back("alignment_error");

  MsgIterate it{Mat::Zero(p.sigma_xy.rows(), p.sigma_xy.cols()), 0};
  std::vector<std::size_t> extra = cfg.log_at;
  std::sort(extra.begin(), extra.end());
  auto record = [&](std::size_t k) {
    t.iters.push_back(k);
    t.values.push_back(msg_objective_gap(it, p.sigma_xy, p.lambda1));
    if (cfg.log_alignment) {
      t.values.push_back(alignment_error(msg_leading_pair(it), p.u_hat, p.v_hat));
    }
  };
  record(0);
  TwoViewSample s;
  for (std::size_t k = 1; k <= cfg.n_iters; ++k) {
    if (!stream->next(s)) throw StreamExhausted(k - 1, cfg.n_iters);
    const double eta_k = cfg.msg_eta_c / std::sqrt(static_cast<double>(k));
    it.M = fantope_project(it.M + eta_k * s.x * s.y.transpose());
    ++it.step_count;
    if (k % cfg.log_stride == 0 || k == cfg.n_iters ||
        std::binary_search(extra.begin(), extra.end(), k)) {
      record(k);
    }
  }
  r.final_iterate = msg_leading_pair(it);
  r.final_alignment = alignment_error(r.final_iterate, p.u_hat, p.v_hat);
  r.final_objective = it.M.cwiseProduct(p.sigma_xy).sum();
  const Vec h = to_h(r.final_iterate, p.basis);
  r.final_h1_sq = h(0) * h(0);
  return r;
}

template <class F>
void for_each_seed(std::size_t n, bool parallel, F&& body) {
  std::vector<std::exception_ptr> errs(n);
  const auto ni = static_cast<std::int64_t>(n);
#pragma omp parallel for schedule(dynamic) if (parallel)
  for (std::int64_t s = 0; s < ni; ++s) {
    try {
      body(static_cast<std::size_t>(s));
    } catch (...) {
      errs[static_cast<std::size_t>(s)] = std::current_exception();
    }
  }
  for (auto& e : errs) {
    if (e) std::rethrow_exception(e);
  }
}

}  // namespace

ExperimentResult run_experiment(const ExperimentConfig& cfg) {
  if (cfg.algorithm == Algorithm::both) {
    throw ConfigError("algorithm", "use compare_algorithms for 'both'");
  }
  const Problem p = build_problem(cfg);
  ExperimentResult res;
  res.cfg = cfg;
  const double eta = cfg.effective_eta();
  const double delta = std::pow(eta, cfg.mu_exponent);

  if (p.model && cfg.algorithm == Algorithm::gha && eta > 0.0) {
    res.prediction = phase_times_partial(p.basis.singular, p.model->moments, eta, cfg.nu,
                                         cfg.epsilon, cfg.mu_exponent);
  }

  res.seeds.resize(cfg.n_seeds);
  for_each_seed(cfg.n_seeds, cfg.parallel, [&](std::size_t s) {
    const std::uint64_t seed = cfg.base_seed + s;
    res.seeds[s] = cfg.algorithm == Algorithm::gha ? run_gha_seed(cfg, p, seed, delta)
                                                   : run_msg_seed(cfg, p, seed);
  });

  if (cfg.algorithm == Algorithm::gha && !cfg.log_h.empty()) {
    std::vector<std::uint64_t> seeds;
    std::vector<PhaseCrossings> cross;
    for (const auto& s : res.seeds) {
      seeds.push_back(s.seed);
      cross.push_back(s.crossings);
    }
    res.phases = summarize_phases(seeds, cross, delta, cfg.epsilon,
                                  res.prediction ? &*res.prediction : nullptr);
  }
  return res;
}

namespace {

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InvalidInput("cannot open " + path.string() + " for writing");
  return out;
}

}  // namespace

void write_artifacts(const ExperimentResult& r, const std::string& dir) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  {
    std::vector<Trajectory> trajs;
    trajs.reserve(r.seeds.size());
    for (const auto& s : r.seeds) trajs.push_back(s.traj);
    auto out = open_out(fs::path(dir) / "trajectories.csv");
    write_trajectories_csv(out, trajs);
  }
  {
    json seeds = json::array();
    std::size_t good = 0;
    for (const auto& s : r.seeds) {
      if (s.final_h1_sq >= 0.99) ++good;
      seeds.push_back({{"seed", s.seed},
                       {"final_alignment_error", s.final_alignment},
                       {"final_objective", s.final_objective},
                       {"final_h1_sq", s.final_h1_sq},
                       {"final_u", vec_json(s.final_iterate.u)},
                       {"final_v", vec_json(s.final_iterate.v)}});
    }
    json j;
    j["config"] = to_json(r.cfg);
    j["n_seeds"] = r.seeds.size();
    j["seeds_h1_sq_ge_0.99"] = good;
    j["per_seed"] = std::move(seeds);
    auto out = open_out(fs::path(dir) / "summary.json");
    out << j.dump(2) << '\n';
  }
  if (r.phases) {
    json j;
    j["report"] = to_json(*r.phases);
    j["prediction"] = r.prediction ? to_json(*r.prediction) : json(nullptr);
    auto out = open_out(fs::path(dir) / "phase_report.json");
    out << j.dump(2) << '\n';
  }
}

std::uint64_t sample_checksum(std::uint64_t h, const TwoViewSample& s) {
  auto mix = [&h](const Vec& v) {
    const auto* bytes = reinterpret_cast<const unsigned char*>(v.data());
    const std::size_t n = static_cast<std::size_t>(v.size()) * sizeof(double);
    for (std::size_t i = 0; i < n; ++i) {
      h ^= bytes[i];
      h *= 0x100000001b3ULL;
    }
  };
  mix(s.x);
  mix(s.y);
  return h;
}

CompareResult compare_algorithms(const ExperimentConfig& cfg) {
  const Problem p = build_problem(cfg);
  CompareResult res;
  res.cfg = cfg;
  res.threshold = cfg.gap_fraction * p.lambda1;
  const StepConfig step = cfg.step_config();
  using clock = std::chrono::steady_clock;
  constexpr std::uint64_t kFnvBasis = 0xcbf29ce484222325ULL;

  for (std::size_t si = 0; si < cfg.n_seeds; ++si) {
    CompareSeed cs;
    cs.seed = cfg.base_seed + si;
    cs.gha.seed = cs.msg.seed = cs.seed;
    cs.gha.coord_names = {"objective_gap"};
    cs.msg.coord_names = {"objective_gap"};
    const double n = static_cast<double>(cfg.n_iters);

    {
      auto stream = make_stream(p, cs.seed);
      PlsIterate it = make_init(cfg, p, cs.seed);
      std::uint64_t sum = kFnvBasis;
      TwoViewSample s;
      auto gap = [&] { return p.lambda1 - it.u.dot(p.sigma_xy * it.v); };
      cs.gha.iters.push_back(0);
      cs.gha.values.push_back(gap());
      const auto t0 = clock::now();
      for (std::size_t k = 1; k <= cfg.n_iters; ++k) {
        if (!stream->next(s)) throw StreamExhausted(k - 1, cfg.n_iters);
        sum = sample_checksum(sum, s);
        gha_update(it.u, it.v, s.x, s.y, step.eta_at(k));
        const double g = gap();
        if (!cs.gha_hit && g <= res.threshold) cs.gha_hit = k;
        if (k % cfg.log_stride == 0 || k == cfg.n_iters) {
          cs.gha.iters.push_back(k);
          cs.gha.values.push_back(g);
        }
      }
      cs.gha_seconds_per_1k = std::chrono::duration<double>(clock::now() - t0).count() / n * 1e3;
      cs.gha_checksum = sum;
    }
    {
      auto stream = make_stream(p, cs.seed);
      Mat m = Mat::Zero(p.sigma_xy.rows(), p.sigma_xy.cols());
      std::uint64_t sum = kFnvBasis;
      TwoViewSample s;
      auto gap = [&] { return p.lambda1 - m.cwiseProduct(p.sigma_xy).sum(); };
      cs.msg.iters.push_back(0);
      cs.msg.values.push_back(gap());
      const auto t0 = clock::now();
      for (std::size_t k = 1; k <= cfg.n_iters; ++k) {
        if (!stream->next(s)) throw StreamExhausted(k - 1, cfg.n_iters);
        sum = sample_checksum(sum, s);
        const double eta_k = cfg.msg_eta_c / std::sqrt(static_cast<double>(k));
        m = fantope_project(m + eta_k * s.x * s.y.transpose());
        const double g = gap();
        if (!cs.msg_hit && g <= res.threshold) cs.msg_hit = k;
        if (k % cfg.log_stride == 0 || k == cfg.n_iters) {
          cs.msg.iters.push_back(k);
          cs.msg.values.push_back(g);
        }
      }
      cs.msg_seconds_per_1k = std::chrono::duration<double>(clock::now() - t0).count() / n * 1e3;
      cs.msg_checksum = sum;
    }
    res.seeds.push_back(std::move(cs));
  }
  return res;
}

void write_comparison(const CompareResult& r, const std::string& dir) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  std::vector<Trajectory> g, m;
  for (const auto& s : r.seeds) {
    g.push_back(s.gha);
    m.push_back(s.msg);
  }
  {
    auto out = open_out(fs::path(dir) / "comparison_gha.csv");
    write_trajectories_csv(out, g);
  }
  {
    auto out = open_out(fs::path(dir) / "comparison_msg.csv");
    write_trajectories_csv(out, m);
  }
  auto opt = [](const std::optional<std::size_t>& v) { return v ? json(*v) : json(nullptr); };
  json seeds = json::array();
  std::size_t gha_fewer = 0;
  for (const auto& s : r.seeds) {
    const bool fewer = s.gha_hit && (!s.msg_hit || *s.gha_hit < *s.msg_hit);
    if (fewer) ++gha_fewer;
    seeds.push_back({{"seed", s.seed},
                     {"gha_iterations_to_threshold", opt(s.gha_hit)},
                     {"msg_iterations_to_threshold", opt(s.msg_hit)},
                     {"gha_seconds_per_1k", s.gha_seconds_per_1k},
                     {"msg_seconds_per_1k", s.msg_seconds_per_1k},
                     {"gha_stream_checksum", s.gha_checksum},
                     {"msg_stream_checksum", s.msg_checksum}});
  }
  json j;
  j["config"] = to_json(r.cfg);
  j["threshold"] = r.threshold;
  j["seeds_gha_fewer_iterations"] = gha_fewer;
  j["per_seed"] = std::move(seeds);
  auto out = open_out(fs::path(dir) / "compare_summary.json");
  out << j.dump(2) << '\n';
}

json ou_distribution_report(std::span<const Trajectory> trajs, const OuJudgeSpec& spec) {
  if (trajs.size() < 30) {
    throw InvalidInput("ou_distribution_report: need at least 30 runs, got " +
                       std::to_string(trajs.size()));
  }
  if (!(spec.eta > 0.0)) throw InvalidInput("ou_distribution_report: eta must be > 0");
  const double scale = 1.0 / std::sqrt(spec.eta);
  const double n = static_cast<double>(trajs.size());

  json cps = json::array();
  for (const std::size_t k : spec.checkpoints) {
    std::vector<double> z;
    z.reserve(trajs.size());
    for (const auto& t : trajs) {
      const std::size_t col = t.column(spec.coord);
      const auto it = std::find(t.iters.begin(), t.iters.end(), k);
      if (it == t.iters.end()) {
        throw InvalidInput("ou_distribution_report: iteration " + std::to_string(k) +
                           " was not logged for seed " + std::to_string(t.seed));
      }
      z.push_back(scale * t.at(static_cast<std::size_t>(it - t.iters.begin()), col));
    }
    double mean = 0.0;
    for (double v : z) mean += v;
    mean /= n;
    double var = 0.0;
    for (double v : z) var += (v - mean) * (v - mean);
    var /= n - 1.0;

    OuMoments th;
    if (spec.gap > 0.0) {
      const double t = spec.stationary ? std::numeric_limits<double>::infinity()
                                       : spec.eta * static_cast<double>(k);
      th = ou_moments(spec.z0, spec.gap, spec.beta, t, spec.phase);
    } else {
      th = {spec.z0, random_walk_variance(spec.beta, spec.eta * static_cast<double>(k))};
    }
    json c;
    c["iter"] = k;
    c["values"] = z;
    c["mean"] = mean;
    c["var"] = var;
    c["theory_mean"] = th.mean;
    c["theory_var"] = th.var;
    if (th.var > 0.0) {
      c["var_ratio"] = var / th.var;
      c["var_z"] = (var - th.var) / (th.var * std::sqrt(2.0 / (n - 1.0)));
    } else {
      c["var_ratio"] = nullptr;
      c["var_z"] = var == 0.0 ? json(0.0) : json(nullptr);
    }
    cps.push_back(std::move(c));
  }
  json j;
  j["coord"] = spec.coord;
  j["scale"] = "z = coord / sqrt(eta)";
  j["phase"] = spec.phase == OuPhase::escape ? "escape" : "converge";
  j["stationary"] = spec.stationary;
  j["eta"] = spec.eta;
  j["z0"] = spec.z0;
  j["gap"] = spec.gap;
  j["beta"] = spec.beta;
  j["n_runs"] = trajs.size();
  j["checkpoints"] = std::move(cps);
  return j;
}

std::vector<OuJudgeSpec> default_ou_judges(const ExperimentConfig& cfg, const Problem& p) {
  if (!p.model) throw InvalidInput("default_ou_judges: needs a synthetic model for the moments");
  const double eta = cfg.effective_eta();
  const double gap = p.basis.singular(0) - p.basis.singular(1);
  const LatentMoments& mom = p.model->moments;
  auto within = [&](std::initializer_list<std::size_t> ks) {
    std::vector<std::size_t> out;
    for (auto k : ks) {
      if (k <= cfg.n_iters) out.push_back(k);
    }
    return out;
  };
  OuJudgeSpec early;
  early.coord = "h1";
  early.checkpoints = within({10, 100, 1000});
  early.eta = eta;
  early.gap = gap;
  early.beta = beta_coeff(1, 2, mom, mom.dim());
  early.phase = OuPhase::escape;

  OuJudgeSpec late;
  late.coord = "h2";
  late.checkpoints = within({100000, 150000, 200000});
  late.eta = eta;
  late.gap = gap;
  late.beta = beta_coeff(2, 1, mom, mom.dim());
  late.phase = OuPhase::converge;
  late.stationary = true;
  return {early, late};
}

std::vector<Trajectory> read_trajectories_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line != "iter,coord_name,value,seed") {
    throw ParseError("trajectories: expected header 'iter,coord_name,value,seed'", 1);
  }
  std::vector<Trajectory> out;
  std::map<std::uint64_t, std::size_t> index;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string f_iter, name, f_val, f_seed;
    if (!std::getline(ss, f_iter, ',') || !std::getline(ss, name, ',') ||
        !std::getline(ss, f_val, ',') || !std::getline(ss, f_seed)) {
      throw ParseError("trajectories: line " + std::to_string(lineno) + " needs 4 fields", lineno);
    }
    std::size_t k;
    std::uint64_t seed;
    double value;
    try {
      k = std::stoull(f_iter);
      seed = std::stoull(f_seed);
      value = std::stod(f_val);
    } catch (const std::exception&) {
      throw ParseError("trajectories: line " + std::to_string(lineno) + " is not numeric", lineno);
    }
    auto [pos, fresh] = index.try_emplace(seed, out.size());
    if (fresh) {
      out.emplace_back();
      out.back().seed = seed;
    }
    Trajectory& t = out[pos->second];
    if (t.iters.empty() || t.iters.back() != k) {
      if (!t.iters.empty() && t.values.size() != t.iters.size() * t.coord_names.size()) {
        throw ParseError("trajectories: ragged row before line " + std::to_string(lineno), lineno);
      }
      t.iters.push_back(k);
    }
    if (t.iters.size() == 1) {
      t.coord_names.push_back(name);
    } else {
      const std::size_t c = t.values.size() - (t.iters.size() - 1) * t.coord_names.size();
      if (c >= t.coord_names.size() || t.coord_names[c] != name) {
        throw ParseError("trajectories: unexpected coordinate '" + name + "' at line " +
                             std::to_string(lineno),
                         lineno);
      }
    }
    t.values.push_back(value);
  }
  return out;
}

}  // namespace spls
