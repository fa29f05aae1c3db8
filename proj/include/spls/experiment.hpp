#pragma once

#include <iosfwd>
#include <limits>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

#include "spls/datagen.hpp"
#include "spls/diffusion.hpp"
#include "spls/gha.hpp"
#include "spls/msg.hpp"
#include "spls/phases.hpp"

namespace spls {

enum class Algorithm { gha, msg, both };
enum class InitKind { saddle, random_sphere, given };

struct ExperimentConfig {
  // synthetic model; ignored when csv_x is set
  Mat latent_xx;
  Vec latent_xy;
  Mat latent_yy;
  std::size_t m = 3;
  std::size_t d = 3;
  std::uint64_t model_seed = 2024;

  std::string csv_x;
  std::string csv_y;
  bool csv_header = false;
  bool csv_center = true;

  Algorithm algorithm = Algorithm::gha;
  double eta = std::numeric_limits<double>::quiet_NaN();  // NaN: 5e-5, or p²·1e-4 with masking
  Schedule schedule = Schedule::constant;
  bool renormalize = false;
  double observe_prob = 1.0;
  double msg_eta_c = 0.05;  // η_k = c/√k
  double gap_fraction = 0.05;

  std::size_t n_iters = 200000;
  std::size_t n_seeds = 100;
  std::uint64_t base_seed = 1;

  InitKind init = InitKind::saddle;
  std::size_t init_index = 2;
  Vec init_u;
  Vec init_v;

  std::size_t log_stride = 1000;
  std::vector<std::size_t> log_at{10, 100, 1000, 100000, 150000, 200000};
  std::vector<std::size_t> log_h{1, 2};
  bool log_objective = true;
  bool log_alignment = true;
  bool log_tail = false;

  double mu_exponent = 0.75;
  double nu = 0.1;
  double epsilon = 0.01;

  std::string output_dir = "out";
  bool parallel = true;

  // η actually used by GHA.
  double effective_eta() const;
  StepConfig step_config() const;
  bool uses_csv() const { return !csv_x.empty(); }
  // Throws ConfigError naming the offending field.
  void validate() const;
};

// Synthetic-experiment defaults (latent blocks, η = 5e-5, n = 2e5, 100
// seeds, second singular pair as the start).
ExperimentConfig default_config();

// Overlays the keys of `j` on `base`; unknown keys are rejected.
ExperimentConfig config_from_json(const nlohmann::json& j, ExperimentConfig base = default_config());
nlohmann::json to_json(const ExperimentConfig& cfg);

const char* to_string(Algorithm a);
const char* to_string(InitKind k);

// Everything derived from the config that all seeds share.
struct Problem {
  std::shared_ptr<const CovarianceModel> model;  // null for CSV data
  std::shared_ptr<const std::vector<TwoViewSample>> data;
  Mat sigma_xy;
  SpectralBasis basis;
  Vec u_hat;
  Vec v_hat;
  double lambda1 = 0.0;
};

Problem build_problem(const ExperimentConfig& cfg);

// Seed-specific generators: the stream, the mask draws, the random start.
Rng stream_rng(std::uint64_t seed);
std::uint64_t mask_seed(std::uint64_t seed);

std::unique_ptr<SampleSource> make_stream(const Problem& p, std::uint64_t seed);
PlsIterate make_init(const ExperimentConfig& cfg, const Problem& p, std::uint64_t seed);

struct SeedResult {
  std::uint64_t seed = 0;
  Trajectory traj;
  PlsIterate final_iterate;
  PhaseCrossings crossings;
  double final_alignment = 0.0;
  double final_objective = 0.0;
  double final_h1_sq = 0.0;
};

struct ExperimentResult {
  ExperimentConfig cfg;
  std::vector<SeedResult> seeds;  // sorted by seed
  std::optional<PhasePrediction> prediction;
  std::optional<PhaseReport> phases;
};

// Runs every seed of a GHA or MSG experiment. Seeds run on the OpenMP pool
// when cfg.parallel is set; results do not depend on scheduling.
ExperimentResult run_experiment(const ExperimentConfig& cfg);

// trajectories.csv, summary.json and (when h-coordinates exist)
// phase_report.json.
void write_artifacts(const ExperimentResult& r, const std::string& dir);

struct CompareSeed {
  std::uint64_t seed = 0;
  Trajectory gha;  // coord objective_gap
  Trajectory msg;
  std::optional<std::size_t> gha_hit;  // first k with gap ≤ gap_fraction·λ₁
  std::optional<std::size_t> msg_hit;
  double gha_seconds_per_1k = 0.0;
  double msg_seconds_per_1k = 0.0;
  std::uint64_t gha_checksum = 0;
  std::uint64_t msg_checksum = 0;
};

struct CompareResult {
  ExperimentConfig cfg;
  double threshold = 0.0;
  std::vector<CompareSeed> seeds;
};

// GHA (constant η) against MSG (η_k = c/√k, M₀ = 0) on identical streams.
// Seeds run serially so the timings are not perturbed by each other.
CompareResult compare_algorithms(const ExperimentConfig& cfg);

// comparison.csv and compare_summary.json.
void write_comparison(const CompareResult& r, const std::string& dir);

// 64-bit FNV-1a over the raw bytes of x and y.
std::uint64_t sample_checksum(std::uint64_t h, const TwoViewSample& s);

struct OuJudgeSpec {
  std::string coord;                     // e.g. "h1"
  std::vector<std::size_t> checkpoints;  // iterations
  double eta = 5e-5;
  double z0 = 0.0;  // initial value on the z = η^{-1/2} h scale
  double gap = 2.0;
  double beta = 0.0;
  OuPhase phase = OuPhase::escape;
  bool stationary = false;  // converge phase: compare against t = ∞
};

// At each checkpoint: per-seed z = η^{-1/2}·coord, sample mean/variance,
// O-U mean/variance and a z-score for the variance. Needs ≥ 30 runs.
nlohmann::json ou_distribution_report(std::span<const Trajectory> trajs, const OuJudgeSpec& spec);

// The two standard judges for a synthetic run: h1 escaping the saddle
// at 10/100/1000 and h2 at 1e5/1.5e5/2e5 against the stationary law.
std::vector<OuJudgeSpec> default_ou_judges(const ExperimentConfig& cfg, const Problem& p);

// Reads long-format CSV back into per-seed trajectories.
std::vector<Trajectory> read_trajectories_csv(std::istream& in);

}  // namespace spls
