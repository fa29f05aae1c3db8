#pragma once

#include <iosfwd>
#include <memory>
#include <span>
#include <string>

#include "spls/types.hpp"

namespace spls {

// Jointly Gaussian two-view model built from latent covariances and
// orthogonal mixing:
//   Cov(X) = Uᵀ Σ_X̄X̄ U,  Cov(X,Y) = Uᵀ pad(Σ_X̄Ȳ) V,  Cov(Y) = Vᵀ Σ_ȲȲ V.
struct CovarianceModel {
  std::size_t m = 0;
  std::size_t d = 0;
  Mat sigma_latent_xx;  // m×m
  Mat sigma_latent_yy;  // d×d
  Vec sigma_latent_xy;  // diagonal, length d
  Mat mix_u;            // m×m orthogonal
  Mat mix_v;            // d×d orthogonal
  Mat sigma_xy;         // m×d
  Mat joint_cov;        // (m+d)×(m+d), after PSD repair
  Mat chol;             // lower factor of joint_cov
  Mat latent_chol;      // lower factor of the latent joint covariance
  LatentMoments moments;
  std::uint64_t seed = 0;
};

// Draws Ũ, Ṽ with i.i.d. N(0,1) entries from `seed`, orthonormalizes them
// and assembles the model. Requires d ≤ m.
CovarianceModel build_model(const Mat& sigma_latent_xx, const Vec& sigma_latent_xy,
                            const Mat& sigma_latent_yy, std::size_t m, std::size_t d,
                            std::uint64_t seed);

// Same as build_model but with caller-supplied orthogonal mixing matrices.
CovarianceModel build_model_with_mixing(const Mat& sigma_latent_xx,
                                        const Vec& sigma_latent_xy,
                                        const Mat& sigma_latent_yy, const Mat& mix_u,
                                        const Mat& mix_v);

// Latent blocks of the synthetic experiment: Σ_X̄X̄ = Σ_ȲȲ with 6 on the
// diagonal and Σ_X̄Ȳ = diag(4, 2, 0.5).
struct LatentSpec {
  Mat sigma_xx;
  Vec sigma_xy;
  Mat sigma_yy;
};
LatentSpec default_latent_spec();

// Gaussian moments by Isserlis' identity:
//   alpha_ij = λ_i λ_j + (Σ_X̄X̄)_ij (Σ_ȲȲ)_ij + (Σ_X̄Ȳ)_ij (Σ_X̄Ȳ)_ji.
LatentMoments isserlis_moments(const Mat& sigma_latent_xx, const Vec& sigma_latent_xy,
                               const Mat& sigma_latent_yy);

// Symmetrizes, clips eigenvalues in [-tol, 0) to zero and returns a lower
// Cholesky factor (adding 1e-12 diagonal jitter if needed). Throws
// InvalidInput when the smallest eigenvalue is below -tol.
Mat psd_cholesky(const Mat& cov, double tol = 1e-8, Mat* repaired = nullptr);

// Single draw z = chol·ξ split into (x, y). Reuses the buffers in `out`.
void sample_into(const CovarianceModel& model, Rng& rng, TwoViewSample& out);
TwoViewSample sample(const CovarianceModel& model, Rng& rng);

// Keeps each coordinate independently with probability p; dropped entries
// are zeroed and flagged false in the masks.
TwoViewSample mask(const TwoViewSample& s, double p, Rng& rng);
void mask_in_place(TwoViewSample& s, double p, Rng& rng);

// Endless sampler over a shared model; owns its generator.
class GaussianSampler : public SampleSource {
 public:
  GaussianSampler(std::shared_ptr<const CovarianceModel> model, Rng rng)
      : model_(std::move(model)), rng_(std::move(rng)) {}

  bool next(TwoViewSample& out) override {
    sample_into(*model_, rng_, out);
    return true;
  }
  std::size_t dim_x() const override { return model_->m; }
  std::size_t dim_y() const override { return model_->d; }

 private:
  std::shared_ptr<const CovarianceModel> model_;
  Rng rng_;
};

// Finite, replayable stream over stored samples.
class ReplaySource : public SampleSource {
 public:
  explicit ReplaySource(std::shared_ptr<const std::vector<TwoViewSample>> samples)
      : samples_(std::move(samples)) {}

  bool next(TwoViewSample& out) override;
  std::size_t dim_x() const override;
  std::size_t dim_y() const override;
  void rewind() { pos_ = 0; }
  std::size_t size() const { return samples_->size(); }
  const std::vector<TwoViewSample>& samples() const { return *samples_; }

 private:
  std::shared_ptr<const std::vector<TwoViewSample>> samples_;
  std::size_t pos_ = 0;
};

struct CsvOptions {
  bool header = false;
  bool center = true;
};

// Loads paired views, one row per observation, comma separated. Throws
// ParseError (with 1-based line numbers) on malformed cells or a row-count
// mismatch.
ReplaySource load_two_view_csv(const std::string& path_x, const std::string& path_y,
                               const CsvOptions& opts = {});

// Parses one view from a stream; exposed for in-memory tests.
std::vector<Vec> read_view_csv(std::istream& in, bool header, const std::string& label);

// Writes rows with 17 significant digits.
void write_view_csv(std::ostream& out, std::span<const Vec> rows);

}  // namespace spls
