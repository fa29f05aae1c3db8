#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace spls {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;
using Rng = std::mt19937_64;

// Error taxonomy. The CLI maps InvalidInput/ConfigError to exit code 2 and
// NumericalFailure to exit code 3.
class InvalidInput : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class ConfigError : public InvalidInput {
 public:
  ConfigError(const std::string& field, const std::string& what)
      : InvalidInput("config field '" + field + "': " + what), field_(field) {}
  const std::string& field() const { return field_; }

 private:
  std::string field_;
};

class ParseError : public InvalidInput {
 public:
  ParseError(const std::string& what, std::size_t line)
      : InvalidInput(what), line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

class NumericalFailure : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Leading singular pair is not unique (λ₁ − λ₂ below tolerance).
class Unidentifiable : public NumericalFailure {
 public:
  using NumericalFailure::NumericalFailure;
};

// Phase-III precondition (λ₁−λ₂)ε > 8ηφ does not hold.
class StepSizeTooLarge : public NumericalFailure {
 public:
  using NumericalFailure::NumericalFailure;
};

class StreamExhausted : public std::runtime_error {
 public:
  StreamExhausted(std::size_t completed, std::size_t requested)
      : std::runtime_error("sample stream exhausted after " +
                           std::to_string(completed) + " of " +
                           std::to_string(requested) + " iterations"),
        completed_(completed) {}
  std::size_t completed() const { return completed_; }

 private:
  std::size_t completed_;
};

// One observation pair. Masks use true = observed; unobserved entries are
// stored as exact zeros.
struct TwoViewSample {
  Vec x;
  Vec y;
  std::optional<std::vector<bool>> mask_x;
  std::optional<std::vector<bool>> mask_y;

  bool has_mask() const { return mask_x.has_value() || mask_y.has_value(); }
};

struct PlsIterate {
  Vec u;
  Vec v;
  std::size_t step_count = 0;
};

// Latent second/fourth moments: gamma_i = Var(X̄_i), omega_i = Var(Ȳ_i),
// alpha_ij = E[X̄_i Ȳ_i X̄_j Ȳ_j], all indexed 0..d-1.
struct LatentMoments {
  Vec gamma;
  Vec omega;
  Mat alpha;

  std::size_t dim() const { return static_cast<std::size_t>(gamma.size()); }
};

// Pull-style sample stream. next() returns false once exhausted.
class SampleSource {
 public:
  virtual ~SampleSource() = default;
  virtual bool next(TwoViewSample& out) = 0;
  virtual std::size_t dim_x() const = 0;
  virtual std::size_t dim_y() const = 0;
};

}  // namespace spls
