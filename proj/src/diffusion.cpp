#include "spls/diffusion.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include "spls/oracle.hpp"

namespace spls {

SpectralBasis build_basis(const Mat& sigma_xy) {
  const auto m = static_cast<std::size_t>(sigma_xy.rows());
  const auto d = static_cast<std::size_t>(sigma_xy.cols());
  if (m == 0 || d == 0) throw InvalidInput("build_basis: empty matrix");
  if (!sigma_xy.allFinite()) throw InvalidInput("build_basis: non-finite entries");

  const oracle::SvdResult sv = oracle::svd(sigma_xy);
  const Eigen::Index k = sv.singular.size();
  if (k >= 2 && sv.singular(0) - sv.singular(1) <= 1e-8) {
    throw Unidentifiable("leading singular value is not simple (λ₁ − λ₂ ≤ 1e-8)");
  }

  const Eigen::Index mi = static_cast<Eigen::Index>(m), di = static_cast<Eigen::Index>(d);
  const Eigen::Index n = mi + di;
  const Eigen::Index nz = n - 2 * k;  // null-space columns, |m − d|
  const double r = 1.0 / std::sqrt(2.0);

  SpectralBasis b;
  b.m = m;
  b.d = d;
  b.rect = m != d;
  b.singular = sv.singular;
  b.o_x = sv.o_x;
  b.o_y = sv.o_y;
  b.P = Mat::Zero(n, n);
  b.lambda = Vec::Zero(n);

  for (Eigen::Index j = 0; j < k; ++j) {
    b.P.col(j).head(mi) = r * sv.o_x.col(j);
    b.P.col(j).tail(di) = r * sv.o_y.col(j);
    b.lambda(j) = sv.singular(j);

    const Eigen::Index c = k + nz + j;
    b.P.col(c).head(mi) = r * sv.o_x.col(j);
    b.P.col(c).tail(di) = -r * sv.o_y.col(j);
    b.lambda(c) = -sv.singular(j);
  }
  // whichever side is larger carries the null-space completion
  for (Eigen::Index j = 0; j < nz; ++j) {
    if (mi > di) {
      b.P.col(k + j).head(mi) = sv.o_x.col(k + j);
    } else {
      b.P.col(k + j).tail(di) = sv.o_y.col(k + j);
    }
  }
  return b;
}

Vec to_h(const Vec& u, const Vec& v, const SpectralBasis& basis) {
  if (static_cast<std::size_t>(u.size()) != basis.m ||
      static_cast<std::size_t>(v.size()) != basis.d) {
    throw InvalidInput("to_h: dimension mismatch");
  }
  const double r = 1.0 / std::sqrt(2.0);
  const auto mi = static_cast<Eigen::Index>(basis.m);
  const auto di = static_cast<Eigen::Index>(basis.d);
  // Pᵀ w without materializing w
  return r * (basis.P.topRows(mi).transpose() * u + basis.P.bottomRows(di).transpose() * v);
}

Vec ode_rhs(const Vec& h, const Vec& lambda) {
  if (h.size() != lambda.size()) throw InvalidInput("ode_rhs: dimension mismatch");
  const Vec h2 = h.cwiseAbs2();
  const double mean_rate = lambda.dot(h2);
  const double mass = h2.sum();
  // Σ_j (λ_i − λ_j) h_j² = λ_i ‖h‖² − Σ_j λ_j h_j²
  return h.cwiseProduct(lambda * mass - Vec::Constant(h.size(), mean_rate));
}

Vec ode_solution(const Vec& h0, const Vec& lambda, double t) {
  if (h0.size() != lambda.size()) throw InvalidInput("ode_solution: dimension mismatch");
  if (!(t >= 0.0)) throw InvalidInput("ode_solution: t must be ≥ 0");
  if (std::abs(h0.norm() - 1.0) > 1e-8) throw InvalidInput("ode_solution: h0 must be a unit vector");

  double top = -std::numeric_limits<double>::infinity();
  for (Eigen::Index i = 0; i < h0.size(); ++i) {
    if (h0(i) != 0.0) top = std::max(top, lambda(i));
  }
  Vec h(h0.size());
  for (Eigen::Index i = 0; i < h0.size(); ++i) {
    h(i) = h0(i) == 0.0 ? 0.0 : h0(i) * std::exp((lambda(i) - top) * t);
  }
  return h / h.norm();
}

double beta_coeff(std::size_t i, std::size_t j, const LatentMoments& mom, std::size_t d) {
  if (mom.dim() != d) throw InvalidInput("beta_coeff: moments have the wrong dimension");
  if (i < 1 || j < 1 || i > 2 * d || j > 2 * d) {
    throw InvalidInput("beta_coeff: indices must lie in 1..2d");
  }
  const bool same_side = (i <= d) == (j <= d);
  const auto a = static_cast<Eigen::Index>((i - 1) % d);
  const auto c = static_cast<Eigen::Index>((j - 1) % d);
  const double cross = mom.gamma(a) * mom.omega(c) + mom.gamma(c) * mom.omega(a);
  const double rad = cross + (same_side ? 2.0 : -2.0) * mom.alpha(a, c);
  if (rad < 0.0) {
    throw InvalidInput("beta_coeff: negative radicand for (" + std::to_string(i) + ", " +
                       std::to_string(j) + ")");
  }
  return 0.5 * std::sqrt(rad);
}

OuMoments ou_moments(double z0, double gap, double beta, double t, OuPhase phase) {
  if (!(gap > 0.0)) throw InvalidInput("ou_moments: gap must be > 0 (use random_walk_variance)");
  if (!(t >= 0.0)) throw InvalidInput("ou_moments: t must be ≥ 0");
  const double scale = beta * beta / (2.0 * gap);
  if (phase == OuPhase::converge) {
    if (std::isinf(t)) return {0.0, scale};
    return {z0 * std::exp(-gap * t), scale * -std::expm1(-2.0 * gap * t)};
  }
  return {z0 * std::exp(gap * t), scale * std::expm1(2.0 * gap * t)};
}

double random_walk_variance(double beta, double t) {
  if (!(t >= 0.0)) throw InvalidInput("random_walk_variance: t must be ≥ 0");
  return beta * beta * t;
}

namespace {

std::size_t step_count(double t_end, double dt) {
  if (!(dt > 0.0)) throw InvalidInput("simulate_ou: dt must be > 0");
  if (!(t_end >= dt)) throw InvalidInput("simulate_ou: t_end must be ≥ dt");
  return static_cast<std::size_t>(std::llround(t_end / dt));
}

double drift_sign(OuPhase phase) { return phase == OuPhase::escape ? 1.0 : -1.0; }

double terminal(double z0, double rate, double noise, std::size_t steps, Rng& rng) {
  std::normal_distribution<double> nd;
  double z = z0;
  for (std::size_t s = 0; s < steps; ++s) z += rate * z + noise * nd(rng);
  return z;
}

Rng path_rng(std::uint64_t seed, std::size_t p) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(p), static_cast<std::uint32_t>(p >> 32)};
  return Rng(seq);
}

}  // namespace

std::vector<double> simulate_ou(double z0, double gap, double beta, double t_end, double dt,
                                Rng& rng, OuPhase phase) {
  if (gap < 0.0) throw InvalidInput("simulate_ou: gap must be ≥ 0");
  const std::size_t steps = step_count(t_end, dt);
  const double rate = drift_sign(phase) * gap * dt;
  const double noise = beta * std::sqrt(dt);
  std::normal_distribution<double> nd;
  std::vector<double> path(steps + 1);
  path[0] = z0;
  for (std::size_t s = 0; s < steps; ++s) path[s + 1] = path[s] + rate * path[s] + noise * nd(rng);
  return path;
}

Vec simulate_ou_terminal(double z0, double gap, double beta, double t_end, double dt,
                         std::size_t n_paths, std::uint64_t seed, OuPhase phase) {
  if (gap < 0.0) throw InvalidInput("simulate_ou: gap must be ≥ 0");
  const std::size_t steps = step_count(t_end, dt);
  const double rate = drift_sign(phase) * gap * dt;
  const double noise = beta * std::sqrt(dt);
  Vec out(static_cast<Eigen::Index>(n_paths));
  const auto np = static_cast<std::int64_t>(n_paths);
#pragma omp parallel for schedule(static)
  for (std::int64_t p = 0; p < np; ++p) {
    Rng rng = path_rng(seed, static_cast<std::size_t>(p));
    out(p) = terminal(z0, rate, noise, steps, rng);
  }
  return out;
}

Vec simulate_ou_terminal_serial(double z0, double gap, double beta, double t_end, double dt,
                                std::size_t n_paths, std::uint64_t seed, OuPhase phase) {
  if (gap < 0.0) throw InvalidInput("simulate_ou: gap must be ≥ 0");
  const std::size_t steps = step_count(t_end, dt);
  const double rate = drift_sign(phase) * gap * dt;
  const double noise = beta * std::sqrt(dt);
  Vec out(static_cast<Eigen::Index>(n_paths));
  for (std::size_t p = 0; p < n_paths; ++p) {
    Rng rng = path_rng(seed, p);
    out(static_cast<Eigen::Index>(p)) = terminal(z0, rate, noise, steps, rng);
  }
  return out;
}

double phi_coeff(const LatentMoments& mom) {
  const std::size_t d = mom.dim();
  double phi = 0.0;
  for (std::size_t i = 1; i <= d; ++i) {
    const double b = beta_coeff(i, 1, mom, d);
    phi += b * b;
  }
  return phi;
}

double escape_time(double gap, double beta12, double eta, double delta, double nu) {
  if (!(gap > 0.0)) throw InvalidInput("escape_time: eigengap must be > 0");
  if (!(eta > 0.0)) throw InvalidInput("escape_time: eta must be > 0");
  if (!(nu > 0.0 && nu < 1.0)) throw InvalidInput("escape_time: nu must lie in (0,1)");
  if (!(beta12 > 0.0)) throw InvalidInput("escape_time: beta12 must be > 0");
  const double q = oracle::inverse_normal_cdf((1.0 + nu / 2.0) / 2.0);
  return std::log1p(2.0 * delta * delta * gap / (eta * q * q * beta12 * beta12)) / gap;
}

double traverse_time(double gap, double delta) {
  if (!(gap > 0.0)) throw InvalidInput("traverse_time: eigengap must be > 0");
  if (!(delta > 0.0 && delta < 1.0)) throw InvalidInput("traverse_time: delta must lie in (0,1)");
  const double d2 = delta * delta;
  return std::log((1.0 - d2) / d2) / gap;
}

double convergence_time(double gap, double delta, double epsilon, double eta, double phi) {
  if (!(gap > 0.0)) throw InvalidInput("convergence_time: eigengap must be > 0");
  const double denom = gap * epsilon - 8.0 * eta * phi;
  if (!(denom > 0.0)) {
    throw StepSizeTooLarge("(λ₁−λ₂)ε > 8ηφ fails: (λ₁−λ₂)ε = " + std::to_string(gap * epsilon) +
                           ", 8ηφ = " + std::to_string(8.0 * eta * phi));
  }
  const double arg = gap * delta * delta / denom;
  // already inside the ε-ball once δ² ≤ ε − 8ηφ/g
  return arg <= 1.0 ? 0.0 : std::log(arg) / gap;
}

namespace {

std::uint64_t iterations(double t, double eta) {
  return static_cast<std::uint64_t>(std::ceil(t / eta));
}

PhasePrediction predict(const Vec& singular, const LatentMoments& mom, double eta, double nu,
                        double epsilon, double mu_exponent, bool strict) {
  if (singular.size() < 2) throw InvalidInput("phase_times: need at least two singular values");
  if (mom.dim() < 2) throw InvalidInput("phase_times: need at least two latent coordinates");
  if (!(eta > 0.0)) throw InvalidInput("phase_times: eta must be > 0");
  if (!(nu > 0.0 && nu < 1.0)) throw InvalidInput("phase_times: nu must lie in (0,1)");
  if (!(epsilon > 0.0 && epsilon < 1.0)) throw InvalidInput("phase_times: epsilon must lie in (0,1)");
  if (!(mu_exponent > 0.0)) throw InvalidInput("phase_times: mu_exponent must be > 0");

  PhasePrediction p;
  p.eta = eta;
  p.nu = nu;
  p.epsilon = epsilon;
  p.mu_exponent = mu_exponent;
  p.singular = singular;
  p.gap = singular(0) - singular(1);
  if (!(p.gap > 0.0)) throw Unidentifiable("phase_times: eigengap λ₁ − λ₂ must be > 0");
  p.delta = std::pow(eta, mu_exponent);
  p.beta12 = beta_coeff(1, 2, mom, mom.dim());
  p.phi = phi_coeff(mom);

  p.T1 = escape_time(p.gap, p.beta12, eta, p.delta, nu);
  p.T2 = traverse_time(p.gap, p.delta);
  p.N1 = iterations(p.T1, eta);
  p.N2 = iterations(p.T2, eta);
  try {
    p.T3 = convergence_time(p.gap, p.delta, epsilon, eta, p.phi);
    p.N3 = iterations(p.T3, eta);
    p.T_total = p.T1 + p.T2 + p.T3;
    p.N_total = p.N1 + p.N2 + p.N3;
  } catch (const StepSizeTooLarge& e) {
    if (strict) throw;
    p.phase3_defined = false;
    p.phase3_error = e.what();
    p.T3 = std::numeric_limits<double>::quiet_NaN();
    p.T_total = std::numeric_limits<double>::quiet_NaN();
  }
  return p;
}

}  // namespace

PhasePrediction phase_times(const Vec& singular, const LatentMoments& mom, double eta, double nu,
                            double epsilon, double mu_exponent) {
  return predict(singular, mom, eta, nu, epsilon, mu_exponent, true);
}

PhasePrediction phase_times_partial(const Vec& singular, const LatentMoments& mom, double eta,
                                    double nu, double epsilon, double mu_exponent) {
  return predict(singular, mom, eta, nu, epsilon, mu_exponent, false);
}

double recommended_eta(double epsilon, double lambda1, double lambda2, double phi) {
  if (!(epsilon > 0.0) || !(phi > 0.0)) throw InvalidInput("recommended_eta: inputs must be positive");
  if (!(lambda1 > lambda2)) throw InvalidInput("recommended_eta: need λ₁ > λ₂");
  return epsilon * (lambda1 - lambda2) / phi;
}

nlohmann::json to_json(const PhasePrediction& p) {
  using nlohmann::json;
  json j;
  j["eta"] = p.eta;
  j["nu"] = p.nu;
  j["epsilon"] = p.epsilon;
  j["mu_exponent"] = p.mu_exponent;
  j["delta"] = p.delta;
  j["phi"] = p.phi;
  j["beta12"] = p.beta12;
  j["eigengap"] = p.gap;
  j["lambda"] = std::vector<double>(p.singular.data(), p.singular.data() + p.singular.size());
  j["T1"] = p.T1;
  j["T2"] = p.T2;
  j["N1"] = p.N1;
  j["N2"] = p.N2;
  if (p.phase3_defined) {
    j["T3"] = p.T3;
    j["N3"] = p.N3;
    j["T_total"] = p.T_total;
    j["N_total"] = p.N_total;
  } else {
    j["T3"] = nullptr;
    j["N3"] = nullptr;
    j["T_total"] = nullptr;
    j["N_total"] = nullptr;
    j["phase3_error"] = p.phase3_error;
  }
  return j;
}

}  // namespace spls
