#include "spls/gha.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <ostream>

#include "spls/datagen.hpp"
#include "spls/diffusion.hpp"

namespace spls {

double StepConfig::eta_at(std::size_t k) const {
  const double kk = static_cast<double>(k == 0 ? 1 : k);
  switch (schedule) {
    case Schedule::constant:
      return eta;
    case Schedule::inverse:
      return eta / kk;
    case Schedule::inverse_sqrt:
      return eta / std::sqrt(kk);
  }
  return eta;
}

void StepConfig::validate() const {
  if (!(eta >= 0.0) || !std::isfinite(eta)) throw InvalidInput("step size must be finite and ≥ 0");
  if (!(observe_prob > 0.0 && observe_prob <= 1.0)) {
    throw InvalidInput("observe_prob must lie in (0,1]");
  }
}

namespace {

void check_step_inputs(const PlsIterate& iter, const TwoViewSample& s, double eta) {
  if (iter.u.size() != s.x.size() || iter.v.size() != s.y.size()) {
    throw InvalidInput("gha_step: dimension mismatch between iterate and sample");
  }
  if (!s.x.allFinite() || !s.y.allFinite()) throw InvalidInput("gha_step: non-finite sample");
  if (!(eta >= 0.0) || !std::isfinite(eta)) throw InvalidInput("gha_step: step size must be ≥ 0");
}

void finish(PlsIterate& it, bool renormalize) {
  if (renormalize) {
    it.u.normalize();
    it.v.normalize();
  }
  ++it.step_count;
}

}  // namespace

PlsIterate gha_step(const PlsIterate& iter, const TwoViewSample& s, double eta,
                    bool renormalize) {
  check_step_inputs(iter, s, eta);
  PlsIterate next = iter;
  gha_update(next.u, next.v, s.x, s.y, eta);
  finish(next, renormalize);
  return next;
}

PlsIterate gha_step_missing(const PlsIterate& iter, const TwoViewSample& s, double eta_p,
                            bool renormalize) {
  check_step_inputs(iter, s, eta_p);
  if (!s.has_mask()) throw InvalidInput("gha_step_missing: sample carries no mask");
  auto check = [](const Vec& v, const std::optional<std::vector<bool>>& mk) {
    if (!mk) return;
    if (mk->size() != static_cast<std::size_t>(v.size())) {
      throw InvalidInput("gha_step_missing: mask length mismatch");
    }
    for (Eigen::Index i = 0; i < v.size(); ++i) {
      if (!(*mk)[static_cast<std::size_t>(i)] && v(i) != 0.0) {
        throw InvalidInput("gha_step_missing: unobserved entry is not zero-imputed");
      }
    }
  };
  check(s.x, s.mask_x);
  check(s.y, s.mask_y);
  PlsIterate next = iter;
  gha_update(next.u, next.v, s.x, s.y, eta_p);
  finish(next, renormalize);
  return next;
}

double objective(const PlsIterate& iter, const Mat& sigma_xy) {
  if (sigma_xy.rows() != iter.u.size() || sigma_xy.cols() != iter.v.size()) {
    throw InvalidInput("objective: dimension mismatch");
  }
  return iter.u.dot(sigma_xy * iter.v);
}

double alignment_error(const PlsIterate& iter, const Vec& u_hat, const Vec& v_hat) {
  if (u_hat.size() != iter.u.size() || v_hat.size() != iter.v.size()) {
    throw InvalidInput("alignment_error: dimension mismatch");
  }
  const double plus = (iter.u - u_hat).squaredNorm() + (iter.v - v_hat).squaredNorm();
  const double minus = (iter.u + u_hat).squaredNorm() + (iter.v + v_hat).squaredNorm();
  return std::min(plus, minus);
}

std::size_t Trajectory::column(const std::string& name) const {
  for (std::size_t i = 0; i < coord_names.size(); ++i) {
    if (coord_names[i] == name) return i;
  }
  throw InvalidInput("trajectory has no coordinate '" + name + "'");
}

namespace {

class Recorder {
 public:
  Recorder(const LogSpec& log, Trajectory& traj) : log_(log), traj_(traj) {
    if (!log.h_indices.empty()) {
      if (!log.basis) throw InvalidInput("run_gha: h-coordinates requested without a basis");
      for (auto i : log.h_indices) {
        if (i < 1 || i > static_cast<std::size_t>(log.basis->lambda.size())) {
          throw InvalidInput("run_gha: h-index " + std::to_string(i) + " out of range");
        }
        traj.coord_names.push_back("h" + std::to_string(i));
      }
    }
    if (log.tail) {
      if (!log.basis) throw InvalidInput("run_gha: tail requested without a basis");
      traj.coord_names.emplace_back("tail_sq");
    }
    if (log.objective) {
      if (!log.sigma_xy) throw InvalidInput("run_gha: objective requested without sigma_xy");
      traj.coord_names.emplace_back("objective");
    }
    if (log.alignment) {
      if (log.u_hat.size() == 0 || log.v_hat.size() == 0) {
        throw InvalidInput("run_gha: alignment requested without a reference pair");
      }
      traj.coord_names.emplace_back("alignment_error");
    }
    if (log.norms) {
      traj.coord_names.emplace_back("norm_u_sq");
      traj.coord_names.emplace_back("norm_v_sq");
    }
  }

  void record(std::size_t k, const PlsIterate& it) {
    traj_.iters.push_back(k);
    if (!log_.h_indices.empty() || log_.tail) {
      const Vec h = to_h(it.u, it.v, *log_.basis);
      for (auto i : log_.h_indices) traj_.values.push_back(h(static_cast<Eigen::Index>(i - 1)));
      if (log_.tail) traj_.values.push_back(h.squaredNorm() - h(0) * h(0));
    }
    if (log_.objective) traj_.values.push_back(objective(it, *log_.sigma_xy));
    if (log_.alignment) traj_.values.push_back(alignment_error(it, log_.u_hat, log_.v_hat));
    if (log_.norms) {
      traj_.values.push_back(it.u.squaredNorm());
      traj_.values.push_back(it.v.squaredNorm());
    }
  }

 private:
  const LogSpec& log_;
  Trajectory& traj_;
};

}  // namespace

Trajectory run_gha(SampleSource& stream, const PlsIterate& init, const StepConfig& cfg,
                   std::size_t n, const LogSpec& log, std::uint64_t mask_seed,
                   PlsIterate* final_iterate) {
  cfg.validate();
  if (n < 1) throw InvalidInput("run_gha: n must be ≥ 1");
  if (log.stride < 1) throw InvalidInput("run_gha: log stride must be ≥ 1");
  if (static_cast<std::size_t>(init.u.size()) != stream.dim_x() ||
      static_cast<std::size_t>(init.v.size()) != stream.dim_y()) {
    throw InvalidInput("run_gha: iterate dimensions do not match the stream");
  }

  Trajectory traj;
  Recorder rec(log, traj);
  const bool missing = cfg.observe_prob < 1.0;
  Rng mask_rng(mask_seed);

  std::vector<std::size_t> extra = log.extra;
  std::sort(extra.begin(), extra.end());
  auto next_extra = extra.begin();
  auto due = [&](std::size_t k) {
    while (next_extra != extra.end() && *next_extra < k) ++next_extra;
    return next_extra != extra.end() && *next_extra == k;
  };

  PlsIterate it = init;
  rec.record(0, it);
  if (log.on_step) log.on_step(0, it);

  TwoViewSample s;
  for (std::size_t k = 1; k <= n; ++k) {
    if (!stream.next(s)) throw StreamExhausted(k - 1, n);
    if (static_cast<std::size_t>(s.x.size()) != stream.dim_x() ||
        static_cast<std::size_t>(s.y.size()) != stream.dim_y()) {
      throw InvalidInput("run_gha: sample dimension mismatch");
    }
    if (!s.x.allFinite() || !s.y.allFinite()) throw InvalidInput("run_gha: non-finite sample");
    if (missing) mask_in_place(s, cfg.observe_prob, mask_rng);
    gha_update(it.u, it.v, s.x, s.y, cfg.eta_at(k));
    if (cfg.renormalize) {
      it.u.normalize();
      it.v.normalize();
    }
    ++it.step_count;
    if (k % log.stride == 0 || k == n || due(k)) rec.record(k, it);
    if (log.on_step) log.on_step(k, it);
  }
  if (final_iterate) *final_iterate = it;
  return traj;
}

std::string format_double(double value) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", value);
  return buf;
}

void write_trajectories_csv(std::ostream& out, std::span<const Trajectory> trajectories) {
  out << "iter,coord_name,value,seed\n";
  for (const auto& t : trajectories) {
    const std::size_t ncol = t.coord_names.size();
    for (std::size_t r = 0; r < t.rows(); ++r) {
      for (std::size_t c = 0; c < ncol; ++c) {
        out << t.iters[r] << ',' << t.coord_names[c] << ',' << format_double(t.at(r, c)) << ','
            << t.seed << '\n';
      }
    }
  }
}

}  // namespace spls
