#include "spls/phases.hpp"

#include <algorithm>
#include <cmath>

#include "spls/diffusion.hpp"

namespace spls {

PhaseDetector::PhaseDetector(double delta, double epsilon)
    : thresh_(1.0 - delta * delta), epsilon_(epsilon) {
  if (!(delta > 0.0 && delta < 1.0)) throw InvalidInput("PhaseDetector: delta must lie in (0,1)");
  if (!(epsilon > 0.0)) throw InvalidInput("PhaseDetector: epsilon must be > 0");
}

void PhaseDetector::observe(std::size_t k, double h1_sq, double h2_sq, double tail_sq) {
  if (!c_.escape) {
    if (h2_sq <= thresh_) c_.escape = k;
    else return;
  }
  if (!c_.arrival) {
    if (h1_sq >= thresh_) c_.arrival = k;
    else return;
  }
  if (!c_.convergence && tail_sq <= epsilon_) c_.convergence = k;
}

void PhaseDetector::observe(std::size_t k, const Vec& h) {
  if (h.size() < 2) throw InvalidInput("PhaseDetector: need at least two h-coordinates");
  const double h1 = h(0) * h(0);
  observe(k, h1, h(1) * h(1), h.squaredNorm() - h1);
}

PhaseCrossings detect_phases(const Trajectory& traj, double delta, double epsilon) {
  const std::size_t c1 = traj.column("h1");
  const std::size_t c2 = traj.column("h2");
  std::optional<std::size_t> ct;
  for (std::size_t i = 0; i < traj.coord_names.size(); ++i) {
    if (traj.coord_names[i] == "tail_sq") ct = i;
  }
  PhaseDetector det(delta, epsilon);
  for (std::size_t r = 0; r < traj.rows(); ++r) {
    const double h1 = traj.at(r, c1);
    const double h2 = traj.at(r, c2);
    const double tail = ct ? traj.at(r, *ct) : 1.0 - h1 * h1;
    det.observe(traj.iters[r], h1 * h1, h2 * h2, tail);
  }
  return det.crossings();
}

Quantiles quantiles(std::vector<double> values) {
  Quantiles q;
  q.count = values.size();
  if (values.empty()) return q;
  std::sort(values.begin(), values.end());
  auto at = [&](double p) {
    const double pos = p * static_cast<double>(values.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const std::size_t hi = std::min(lo + 1, values.size() - 1);
    const double w = pos - static_cast<double>(lo);
    return values[lo] * (1.0 - w) + values[hi] * w;
  };
  q.q25 = at(0.25);
  q.median = at(0.5);
  q.q75 = at(0.75);
  return q;
}

PhaseReport summarize_phases(const std::vector<std::uint64_t>& seeds,
                             const std::vector<PhaseCrossings>& per_seed, double delta,
                             double epsilon, const PhasePrediction* prediction) {
  if (seeds.size() != per_seed.size()) throw InvalidInput("summarize_phases: length mismatch");
  PhaseReport r;
  r.seeds = seeds;
  r.per_seed = per_seed;
  r.delta = delta;
  r.epsilon = epsilon;
  std::vector<double> e, a, c;
  for (const auto& p : per_seed) {
    if (p.escape) e.push_back(static_cast<double>(*p.escape));
    if (p.arrival) a.push_back(static_cast<double>(*p.arrival));
    if (p.convergence) c.push_back(static_cast<double>(*p.convergence));
    if (p.escape && p.arrival && p.convergence &&
        !(*p.escape <= *p.arrival && *p.arrival <= *p.convergence)) {
      ++r.ordering_violations;
    }
  }
  r.escape = quantiles(std::move(e));
  r.arrival = quantiles(std::move(a));
  r.convergence = quantiles(std::move(c));
  if (prediction) {
    r.predicted_n1 = prediction->N1;
    r.predicted_n2 = prediction->N2;
    if (prediction->phase3_defined) r.predicted_n3 = prediction->N3;
  }
  return r;
}

namespace {

nlohmann::json opt(const std::optional<std::size_t>& v) {
  return v ? nlohmann::json(*v) : nlohmann::json(nullptr);
}

nlohmann::json opt64(const std::optional<std::uint64_t>& v) {
  return v ? nlohmann::json(*v) : nlohmann::json(nullptr);
}

nlohmann::json to_json(const Quantiles& q) {
  nlohmann::json j;
  j["count"] = q.count;
  if (q.count == 0) {
    j["q25"] = j["median"] = j["q75"] = nullptr;
  } else {
    j["q25"] = q.q25;
    j["median"] = q.median;
    j["q75"] = q.q75;
  }
  return j;
}

}  // namespace

nlohmann::json to_json(const PhaseReport& r) {
  nlohmann::json j;
  j["delta"] = r.delta;
  j["epsilon"] = r.epsilon;
  j["escape"] = to_json(r.escape);
  j["arrival"] = to_json(r.arrival);
  j["convergence"] = to_json(r.convergence);
  j["ordering_violations"] = r.ordering_violations;
  j["predicted"] = {{"N1", opt64(r.predicted_n1)},
                    {"N2", opt64(r.predicted_n2)},
                    {"N3", opt64(r.predicted_n3)}};
  nlohmann::json seeds = nlohmann::json::array();
  for (std::size_t i = 0; i < r.per_seed.size(); ++i) {
    seeds.push_back({{"seed", r.seeds[i]},
                     {"escape", opt(r.per_seed[i].escape)},
                     {"arrival", opt(r.per_seed[i].arrival)},
                     {"convergence", opt(r.per_seed[i].convergence)}});
  }
  j["per_seed"] = std::move(seeds);
  return j;
}

}  // namespace spls
