#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "cbp/model.hpp"

namespace cbp {

struct SimCaps {
  std::int64_t max_population = 1000000;
  std::int64_t max_events = 100000000;
};

enum class EventKind { jump, branch, depart };

struct ParticleEvent {
  double time = 0.0;
  EventKind kind = EventKind::jump;
  State site = 0;      // where the clock fired
  State dest = 0;      // landing site for jump/depart
  std::int64_t particle = 0;
  int offspring = 0;   // branch only
};

using EventSink = std::function<void(const ParticleEvent&)>;

struct Trajectory {
  std::vector<double> t_grid;
  std::vector<std::int64_t> total;               // mu(t) on the grid
  std::vector<State> y_list;
  std::vector<std::vector<std::int64_t>> local;  // [y][grid] mu(t;y)
  std::uint64_t seed = 0;
  bool pop_cap_hit = false;
  bool event_cap_hit = false;
  std::int64_t events = 0;
};

/// Exact event-driven simulation. Each particle carries one pending
/// exponential clock: rate beta_k at catalyst w_k (firing branches with
/// probability alpha_k, killing the parent and placing the offspring at the
/// same site, and otherwise jumps by the embedded kernel), rate -q(x,x)
/// elsewhere (always jumps). Deterministic given (model, grid, seed, caps).
Trajectory simulate(const ValidatedModel& model,
                    const std::vector<double>& t_grid,
                    const std::vector<State>& y_list, std::uint64_t seed,
                    const SimCaps& caps = {}, const EventSink* sink = nullptr);

struct EnsembleStats {
  std::vector<double> t_grid;
  std::vector<State> y_list;
  long replicates = 0;
  std::uint64_t seed = 0;
  std::vector<double> mean_total, var_total;
  std::vector<std::vector<double>> mean_local, var_local;  // [y][grid]
  std::vector<double> survival_freq;                       // P(mu(t) > 0)
  // Raw per-replicate counts at the final grid time, replicate order; the
  // second-to-last grid time is kept as well for distributional-stability
  // checks between two late snapshots.
  std::vector<std::int64_t> final_total;
  std::vector<std::int64_t> prefinal_total;
  std::vector<std::vector<std::int64_t>> final_local;      // [y][replicate]
  long truncated = 0;  // replicates that hit a cap
};

/// R independent trajectories on the seed ladder seed, seed+1, ...;
/// aggregation is done in fixed blocks merged in index order, so results are
/// bit-identical for any thread count.
EnsembleStats run_ensemble(const ValidatedModel& model,
                           const std::vector<double>& t_grid,
                           const std::vector<State>& y_list, long R,
                           std::uint64_t seed, const SimCaps& caps = {},
                           int threads = 1);

/// Replicate-r generator seed: splitmix64 scrambling of (seed + r) so nearby
/// ladder entries give unrelated streams.
std::uint64_t scramble_seed(std::uint64_t seed);

}  // namespace cbp
