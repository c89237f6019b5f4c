#include "cbp/simulator.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <queue>
#include <random>
#include <thread>

namespace cbp {

namespace {

// Uniform and exponential variates are mapped from raw engine words by hand
// so trajectories do not depend on the standard library's unspecified
// distribution algorithms.
struct Rng {
  std::mt19937_64 gen;
  explicit Rng(std::uint64_t seed) : gen(seed) {}
  double uniform() {  // [0, 1)
    return static_cast<double>(gen() >> 11) * 0x1.0p-53;
  }
  double exponential(double rate) {
    return -std::log1p(-uniform()) / rate;
  }
};

struct PendingClock {
  double time;
  std::int64_t particle;
  State site;
  bool operator>(const PendingClock& o) const {
    return time != o.time ? time > o.time : particle > o.particle;
  }
};

struct OffspringSampler {
  std::vector<double> cum;
  std::vector<int> count;
  explicit OffspringSampler(const OffspringLaw& law) {
    double acc = 0.0;
    for (const auto& [k, p] : law.pmf()) {
      acc += p;
      cum.push_back(acc);
      count.push_back(k);
    }
    cum.back() = 1.0;
  }
  int sample(double u) const {
    for (std::size_t i = 0; i < cum.size(); ++i)
      if (u < cum[i]) return count[i];
    return count.back();
  }
};

}  // namespace

std::uint64_t scramble_seed(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

Trajectory simulate(const ValidatedModel& model,
                    const std::vector<double>& t_grid,
                    const std::vector<State>& y_list, std::uint64_t seed,
                    const SimCaps& caps, const EventSink* sink) {
  if (t_grid.empty() || !(t_grid.front() >= 0.0))
    throw PreconditionError("simulation needs a nonempty time grid from 0");
  for (std::size_t i = 1; i < t_grid.size(); ++i)
    if (!(t_grid[i] >= t_grid[i - 1]))
      throw PreconditionError("time grid must be nondecreasing");

  Trajectory out;
  out.t_grid = t_grid;
  out.y_list = y_list;
  out.seed = seed;
  out.total.assign(t_grid.size(), 0);
  out.local.assign(y_list.size(),
                   std::vector<std::int64_t>(t_grid.size(), 0));

  Rng rng(scramble_seed(seed));

  std::vector<OffspringSampler> samplers;
  samplers.reserve(model.num_catalysts());
  for (const auto& c : model.catalysts()) samplers.emplace_back(c.offspring);

  auto clock_rate = [&model](State site) {
    if (auto k = model.catalyst_index(site))
      return model.catalysts()[*k].beta;
    return model.exit_rate(site);
  };

  std::vector<std::int64_t> local(y_list.size(), 0);
  auto local_add = [&](State site, std::int64_t delta) {
    for (std::size_t i = 0; i < y_list.size(); ++i)
      if (y_list[i] == site) local[i] += delta;
  };

  std::priority_queue<PendingClock, std::vector<PendingClock>,
                      std::greater<PendingClock>>
      queue;
  std::int64_t next_id = 0;
  auto spawn = [&](State site, double now) {
    queue.push({now + rng.exponential(clock_rate(site)), next_id++, site});
    local_add(site, 1);
  };
  spawn(model.start(), 0.0);

  std::size_t g = 0;
  auto record_until = [&](double horizon) {
    while (g < t_grid.size() && t_grid[g] < horizon) {
      out.total[g] = static_cast<std::int64_t>(queue.size());
      for (std::size_t i = 0; i < y_list.size(); ++i)
        out.local[i][g] = local[i];
      ++g;
    }
  };

  while (!queue.empty() && g < t_grid.size()) {
    const PendingClock ev = queue.top();
    record_until(ev.time);
    if (g >= t_grid.size()) break;
    if (out.events >= caps.max_events) {
      out.event_cap_hit = true;
      break;
    }
    queue.pop();
    ++out.events;

    if (auto k = model.catalyst_index(ev.site)) {
      const auto& cat = model.catalysts()[*k];
      if (rng.uniform() < cat.alpha) {
        const int n = samplers[*k].sample(rng.uniform());
        local_add(ev.site, -1);
        for (int i = 0; i < n; ++i) spawn(ev.site, ev.time);
        if (sink && *sink)
          (*sink)({ev.time, EventKind::branch, ev.site, ev.site, ev.particle,
                   n});
      } else {
        const State dest = model.sample_jump(ev.site, rng.uniform());
        local_add(ev.site, -1);
        local_add(dest, 1);
        queue.push(
            {ev.time + rng.exponential(clock_rate(dest)), ev.particle, dest});
        if (sink && *sink)
          (*sink)({ev.time, EventKind::depart, ev.site, dest, ev.particle, 0});
      }
    } else {
      const State dest = model.sample_jump(ev.site, rng.uniform());
      local_add(ev.site, -1);
      local_add(dest, 1);
      queue.push(
          {ev.time + rng.exponential(clock_rate(dest)), ev.particle, dest});
      if (sink && *sink)
        (*sink)({ev.time, EventKind::jump, ev.site, dest, ev.particle, 0});
    }

    if (static_cast<std::int64_t>(queue.size()) > caps.max_population) {
      out.pop_cap_hit = true;
      break;
    }
  }

  // Extinction, cap, or horizon reached: counts stay frozen from here on.
  record_until(std::numeric_limits<double>::infinity());
  return out;
}

EnsembleStats run_ensemble(const ValidatedModel& model,
                           const std::vector<double>& t_grid,
                           const std::vector<State>& y_list, long R,
                           std::uint64_t seed, const SimCaps& caps,
                           int threads) {
  if (R < 1) throw PreconditionError("ensemble needs at least one replicate");
  if (threads < 1) threads = 1;

  const std::size_t g_n = t_grid.size();
  const std::size_t y_n = y_list.size();

  struct BlockSums {
    std::vector<double> sum_total, sumsq_total;
    std::vector<long> survivors;
    std::vector<std::vector<double>> sum_local, sumsq_local;
    long truncated = 0;
  };

  constexpr long kBlock = 64;
  const long n_blocks = (R + kBlock - 1) / kBlock;
  std::vector<BlockSums> blocks(static_cast<std::size_t>(n_blocks));

  EnsembleStats stats;
  stats.t_grid = t_grid;
  stats.y_list = y_list;
  stats.replicates = R;
  stats.seed = seed;
  stats.final_total.assign(static_cast<std::size_t>(R), 0);
  stats.prefinal_total.assign(static_cast<std::size_t>(R), 0);
  stats.final_local.assign(y_n,
                           std::vector<std::int64_t>(
                               static_cast<std::size_t>(R), 0));

  std::atomic<long> next_block{0};
  auto worker = [&]() {
    for (;;) {
      const long b = next_block.fetch_add(1);
      if (b >= n_blocks) return;
      auto& blk = blocks[static_cast<std::size_t>(b)];
      blk.sum_total.assign(g_n, 0.0);
      blk.sumsq_total.assign(g_n, 0.0);
      blk.survivors.assign(g_n, 0);
      blk.sum_local.assign(y_n, std::vector<double>(g_n, 0.0));
      blk.sumsq_local.assign(y_n, std::vector<double>(g_n, 0.0));
      const long lo = b * kBlock;
      const long hi = std::min(R, lo + kBlock);
      for (long r = lo; r < hi; ++r) {
        auto traj = simulate(model, t_grid, y_list,
                             seed + static_cast<std::uint64_t>(r), caps);
        if (traj.pop_cap_hit || traj.event_cap_hit) ++blk.truncated;
        for (std::size_t i = 0; i < g_n; ++i) {
          const double v = static_cast<double>(traj.total[i]);
          blk.sum_total[i] += v;
          blk.sumsq_total[i] += v * v;
          if (traj.total[i] > 0) ++blk.survivors[i];
        }
        for (std::size_t y = 0; y < y_n; ++y)
          for (std::size_t i = 0; i < g_n; ++i) {
            const double v = static_cast<double>(traj.local[y][i]);
            blk.sum_local[y][i] += v;
            blk.sumsq_local[y][i] += v * v;
          }
        stats.final_total[static_cast<std::size_t>(r)] = traj.total.back();
        stats.prefinal_total[static_cast<std::size_t>(r)] =
            traj.total[g_n >= 2 ? g_n - 2 : 0];
        for (std::size_t y = 0; y < y_n; ++y)
          stats.final_local[y][static_cast<std::size_t>(r)] =
              traj.local[y].back();
      }
    }
  };

  if (threads == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int i = 0; i < threads; ++i) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }

  // Sequential block merge in index order with compensated summation: the
  // result does not depend on the thread schedule.
  auto kahan_merge = [n_blocks](auto pick) {
    double sum = 0.0, comp = 0.0;
    for (long b = 0; b < n_blocks; ++b) {
      const double term = pick(static_cast<std::size_t>(b)) - comp;
      const double t = sum + term;
      comp = (t - sum) - term;
      sum = t;
    }
    return sum;
  };

  stats.mean_total.assign(g_n, 0.0);
  stats.var_total.assign(g_n, 0.0);
  stats.survival_freq.assign(g_n, 0.0);
  stats.mean_local.assign(y_n, std::vector<double>(g_n, 0.0));
  stats.var_local.assign(y_n, std::vector<double>(g_n, 0.0));
  const double n = static_cast<double>(R);
  for (std::size_t i = 0; i < g_n; ++i) {
    const double s = kahan_merge([&](std::size_t b) { return blocks[b].sum_total[i]; });
    const double ss = kahan_merge([&](std::size_t b) { return blocks[b].sumsq_total[i]; });
    long surv = 0;
    for (const auto& blk : blocks) surv += blk.survivors[i];
    stats.mean_total[i] = s / n;
    stats.var_total[i] = R > 1 ? std::max(0.0, (ss - s * s / n) / (n - 1.0)) : 0.0;
    stats.survival_freq[i] = static_cast<double>(surv) / n;
  }
  for (std::size_t y = 0; y < y_n; ++y)
    for (std::size_t i = 0; i < g_n; ++i) {
      const double s = kahan_merge([&](std::size_t b) { return blocks[b].sum_local[y][i]; });
      const double ss = kahan_merge([&](std::size_t b) { return blocks[b].sumsq_local[y][i]; });
      stats.mean_local[y][i] = s / n;
      stats.var_local[y][i] =
          R > 1 ? std::max(0.0, (ss - s * s / n) / (n - 1.0)) : 0.0;
    }
  for (const auto& blk : blocks) stats.truncated += blk.truncated;
  return stats;
}

}  // namespace cbp
