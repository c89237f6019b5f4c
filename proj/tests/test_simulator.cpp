#include <doctest.h>

#include <cmath>
#include <map>
#include <numeric>

#include "cbp/extinction.hpp"
#include "cbp/simulator.hpp"
#include "cbp/spectral.hpp"
#include "helpers.hpp"

using namespace cbp;
using namespace cbp::testing;

namespace {

std::vector<double> linspace(double t_end, std::size_t n) {
  std::vector<double> g(n);
  for (std::size_t i = 0; i < n; ++i)
    g[i] = t_end * static_cast<double>(i) / static_cast<double>(n - 1);
  return g;
}

}  // namespace

TEST_CASE("simulation is deterministic given the seed") {
  auto m = two_state_rec();
  auto grid = linspace(10.0, 21);
  auto a = simulate(m, grid, {0, 1}, 42);
  auto b = simulate(m, grid, {0, 1}, 42);
  CHECK(a.total == b.total);
  CHECK(a.local == b.local);
  CHECK(a.events == b.events);
  auto c = simulate(m, grid, {0, 1}, 43);
  CHECK(a.total != c.total);  // astronomically unlikely to collide
}

TEST_CASE("single-offspring law keeps the population at one") {
  auto m = ValidatedModel::validate(two_state_spec({{1, 1.0}}));
  auto traj = simulate(m, linspace(50.0, 26), {}, 7);
  for (auto v : traj.total) CHECK(v == 1);
}

TEST_CASE("zero-offspring law kills at the first branch") {
  auto m = ValidatedModel::validate(two_state_spec({{0, 1.0}}, 0.9));
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    auto traj = simulate(m, linspace(80.0, 41), {}, seed);
    for (auto v : traj.total) CHECK((v == 0 || v == 1));
    CHECK(traj.total.back() == 0);  // branch attempt happens a.s. by t=80
  }
}

TEST_CASE("local counts partition the total on a finite space") {
  auto m = two_state_rec();
  auto traj = simulate(m, linspace(25.0, 51), {0, 1}, 11);
  for (std::size_t i = 0; i < traj.t_grid.size(); ++i)
    CHECK(traj.local[0][i] + traj.local[1][i] == traj.total[i]);
  CHECK(traj.total[0] == 1);      // mu(0) = 1 at the start state
  CHECK(traj.local[0][0] == 1);   // placed at state 0
}

TEST_CASE("embedded jump kernel frequencies match the generator") {
  // 3-state ring, clockwise 1.0 / counterclockwise 0.5; alpha = 0 so the
  // catalyst never branches and the single particle walks forever
  auto spec = ring_spec(3, 1.0, 0.5);
  spec.catalysts[0].alpha = 0.0;
  auto m = ValidatedModel::validate(spec);

  std::map<std::pair<State, State>, long> moves;
  EventSink sink = [&moves](const ParticleEvent& e) {
    if (e.kind != EventKind::branch) ++moves[{e.site, e.dest}];
  };
  SimCaps caps;
  caps.max_events = 150000;
  auto traj = simulate(m, {0.0, 1e9}, {}, 5, caps, &sink);
  CHECK(traj.event_cap_hit);

  const long from0 = moves[{0, 1}] + moves[{0, 2}];
  REQUIRE(from0 > 10000);
  const double p01 = static_cast<double>(moves[{0, 1}]) / from0;
  const double se = std::sqrt(2.0 / 9.0 / static_cast<double>(from0));
  CHECK(std::abs(p01 - 2.0 / 3.0) < 3.0 * se);
}

TEST_CASE("holding times at a catalyst have mean 1/beta") {
  // alpha = 1 with law {1:1}: the particle is endlessly replaced in place,
  // so event gaps are iid Exp(beta)
  auto spec = two_state_spec({{1, 1.0}}, 1.0, 2.0);
  auto m = ValidatedModel::validate(spec);
  std::vector<double> times;
  EventSink sink = [&times](const ParticleEvent& e) {
    times.push_back(e.time);
  };
  SimCaps caps;
  caps.max_events = 10000;
  (void)simulate(m, {0.0, 1e9}, {}, 99, caps, &sink);
  REQUIRE(times.size() > 9000);
  double mean_gap = times.back() / static_cast<double>(times.size());
  const double se = 0.5 / std::sqrt(static_cast<double>(times.size()));
  CHECK(std::abs(mean_gap - 0.5) < 3.0 * se);
}

TEST_CASE("population cap truncates with a flag") {
  auto m = two_state_det();  // fast growth
  SimCaps caps;
  caps.max_population = 50;
  auto traj = simulate(m, linspace(40.0, 11), {0}, 3, caps);
  CHECK(traj.pop_cap_hit);
  CHECK(traj.t_grid.size() == 11);     // grid filled to the end
  CHECK(traj.total.back() >= 50);      // frozen at the truncation snapshot
}

TEST_CASE("ensemble aggregation is exact for R=1 and thread-invariant") {
  auto m = two_state_rec();
  auto grid = linspace(8.0, 17);
  auto traj = simulate(m, grid, {0}, 123);
  auto stats = run_ensemble(m, grid, {0}, 1, 123);
  for (std::size_t i = 0; i < grid.size(); ++i) {
    CHECK(stats.mean_total[i] == static_cast<double>(traj.total[i]));
    CHECK(stats.mean_local[0][i] == static_cast<double>(traj.local[0][i]));
  }
  CHECK(stats.final_total[0] == traj.total.back());

  auto one = run_ensemble(m, grid, {0, 1}, 500, 77, {}, 1);
  auto four = run_ensemble(m, grid, {0, 1}, 500, 77, {}, 4);
  CHECK(one.mean_total == four.mean_total);
  CHECK(one.var_total == four.var_total);
  CHECK(one.mean_local == four.mean_local);
  CHECK(one.survival_freq == four.survival_freq);
  CHECK(one.final_total == four.final_total);
}

TEST_CASE("survival frequency is nonincreasing and approaches 1 - q") {
  auto m = two_state_rec();
  auto grid = linspace(20.0, 21);
  auto stats = run_ensemble(m, grid, {}, 3000, 2024);
  for (std::size_t i = 1; i < grid.size(); ++i)
    CHECK(stats.survival_freq[i] <= stats.survival_freq[i - 1] + 1e-12);

  const double q = solve_q(m).values[0];  // 1/3
  const double p_surv = stats.survival_freq.back();
  const double se = std::sqrt(q * (1 - q) / 3000.0);
  // finite-t bias is downward for extinction frequency, so allow 4 se
  CHECK(std::abs(p_surv - (1.0 - q)) < 4.0 * se);
}

TEST_CASE("log mean growth has slope near the growth exponent") {
  auto m = two_state_rec();
  const double nu = malthusian(m);
  auto grid = linspace(20.0, 41);
  auto stats = run_ensemble(m, grid, {}, 3000, 555);

  // least-squares slope of log mean over the last half of the grid
  std::vector<double> xs, ys;
  for (std::size_t i = grid.size() / 2; i < grid.size(); ++i) {
    REQUIRE(stats.mean_total[i] > 0.0);
    xs.push_back(grid[i]);
    ys.push_back(std::log(stats.mean_total[i]));
  }
  const double n = static_cast<double>(xs.size());
  const double mx = std::accumulate(xs.begin(), xs.end(), 0.0) / n;
  const double my = std::accumulate(ys.begin(), ys.end(), 0.0) / n;
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    sxy += (xs[i] - mx) * (ys[i] - my);
    sxx += (xs[i] - mx) * (xs[i] - mx);
  }
  const double slope = sxy / sxx;
  CHECK(std::abs(slope - nu) / nu < 0.10);
}

TEST_CASE("lattice simulation is unbounded and matches escape dynamics") {
  auto m = lattice_tra();
  auto grid = linspace(15.0, 16);
  auto stats = run_ensemble(m, grid, {0}, 1500, 31);
  // transient chain with growth: survivors drift away; local mean at the
  // catalyst stays far below the total mean at late times
  CHECK(stats.mean_total.back() > 2.0 * stats.mean_local[0].back());
  // survival frequency sits near 1 - q(0), not near 1 - Q(0)
  const double q = solve_q(m).values[0];
  const double se = std::sqrt(q * (1 - q) / 1500.0);
  CHECK(std::abs(stats.survival_freq.back() - (1.0 - q)) < 4.0 * se + 0.01);
}
