#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "cbp/limit_laws.hpp"
#include "cbp/model.hpp"
#include "cbp/simulator.hpp"

namespace cbp {

/// Simulates on the seed ladder and retains trajectories that survive to the
/// last grid time without hitting a cap, until `want` paths are kept or
/// `max_attempts` seeds are tried (0 means 50 * want).
std::vector<Trajectory> collect_survivor_paths(
    const ValidatedModel& model, const std::vector<double>& t_grid,
    const std::vector<State>& y_list, std::size_t want, std::uint64_t seed,
    const SimCaps& caps = {}, std::size_t max_attempts = 0);

/// Path-wise proxy for the almost-sure collapse of normalized counts onto a
/// common limit: per surviving path, the relative oscillation of each
/// normalized component over the last quarter of the time grid, the spread
/// between components at the final time, and the rank agreement of total vs
/// local counts across paths. Almost-sure convergence itself is not
/// desk-verifiable; thresholds below are declared engineering choices.
struct StrongProxyReport {
  bool refused = false;
  std::vector<std::string> failed_hypotheses;  // unmet model conditions
  std::size_t paths = 0;                       // surviving paths evaluated
  std::vector<double> tail_oscillation;        // per path
  double median_tail_oscillation = 0.0;
  double median_final_spread = 0.0;  // (max-min)/max across components
  double max_final_spread = 0.0;
  bool co_converged = false;      // median final spread < 0.2
  double rank_correlation = 1.0;  // total vs first local, across paths
  bool rank_checked = false;
  std::vector<std::string> failed_checks;
  std::string verdict;  // PASS / FAIL / INCONCLUSIVE
};

StrongProxyReport verify_strong_proxy(const ValidatedModel& model,
                                      const EnsembleStats& stats,
                                      const std::vector<Trajectory>& paths);

/// Distributional checks for the weak limit: Kolmogorov-Smirnov stability of
/// mu(t)/mean between the last two snapshot times, the transform comparison
/// against phi, the atom at zero against the extinction band, and the rank
/// collapse of normalized components on survivors.
struct WeakReport {
  bool refused = false;
  std::vector<std::string> failed_hypotheses;
  double t1 = 0.0, t2 = 0.0;
  double ks_stat = 0.0;
  double ks_bound = 0.0;  // 3 * sqrt(2/R)
  bool ks_ok = false;
  TransformComparison transform;
  double rank_correlation = 1.0;
  bool rank_checked = false;
  bool rank_ok = true;
  long survivors = 0;
  std::vector<std::string> failed_checks;
  std::string verdict;  // PASS / FAIL / INCONCLUSIVE
};

WeakReport verify_weak(const ValidatedModel& model, const EnsembleStats& stats,
                       const PhiSolution& phi);

/// Spearman rank correlation with average ranks on ties; a constant sample
/// is treated as perfectly collapsed (returns 1).
double spearman(const std::vector<double>& a, const std::vector<double>& b);

/// Two-sample Kolmogorov-Smirnov statistic.
double ks_distance(std::vector<double> a, std::vector<double> b);

}  // namespace cbp
