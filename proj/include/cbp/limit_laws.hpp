#pragma once

#include <cstddef>
#include <vector>

#include "cbp/model.hpp"
#include "cbp/simulator.hpp"
#include "cbp/spectral.hpp"

namespace cbp {

/// Numerical solution of the limit-variable transform system:
/// phi(lambda; x) = E_x exp(-lambda * zeta) on a geometric lambda-grid.
struct PhiSolution {
  std::vector<double> lambda_grid;  // 0, then geometric up to lambda_max
  std::vector<std::vector<double>> phi_w;  // [catalyst][grid point]
  std::vector<State> query_states;
  std::vector<std::vector<double>> phi_x;  // [query][grid point]
  double nu = 0.0;
  std::vector<double> u;    // -phi'(0; w_j), the sub-grid expansion slopes
  std::vector<double> Q_w;  // large-lambda limits per catalyst
  std::vector<double> deriv0_x;  // -phi'(0; x) per query, = 1/c(x) in theory
  double residual = 0.0;    // sup-norm defect of the returned grid values
  long iterations = 0;
  bool converged = true;
};

struct PhiOptions {
  double lambda_max = 1000.0;
  std::size_t grid_points = 200;  // geometric part, besides lambda = 0
  double lambda_min = 1e-4;
  double tol = 1e-9;
  long max_sweeps = 500;
};

/// Solves the catalyst system by sweeping the grid in increasing lambda
/// (every integrand argument lambda*e^{-nu u} lies strictly below lambda),
/// then evaluates the off-catalyst formula for each query state.
/// Requires a supercritical criticality report (nu and u available).
PhiSolution solve_phi(const ValidatedModel& model,
                      const CriticalityReport& report,
                      const std::vector<State>& queries = {},
                      const PhiOptions& options = {});

/// Interpolated phi(lambda; w_j) / phi(lambda; query i) from the grid.
double phi_at(const PhiSolution& phi, std::size_t j, double lambda);
double phi_query_at(const PhiSolution& phi, std::size_t query_index,
                    double lambda);

/// Transform-domain comparison of theory and simulation: empirical
/// E[e^{-lambda mu(T)/mean}] against phi(lambda * c(x); x), with combined
/// standard errors (sampling + normalizer noise by the delta method).
struct TransformComparison {
  std::vector<double> lambdas;
  std::vector<double> empirical;
  std::vector<double> analytic;
  std::vector<double> combined_se;
  double max_dev_over_se = 0.0;
  bool within_3se = false;
  // Atom at zero: empirical extinction frequency vs the q..Q band predicted
  // for finite times.
  double atom_freq = 0.0;
  double atom_lo = 0.0, atom_hi = 0.0;
  bool atom_ok = false;
};

TransformComparison phi_vs_simulation(const PhiSolution& phi,
                                      const EnsembleStats& stats,
                                      std::size_t query_index, double c_x,
                                      double q_x, double Q_x);

/// Advisory histogram check of property (iv): the positive part of the
/// normalized final counts should show no persistent atom at two bandwidths.
struct SmoothnessReport {
  bool skipped = false;       // degenerate ensemble (no spread)
  bool atom_flagged = false;  // some off-zero bin persistently dominates
  double atom_freq = 0.0;     // mass at exactly zero
  std::size_t survivors = 0;
};

SmoothnessReport density_smoothness_check(
    const std::vector<std::int64_t>& final_counts);

}  // namespace cbp
