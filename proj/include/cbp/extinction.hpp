#pragma once

#include <string>
#include <vector>

#include "cbp/model.hpp"

namespace cbp {

enum class SurvivalPhase {
  strong_local_survival,
  pure_global_survival,
  certain_extinction,
  mixed
};
std::string to_string(SurvivalPhase p);

struct FixedPointResult {
  std::vector<double> values;  // one entry per catalyst
  long iterations = 0;
  double residual = 0.0;  // sup-norm defect of the returned vector
  bool converged = true;
  // One-sided error bar inherited from truncated lattice hitting masses.
  double mass_uncertainty = 0.0;
};

/// Least root of the global-extinction system
///   q(w_j) = alpha_j f_j(q(w_j)) + (1-alpha_j) sum_k M_jk q(w_k),
/// M_jk the taboo hitting masses, by monotone iteration from zero.
FixedPointResult solve_q(const ValidatedModel& model, double tol = 1e-12);

/// Least root of the local-extinction system, which adds the escape term
/// (1-alpha_j)(1 - sum_k M_jk) to each coordinate.
FixedPointResult solve_Q(const ValidatedModel& model, double tol = 1e-12);

/// Extends a catalyst-site solution to any start state by the hitting-mass
/// weighted sum (plus the escape mass for the local variant).
double q_at(const ValidatedModel& model, const std::vector<double>& q_w,
            State x);
double Q_at(const ValidatedModel& model, const std::vector<double>& Q_w,
            State x);

/// Phase from the transience/criticality dichotomy:
///   recurrent, rho0 <= 1 -> certain_extinction
///   recurrent, rho0 >  1 -> strong_local_survival
///   transient, rho0 <= 1 -> pure_global_survival
///   transient, rho0 >  1 -> mixed
SurvivalPhase survival_phase(bool transient, double rho0);
SurvivalPhase survival_phase(const ValidatedModel& model);

struct ExtinctionReport {
  std::vector<double> q_w;
  std::vector<double> Q_w;
  long q_iterations = 0, Q_iterations = 0;
  double q_residual = 0.0, Q_residual = 0.0;
  bool converged = true;
  double mass_uncertainty = 0.0;
  SurvivalPhase phase = SurvivalPhase::certain_extinction;
  double rho0 = 0.0;
  bool transient = false;
  std::vector<State> query_states;
  std::vector<double> q_x, Q_x;
};

ExtinctionReport extinction_report(const ValidatedModel& model,
                                   const std::vector<State>& queries = {},
                                   double tol = 1e-12);

}  // namespace cbp
