#include "cbp/extinction.hpp"

#include <algorithm>
#include <cmath>

#include "cbp/spectral.hpp"
#include "cbp/taboo.hpp"

namespace cbp {

namespace {

constexpr long kIterationCap = 1000000;

struct HittingMasses {
  // masses[j][k] = probability of reaching w_k from w_j avoiding the other
  // catalysts; row_mass[j] = sum over k.
  std::vector<std::vector<double>> masses;
  std::vector<double> row_mass;
  double uncertainty = 0.0;
};

std::vector<State> taboo_without(const ValidatedModel& m, std::size_t k) {
  std::vector<State> taboo;
  for (std::size_t i = 0; i < m.num_catalysts(); ++i)
    if (i != k) taboo.push_back(m.catalysts()[i].site);
  return taboo;
}

HittingMasses hitting_masses(const ValidatedModel& m) {
  const std::size_t n = m.num_catalysts();
  HittingMasses h;
  h.masses.assign(n, std::vector<double>(n, 0.0));
  h.row_mass.assign(n, 0.0);
  for (std::size_t k = 0; k < n; ++k) {
    const auto taboo = taboo_without(m, k);
    for (std::size_t j = 0; j < n; ++j) {
      const auto tv = taboo_transform(
          m, {m.catalysts()[j].site, m.catalysts()[k].site, taboo, 0.0});
      h.masses[j][k] = tv.value;
      h.uncertainty += tv.uncertainty;
    }
  }
  for (std::size_t j = 0; j < n; ++j)
    for (std::size_t k = 0; k < n; ++k) h.row_mass[j] += h.masses[j][k];
  return h;
}

// Monotone iteration from zero of v <- alpha f(v) + (1-alpha) M v + escape.
FixedPointResult iterate_least_root(const ValidatedModel& m,
                                    const HittingMasses& h, bool with_escape,
                                    double tol) {
  if (!(tol > 0.0)) throw PreconditionError("tolerance must be positive");
  const std::size_t n = m.num_catalysts();
  std::vector<double> v(n, 0.0), next(n, 0.0);

  auto apply = [&](const std::vector<double>& in, std::vector<double>& out) {
    for (std::size_t j = 0; j < n; ++j) {
      const auto& c = m.catalysts()[j];
      double move = 0.0;
      for (std::size_t k = 0; k < n; ++k) move += h.masses[j][k] * in[k];
      double val = c.alpha * c.offspring.pgf(in[j]) + (1.0 - c.alpha) * move;
      if (with_escape) val += (1.0 - c.alpha) * (1.0 - h.row_mass[j]);
      out[j] = std::min(val, 1.0);
    }
  };

  FixedPointResult result;
  result.mass_uncertainty = h.uncertainty;
  double step = 0.0;
  for (long it = 1; it <= kIterationCap; ++it) {
    apply(v, next);
    step = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      step = std::max(step, std::abs(next[j] - v[j]));
      v[j] = next[j];
    }
    result.iterations = it;
    if (step < tol) break;
  }
  result.converged = step < tol;

  apply(v, next);
  double defect = 0.0;
  for (std::size_t j = 0; j < n; ++j)
    defect = std::max(defect, std::abs(next[j] - v[j]));
  result.residual = defect;
  result.values = std::move(v);
  return result;
}

double mass_from(const ValidatedModel& m, State x, std::size_t k) {
  return taboo_transform(
             m, {x, m.catalysts()[k].site, taboo_without(m, k), 0.0})
      .value;
}

}  // namespace

std::string to_string(SurvivalPhase p) {
  switch (p) {
    case SurvivalPhase::strong_local_survival: return "strong_local_survival";
    case SurvivalPhase::pure_global_survival: return "pure_global_survival";
    case SurvivalPhase::certain_extinction: return "certain_extinction";
    case SurvivalPhase::mixed: return "mixed";
  }
  return "unknown";
}

FixedPointResult solve_q(const ValidatedModel& model, double tol) {
  return iterate_least_root(model, hitting_masses(model), false, tol);
}

FixedPointResult solve_Q(const ValidatedModel& model, double tol) {
  return iterate_least_root(model, hitting_masses(model), true, tol);
}

double q_at(const ValidatedModel& model, const std::vector<double>& q_w,
            State x) {
  if (q_w.size() != model.num_catalysts())
    throw PreconditionError("solution vector size mismatch");
  if (auto k = model.catalyst_index(x)) return q_w[*k];
  double v = 0.0;
  for (std::size_t k = 0; k < q_w.size(); ++k)
    v += mass_from(model, x, k) * q_w[k];
  return std::min(v, 1.0);
}

double Q_at(const ValidatedModel& model, const std::vector<double>& Q_w,
            State x) {
  if (Q_w.size() != model.num_catalysts())
    throw PreconditionError("solution vector size mismatch");
  if (auto k = model.catalyst_index(x)) return Q_w[*k];
  double v = 1.0;
  for (std::size_t k = 0; k < Q_w.size(); ++k)
    v -= mass_from(model, x, k) * (1.0 - Q_w[k]);
  return std::min(v, 1.0);
}

SurvivalPhase survival_phase(bool transient, double rho0) {
  const bool super = rho0 > 1.0 + kCriticalBand;
  if (transient)
    return super ? SurvivalPhase::mixed : SurvivalPhase::pure_global_survival;
  return super ? SurvivalPhase::strong_local_survival
               : SurvivalPhase::certain_extinction;
}

SurvivalPhase survival_phase(const ValidatedModel& model) {
  return survival_phase(is_transient(model), classify(model).rho0);
}

ExtinctionReport extinction_report(const ValidatedModel& model,
                                   const std::vector<State>& queries,
                                   double tol) {
  ExtinctionReport report;
  auto q = solve_q(model, tol);
  auto Q = solve_Q(model, tol);
  report.q_w = q.values;
  report.Q_w = Q.values;
  report.q_iterations = q.iterations;
  report.Q_iterations = Q.iterations;
  report.q_residual = q.residual;
  report.Q_residual = Q.residual;
  report.converged = q.converged && Q.converged;
  report.mass_uncertainty = std::max(q.mass_uncertainty, Q.mass_uncertainty);
  report.rho0 = classify(model).rho0;
  report.transient = is_transient(model);
  report.phase = survival_phase(report.transient, report.rho0);
  report.query_states = queries;
  for (State x : queries) {
    report.q_x.push_back(q_at(model, report.q_w, x));
    report.Q_x.push_back(Q_at(model, report.Q_w, x));
  }
  return report;
}

}  // namespace cbp
