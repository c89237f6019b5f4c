#pragma once

#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "cbp/model.hpp"

namespace cbp {

/// Mean-offspring matrix over catalyst clocks and taboo passages. In the
/// extended form an off-catalyst state x is appended as a non-branching row
/// and column, and every taboo set is enlarged by x.
struct DMatrix {
  Eigen::MatrixXd entries;
  double lambda = 0.0;
  std::optional<State> extended_for;
  // Lattice-window diagnostics aggregated over the taboo solves.
  int window_radius_used = 0;
  double uncertainty = 0.0;
};

DMatrix build_D(const ValidatedModel& model, double lambda);
DMatrix build_D_ext(const ValidatedModel& model, State x, double lambda);

struct PerronResult {
  double root = 0.0;
  Eigen::VectorXd right;  // strictly positive, L1-normalized
  int iterations = 0;
  double bracket_spread = 0.0;
};

/// Perron root and right eigenvector of a nonnegative irreducible matrix by
/// power iteration, certified by the Collatz-Wielandt min/max ratio bracket
/// (relative spread < 1e-12). Falls back to a diagonal shift when the
/// positivity pattern is periodic.
PerronResult perron_eigen(const Eigen::MatrixXd& m);
double perron_root(const Eigen::MatrixXd& m);

enum class Criticality { subcritical, critical, supercritical };
std::string to_string(Criticality c);

struct CriticalityReport {
  double rho0 = 0.0;
  Criticality cls = Criticality::critical;
  // Populated only for supercritical models (by criticality_report):
  std::optional<double> nu;
  std::vector<double> u;    // Perron right vector of D(nu), sums to 1
  std::vector<double> c_w;  // c(w_k) = 1 / u_k
  double bisection_width = 0.0;
};

/// Perron root at lambda = 0 and the resulting class; |rho0 - 1| <= 1e-10 is
/// labeled critical rather than guessing a side.
CriticalityReport classify(const ValidatedModel& model);

/// Growth exponent: the root of rho(D(lambda)) = 1, by bisection on the
/// nonincreasing map lambda -> rho. Requires a supercritical model.
double malthusian(const ValidatedModel& model, double tol = 1e-10);

/// classify + malthusian + Perron vector u + c at the catalyst sites.
CriticalityReport criticality_report(const ValidatedModel& model,
                                     double tol = 1e-10);

/// c(x): 1/u_k at catalyst sites, 1/u_{N+1}(x) off the catalyst set, where
/// u(x) is the Perron vector of the extended matrix at nu normalized so its
/// first N components sum to 1.
double c_of(const ValidatedModel& model, const CriticalityReport& report,
            State x);

inline constexpr double kCriticalBand = 1e-10;

}  // namespace cbp
