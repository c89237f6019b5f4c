#pragma once

#include <complex>
#include <vector>

#include "cbp/model.hpp"

namespace cbp {

/// First-passage query: time to hit `to` after exiting `from`, with visits to
/// `taboo` forbidden strictly between exit and arrival. `to` terminates the
/// path even when it also appears in `taboo`.
struct TabooQuery {
  State from = 0;
  State to = 0;
  std::vector<State> taboo;
  double lambda = 0.0;
};

struct TransformValue {
  double value = 0.0;
  bool converged = true;
  // Lattice truncation diagnostics; 0 / exact for finite spaces.
  int window_radius_used = 0;
  double uncertainty = 0.0;
};

/// Declared tolerance of the lattice window refinement loop.
inline constexpr double kWindowTol = 1e-8;
inline constexpr int kWindowRadiusCap = 1 << 14;

/// E[exp(-lambda * passage time); passage finite]. Exact linear solve for
/// finite spaces; window refinement with boundary killing for the lattice.
TransformValue taboo_transform(const ValidatedModel& model,
                               const TabooQuery& query);

/// Single solve at a fixed lattice radius (ignored for finite spaces), at a
/// complex frequency; used by numerical transform inversion. Requires
/// Re(lambda) >= 0.
std::complex<double> taboo_transform_at(const ValidatedModel& model,
                                        State from, State to,
                                        const std::vector<State>& taboo,
                                        std::complex<double> lambda,
                                        int window_radius);

/// Probability of ever hitting `to` under the taboo, i.e. the transform at
/// lambda = 0.
double hitting_prob(const ValidatedModel& model, State from, State to,
                    const std::vector<State>& taboo);

/// Transform of the exponential holding at x followed by the taboo passage to
/// catalyst k avoiding the other catalysts. Rejects x on the catalyst set.
double holding_convolved_transform(const ValidatedModel& model, State x,
                                   std::size_t k, double lambda);

/// beta / (beta + lambda): transform of Exp(beta).
double G_transform(double beta, double lambda);
std::complex<double> G_transform(double beta, std::complex<double> lambda);

/// Transform of the catalyst-j clock convolved with passage j -> k avoiding
/// the other catalysts.
double Gjk_transform(const ValidatedModel& model, std::size_t j,
                     std::size_t k, double lambda);

struct TransienceReport {
  bool transient = false;
  // Largest shortfall 1 - sum_k mass(x -> w_k) over probed starting states.
  double max_escape = 0.0;
  double tol = 0.0;
};

/// True iff some probed state has total catalyst-hitting mass < 1 beyond the
/// numerical tolerance (finite: 1e-9; lattice: window refinement tolerance).
bool is_transient(const ValidatedModel& model);
TransienceReport transience_report(const ValidatedModel& model);

enum class PassageDirection { down, up };

/// Closed-form one-step first-passage transform for the asymmetric walk on
/// the integers (up rate a, down rate b); test oracle and lattice reference.
double bd_passage_transform(double a, double b, double lambda,
                            PassageDirection dir);

}  // namespace cbp
