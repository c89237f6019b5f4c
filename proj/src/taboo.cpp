#include "cbp/taboo.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <unordered_set>

#include <Eigen/Dense>

namespace cbp {

namespace {

// h_z = sum_{w != z} [q(z,w) / (lambda - q(z,z))] h_w for interior states,
// h_y = 1, h_taboo = 0. Returns h over all states of a finite space.
template <typename T>
std::vector<T> solve_h_finite(const ValidatedModel& m, State y,
                              const std::vector<State>& taboo, T lambda) {
  const auto n = static_cast<std::ptrdiff_t>(m.state_count());
  enum class Role : char { interior, target, blocked };
  std::vector<Role> role(n, Role::interior);
  for (State t : taboo) role[static_cast<std::size_t>(t)] = Role::blocked;
  role[static_cast<std::size_t>(y)] = Role::target;  // y wins over taboo

  std::vector<std::ptrdiff_t> unknown_index(n, -1);
  std::vector<State> unknowns;
  for (std::ptrdiff_t z = 0; z < n; ++z)
    if (role[z] == Role::interior) {
      unknown_index[z] = static_cast<std::ptrdiff_t>(unknowns.size());
      unknowns.push_back(z);
    }

  std::vector<T> h(n, T(0));
  h[static_cast<std::size_t>(y)] = T(1);
  if (!unknowns.empty()) {
    using Mat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic>;
    using Vec = Eigen::Matrix<T, Eigen::Dynamic, 1>;
    const auto u = static_cast<Eigen::Index>(unknowns.size());
    Mat A = Mat::Identity(u, u);
    Vec b = Vec::Zero(u);
    for (Eigen::Index i = 0; i < u; ++i) {
      const State z = unknowns[static_cast<std::size_t>(i)];
      const T denom = lambda + T(m.exit_rate(z));
      for (State w = 0; w < n; ++w) {
        if (w == z) continue;
        const double rate = m.generator_entry(z, w);
        if (rate <= 0.0) continue;
        const T coeff = T(rate) / denom;
        if (role[w] == Role::target)
          b(i) += coeff;
        else if (role[w] == Role::interior)
          A(i, unknown_index[w]) -= coeff;
      }
    }
    Vec x = Eigen::PartialPivLU<Mat>(A).solve(b);
    for (Eigen::Index i = 0; i < u; ++i)
      h[static_cast<std::size_t>(unknowns[static_cast<std::size_t>(i)])] =
          x(i);
  }
  return h;
}

// Same system on the lattice window [lo, hi] with killing outside; the
// tridiagonal structure is preserved by writing boundary states as trivial
// rows. Thomas elimination is stable here: every row is diagonally dominant.
template <typename T>
std::vector<T> solve_h_lattice(const ValidatedModel& m, State y,
                               const std::vector<State>& taboo, T lambda,
                               State lo, State hi) {
  const auto n = static_cast<std::size_t>(hi - lo + 1);
  const double a = m.rate_up();
  const double b = m.rate_down();
  std::unordered_set<State> blocked(taboo.begin(), taboo.end());
  blocked.erase(y);

  std::vector<T> diag(n, T(1)), lower(n, T(0)), upper(n, T(0)), rhs(n, T(0));
  for (std::size_t i = 0; i < n; ++i) {
    const State z = lo + static_cast<State>(i);
    if (z == y) {
      rhs[i] = T(1);
    } else if (!blocked.count(z)) {
      const T denom = lambda + T(a + b);
      if (i + 1 < n) upper[i] = -T(a) / denom;
      if (i > 0) lower[i] = -T(b) / denom;
    }
  }

  // Thomas algorithm, in place.
  for (std::size_t i = 1; i < n; ++i) {
    const T w = lower[i] / diag[i - 1];
    diag[i] -= w * upper[i - 1];
    rhs[i] -= w * rhs[i - 1];
  }
  std::vector<T> h(n);
  h[n - 1] = rhs[n - 1] / diag[n - 1];
  for (std::size_t i = n - 1; i-- > 0;)
    h[i] = (rhs[i] - upper[i] * h[i + 1]) / diag[i];
  return h;
}

template <typename T>
T eval_transform(const ValidatedModel& m, State from, State to,
                 const std::vector<State>& taboo, T lambda, int radius) {
  if (!m.is_lattice()) {
    auto h = solve_h_finite(m, to, taboo, lambda);
    T value = T(0);
    for (const auto& [w, p] : m.jumps_from(from))
      value += T(p) * h[static_cast<std::size_t>(w)];
    return value;
  }
  State lo = std::min(from, to);
  State hi = std::max(from, to);
  for (State t : taboo) {
    lo = std::min(lo, t);
    hi = std::max(hi, t);
  }
  lo -= radius;
  hi += radius;
  auto h = solve_h_lattice(m, to, taboo, lambda, lo, hi);
  auto h_at = [&](State z) -> T {
    if (z < lo || z > hi) return T(0);
    return h[static_cast<std::size_t>(z - lo)];
  };
  const double pu = m.lattice_up_prob();
  return T(pu) * h_at(from + 1) + T(1.0 - pu) * h_at(from - 1);
}

std::vector<State> other_catalysts(const ValidatedModel& m, std::size_t k) {
  std::vector<State> taboo;
  for (std::size_t i = 0; i < m.num_catalysts(); ++i)
    if (i != k) taboo.push_back(m.catalysts()[i].site);
  return taboo;
}

void check_state(const ValidatedModel& m, State x, const char* what) {
  if (!m.contains(x))
    throw PreconditionError(std::string(what) + " state out of range");
}

}  // namespace

TransformValue taboo_transform(const ValidatedModel& model,
                               const TabooQuery& query) {
  if (!(query.lambda >= 0.0))
    throw PreconditionError("taboo transform requires lambda >= 0");
  check_state(model, query.from, "source");
  check_state(model, query.to, "target");
  for (State t : query.taboo) check_state(model, t, "taboo");

  auto clamp01 = [](double v) { return std::min(1.0, std::max(0.0, v)); };

  TransformValue out;
  if (!model.is_lattice()) {
    out.value = clamp01(eval_transform(model, query.from, query.to,
                                       query.taboo, query.lambda, 0));
    return out;
  }

  int radius = std::clamp(model.base_radius(), 1, kWindowRadiusCap);
  double prev = eval_transform(model, query.from, query.to, query.taboo,
                               query.lambda, radius);
  double diff = std::numeric_limits<double>::infinity();
  while (radius < kWindowRadiusCap) {
    radius *= 2;
    const double v = eval_transform(model, query.from, query.to, query.taboo,
                                    query.lambda, radius);
    diff = std::abs(v - prev);
    prev = v;
    if (diff < kWindowTol) {
      out.value = clamp01(prev);
      out.converged = true;
      out.window_radius_used = radius;
      out.uncertainty = diff;
      return out;
    }
  }
  out.value = clamp01(prev);
  out.converged = false;
  out.window_radius_used = radius;
  out.uncertainty = std::isfinite(diff) ? diff : 1.0;
  return out;
}

std::complex<double> taboo_transform_at(const ValidatedModel& model,
                                        State from, State to,
                                        const std::vector<State>& taboo,
                                        std::complex<double> lambda,
                                        int window_radius) {
  if (lambda.real() < 0.0)
    throw PreconditionError("taboo transform requires Re(lambda) >= 0");
  return eval_transform(model, from, to, taboo, lambda, window_radius);
}

double hitting_prob(const ValidatedModel& model, State from, State to,
                    const std::vector<State>& taboo) {
  return taboo_transform(model, {from, to, taboo, 0.0}).value;
}

double holding_convolved_transform(const ValidatedModel& model, State x,
                                   std::size_t k, double lambda) {
  if (model.catalyst_index(x))
    throw PreconditionError(
        "holding-convolved transform is defined for states off the catalyst "
        "set");
  if (k >= model.num_catalysts())
    throw PreconditionError("catalyst index out of range");
  const double exit = model.exit_rate(x);
  const auto target = model.catalysts()[k].site;
  const double passage =
      taboo_transform(model, {x, target, other_catalysts(model, k), lambda})
          .value;
  return exit / (lambda + exit) * passage;
}

double G_transform(double beta, double lambda) {
  if (!(beta > 0.0) || !(lambda >= 0.0))
    throw PreconditionError("G transform requires beta > 0 and lambda >= 0");
  return beta / (beta + lambda);
}

std::complex<double> G_transform(double beta, std::complex<double> lambda) {
  return beta / (beta + lambda);
}

double Gjk_transform(const ValidatedModel& model, std::size_t j,
                     std::size_t k, double lambda) {
  if (j >= model.num_catalysts() || k >= model.num_catalysts())
    throw PreconditionError("catalyst index out of range");
  const auto& cj = model.catalysts()[j];
  const auto target = model.catalysts()[k].site;
  const double passage =
      taboo_transform(model,
                      {cj.site, target, other_catalysts(model, k), lambda})
          .value;
  return G_transform(cj.beta, lambda) * passage;
}

TransienceReport transience_report(const ValidatedModel& model) {
  std::vector<State> probes;
  for (const auto& c : model.catalysts()) probes.push_back(c.site);
  probes.push_back(model.start());
  std::sort(probes.begin(), probes.end());
  probes.erase(std::unique(probes.begin(), probes.end()), probes.end());

  TransienceReport report;
  for (State x : probes) {
    double total = 0.0;
    double unc = 0.0;
    for (std::size_t k = 0; k < model.num_catalysts(); ++k) {
      const auto tv = taboo_transform(
          model,
          {x, model.catalysts()[k].site, other_catalysts(model, k), 0.0});
      total += tv.value;
      unc += tv.uncertainty;
    }
    // Truncated lattice masses are lower bounds converging like the last
    // doubling difference; 4x covers the geometric tail of the 1/R decay.
    const double tol = model.is_lattice() ? 4.0 * unc + 1e-9 : 1e-9;
    report.tol = std::max(report.tol, tol);
    const double escape = 1.0 - total;
    report.max_escape = std::max(report.max_escape, escape);
    if (escape > tol) report.transient = true;
  }
  return report;
}

bool is_transient(const ValidatedModel& model) {
  return transience_report(model).transient;
}

double bd_passage_transform(double a, double b, double lambda,
                            PassageDirection dir) {
  if (!(a > 0.0) || !(b > 0.0) || !(lambda >= 0.0))
    throw PreconditionError(
        "birth-death transform requires a, b > 0 and lambda >= 0");
  const double s = a + b + lambda;
  const double disc = std::sqrt(std::max(0.0, s * s - 4.0 * a * b));
  // (s - sqrt(s^2-4ab)) / (2a) written without cancellation.
  return dir == PassageDirection::down ? 2.0 * b / (s + disc)
                                       : 2.0 * a / (s + disc);
}

}  // namespace cbp
