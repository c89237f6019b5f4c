#include "cbp/verify.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>

#include "cbp/extinction.hpp"

namespace cbp {

namespace {

double median_of(std::vector<double> v) {
  if (v.empty()) return 0.0;
  const std::size_t mid = v.size() / 2;
  std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid),
                   v.end());
  double hi = v[mid];
  if (v.size() % 2 == 1) return hi;
  double lo =
      *std::max_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid));
  return 0.5 * (lo + hi);
}

std::vector<double> avg_ranks(const std::vector<double>& v) {
  const std::size_t n = v.size();
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::sort(idx.begin(), idx.end(),
            [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
  std::vector<double> r(n, 0.0);
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j + 1 < n && v[idx[j + 1]] == v[idx[i]]) ++j;
    const double avg = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) r[idx[k]] = avg;
    i = j + 1;
  }
  return r;
}

// Least squares of log(y) on t over indices >= from with y > 0. Used to
// smooth ensemble means before normalizing paths: pointwise means at
// feasible replicate counts carry ~R^{-1/2} noise that would feed straight
// into the oscillation statistic, while the growth curve itself is
// log-linear in the tail.
struct LogLinFit {
  double a = 0.0, b = 0.0;
  bool ok = false;
};

LogLinFit fit_log_linear(const std::vector<double>& t,
                         const std::vector<double>& y, std::size_t from) {
  LogLinFit fit;
  double st = 0.0, sy = 0.0, stt = 0.0, sty = 0.0;
  long n = 0;
  for (std::size_t g = from; g < t.size() && g < y.size(); ++g) {
    if (!(y[g] > 0.0)) continue;
    const double ly = std::log(y[g]);
    st += t[g];
    sy += ly;
    stt += t[g] * t[g];
    sty += t[g] * ly;
    ++n;
  }
  if (n == 0) return fit;
  const double dn = static_cast<double>(n);
  const double det = dn * stt - st * st;
  if (n == 1 || det <= 0.0) {
    fit.a = sy / dn;
    fit.b = 0.0;
  } else {
    fit.b = (dn * sty - st * sy) / det;
    fit.a = (sy - fit.b * st) / dn;
  }
  fit.ok = true;
  return fit;
}

}  // namespace

double spearman(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size())
    throw PreconditionError("rank correlation needs paired samples");
  if (a.size() < 2) return 1.0;
  const auto ra = avg_ranks(a);
  const auto rb = avg_ranks(b);
  const double n = static_cast<double>(a.size());
  double ma = 0.0, mb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ma += ra[i];
    mb += rb[i];
  }
  ma /= n;
  mb /= n;
  double va = 0.0, vb = 0.0, cov = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    va += (ra[i] - ma) * (ra[i] - ma);
    vb += (rb[i] - mb) * (rb[i] - mb);
    cov += (ra[i] - ma) * (rb[i] - mb);
  }
  if (va <= 0.0 || vb <= 0.0) return 1.0;  // constant sample: fully collapsed
  return cov / std::sqrt(va * vb);
}

double ks_distance(std::vector<double> a, std::vector<double> b) {
  if (a.empty() || b.empty())
    throw PreconditionError("Kolmogorov-Smirnov needs nonempty samples");
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  const double n = static_cast<double>(a.size());
  const double m = static_cast<double>(b.size());
  std::size_t i = 0, j = 0;
  double d = 0.0;
  while (i < a.size() && j < b.size()) {
    const double v = std::min(a[i], b[j]);
    while (i < a.size() && a[i] <= v) ++i;
    while (j < b.size() && b[j] <= v) ++j;
    d = std::max(d, std::abs(static_cast<double>(i) / n -
                             static_cast<double>(j) / m));
  }
  return d;
}

std::vector<Trajectory> collect_survivor_paths(
    const ValidatedModel& model, const std::vector<double>& t_grid,
    const std::vector<State>& y_list, std::size_t want, std::uint64_t seed,
    const SimCaps& caps, std::size_t max_attempts) {
  if (max_attempts == 0) max_attempts = 50 * std::max<std::size_t>(want, 1);
  std::vector<Trajectory> out;
  out.reserve(want);
  for (std::size_t k = 0; k < max_attempts && out.size() < want; ++k) {
    Trajectory traj = simulate(model, t_grid, y_list, seed + k, caps);
    if (traj.pop_cap_hit || traj.event_cap_hit) continue;  // unusable tail
    if (!traj.total.empty() && traj.total.back() > 0)
      out.push_back(std::move(traj));
  }
  return out;
}

StrongProxyReport verify_strong_proxy(const ValidatedModel& model,
                                      const EnsembleStats& stats,
                                      const std::vector<Trajectory>& paths) {
  StrongProxyReport rep;
  if (!model.generator_bounded())
    rep.failed_hypotheses.push_back("transition rates not uniformly bounded");
  if (!model.second_moments_ok())
    rep.failed_hypotheses.push_back("offspring second moments not finite");
  if (!rep.failed_hypotheses.empty()) {
    rep.refused = true;
    rep.verdict = "INCONCLUSIVE";
    return rep;
  }
  if (paths.empty()) {
    rep.failed_checks.push_back("no surviving paths retained");
    rep.verdict = "INCONCLUSIVE";
    return rep;
  }
  const std::vector<double>& grid = paths.front().t_grid;
  const std::size_t G = grid.size();
  if (G < 8)
    throw PreconditionError("path oscillation needs at least 8 grid times");
  for (const Trajectory& p : paths)
    if (p.t_grid != grid || p.y_list != paths.front().y_list)
      throw PreconditionError("paths disagree on the time grid");
  const std::size_t y_n = paths.front().y_list.size();

  // Component means: prefer the independent ensemble when it matches the
  // grid, otherwise average the retained paths themselves.
  std::vector<std::vector<double>> mean_c(1 + y_n,
                                          std::vector<double>(G, 0.0));
  const bool use_stats = stats.replicates > 0 && stats.t_grid == grid &&
                         stats.y_list == paths.front().y_list &&
                         stats.mean_total.size() == G;
  if (use_stats) {
    mean_c[0] = stats.mean_total;
    for (std::size_t i = 0; i < y_n; ++i) mean_c[1 + i] = stats.mean_local[i];
  } else {
    for (const Trajectory& p : paths)
      for (std::size_t g = 0; g < G; ++g) {
        mean_c[0][g] += static_cast<double>(p.total[g]);
        for (std::size_t i = 0; i < y_n; ++i)
          mean_c[1 + i][g] += static_cast<double>(p.local[i][g]);
      }
    const double inv = 1.0 / static_cast<double>(paths.size());
    for (auto& m : mean_c)
      for (double& v : m) v *= inv;
  }

  // Smooth normalizers over the last half of the grid; evaluation window is
  // the last quarter.
  const std::size_t g_fit = G / 2;
  const std::size_t g0 = (G - 1) - (G - 1) / 4;
  std::vector<LogLinFit> fits(mean_c.size());
  for (std::size_t c = 0; c < mean_c.size(); ++c)
    fits[c] = fit_log_linear(grid, mean_c[c], g_fit);

  std::vector<double> spreads;
  std::vector<double> rank_a, rank_b;
  for (const Trajectory& p : paths) {
    if (p.total.back() <= 0) continue;
    double osc = 0.0;
    bool any = false;
    std::vector<double> finals;
    for (std::size_t c = 0; c < mean_c.size(); ++c) {
      if (!fits[c].ok) continue;
      double lo = 0.0, hi = 0.0, sum = 0.0;
      bool first = true;
      for (std::size_t g = g0; g < G; ++g) {
        const std::int64_t count =
            c == 0 ? p.total[g] : p.local[c - 1][g];
        const double norm = std::exp(fits[c].a + fits[c].b * grid[g]);
        const double r = static_cast<double>(count) / norm;
        sum += r;
        if (first) {
          lo = hi = r;
          first = false;
        } else {
          lo = std::min(lo, r);
          hi = std::max(hi, r);
        }
        if (g == G - 1) finals.push_back(r);
      }
      const double avg = sum / static_cast<double>(G - g0);
      if (avg > 0.0) {
        osc = std::max(osc, (hi - lo) / avg);
        any = true;
      }
    }
    if (!any) continue;
    rep.tail_oscillation.push_back(osc);
    const double mx = *std::max_element(finals.begin(), finals.end());
    const double mn = *std::min_element(finals.begin(), finals.end());
    spreads.push_back(mx > 0.0 ? (mx - mn) / mx : 0.0);
    if (y_n >= 1) {
      rank_a.push_back(static_cast<double>(p.total.back()));
      rank_b.push_back(static_cast<double>(p.local[0].back()));
    }
  }
  rep.paths = rep.tail_oscillation.size();
  rep.median_tail_oscillation = median_of(rep.tail_oscillation);
  rep.median_final_spread = median_of(spreads);
  rep.max_final_spread =
      spreads.empty() ? 0.0 : *std::max_element(spreads.begin(), spreads.end());
  rep.co_converged = rep.median_final_spread < 0.2;
  if (y_n >= 1 && rep.paths >= 8) {
    rep.rank_correlation = spearman(rank_a, rank_b);
    rep.rank_checked = true;
  }

  if (rep.median_tail_oscillation >= 0.1)
    rep.failed_checks.push_back("median tail oscillation at or above 0.1");
  if (!rep.co_converged)
    rep.failed_checks.push_back("normalized components do not co-converge");
  if (rep.rank_checked && rep.rank_correlation <= 0.95)
    rep.failed_checks.push_back(
        "component rank correlation at or below 0.95");
  if (!rep.failed_checks.empty())
    rep.verdict = "FAIL";
  else if (rep.paths < 16)
    rep.verdict = "INCONCLUSIVE";
  else
    rep.verdict = "PASS";
  return rep;
}

WeakReport verify_weak(const ValidatedModel& model, const EnsembleStats& stats,
                       const PhiSolution& phi) {
  WeakReport rep;
  if (!model.generator_bounded())
    rep.failed_hypotheses.push_back("transition rates not uniformly bounded");
  if (!model.second_moments_ok())
    rep.failed_hypotheses.push_back("offspring second moments not finite");
  if (phi.lambda_grid.empty() || phi.u.empty())
    rep.failed_hypotheses.push_back("transform solution unavailable");
  if (stats.t_grid.size() < 2 || stats.final_total.empty() ||
      stats.prefinal_total.size() != stats.final_total.size())
    rep.failed_hypotheses.push_back(
        "two late snapshot times with per-replicate counts required");
  if (!rep.failed_hypotheses.empty()) {
    rep.refused = true;
    rep.verdict = "INCONCLUSIVE";
    return rep;
  }

  const std::size_t R = stats.final_total.size();
  const std::size_t G = stats.t_grid.size();
  rep.t1 = stats.t_grid[G - 2];
  rep.t2 = stats.t_grid[G - 1];

  // Distributional stability between the last two snapshots of mu(t)/mean.
  double mean1 = 0.0, mean2 = 0.0;
  for (std::size_t r = 0; r < R; ++r) {
    mean1 += static_cast<double>(stats.prefinal_total[r]);
    mean2 += static_cast<double>(stats.final_total[r]);
  }
  mean1 = mean1 > 0.0 ? mean1 / static_cast<double>(R) : 1.0;
  mean2 = mean2 > 0.0 ? mean2 / static_cast<double>(R) : 1.0;
  std::vector<double> a(R), b(R);
  for (std::size_t r = 0; r < R; ++r) {
    a[r] = static_cast<double>(stats.prefinal_total[r]) / mean1;
    b[r] = static_cast<double>(stats.final_total[r]) / mean2;
  }
  rep.ks_stat = ks_distance(a, b);
  rep.ks_bound = 3.0 * std::sqrt(2.0 / static_cast<double>(R));
  rep.ks_ok = rep.ks_stat < rep.ks_bound;

  // Locate the start state in the transform solution.
  const State x = model.start();
  PhiSolution extended;
  const PhiSolution* ps = &phi;
  std::size_t qi = 0;
  bool found = false;
  for (std::size_t i = 0; i < phi.query_states.size(); ++i)
    if (phi.query_states[i] == x) {
      qi = i;
      found = true;
      break;
    }
  if (!found) {
    if (auto j = model.catalyst_index(x)) {
      extended = phi;
      extended.query_states.push_back(x);
      extended.phi_x.push_back(phi.phi_w[*j]);
      extended.deriv0_x.push_back(phi.u[*j]);
      ps = &extended;
      qi = extended.query_states.size() - 1;
    } else {
      rep.refused = true;
      rep.failed_hypotheses.push_back(
          "start state missing from the transform query list");
      rep.verdict = "INCONCLUSIVE";
      return rep;
    }
  }
  const double c_x = 1.0 / ps->deriv0_x[qi];
  const FixedPointResult q_res = solve_q(model);
  const FixedPointResult Q_res = solve_Q(model);
  const double q_x = q_at(model, q_res.values, x);
  const double Q_x = Q_at(model, Q_res.values, x);
  rep.transform = phi_vs_simulation(*ps, stats, qi, c_x, q_x, Q_x);

  // Rank collapse of total vs first local component on survivors.
  long survivors = 0;
  std::vector<double> ra, rb;
  const bool have_local =
      !stats.y_list.empty() && !stats.final_local.empty() &&
      stats.final_local[0].size() == R;
  for (std::size_t r = 0; r < R; ++r) {
    if (stats.final_total[r] <= 0) continue;
    ++survivors;
    if (have_local) {
      ra.push_back(static_cast<double>(stats.final_total[r]));
      rb.push_back(static_cast<double>(stats.final_local[0][r]));
    }
  }
  rep.survivors = survivors;
  if (have_local && ra.size() >= 30) {
    rep.rank_correlation = spearman(ra, rb);
    rep.rank_checked = true;
    rep.rank_ok = rep.rank_correlation > 0.95;
  }

  if (!rep.ks_ok)
    rep.failed_checks.push_back("snapshot distributions differ beyond the KS bound");
  if (!rep.transform.within_3se)
    rep.failed_checks.push_back(
        "transform deviates beyond 3 combined standard errors");
  if (!rep.transform.atom_ok)
    rep.failed_checks.push_back("extinction atom outside the predicted band");
  if (rep.rank_checked && !rep.rank_ok)
    rep.failed_checks.push_back(
        "component rank correlation at or below 0.95");
  if (!rep.failed_checks.empty())
    rep.verdict = "FAIL";
  else if (survivors < 100)
    rep.verdict = "INCONCLUSIVE";
  else
    rep.verdict = "PASS";
  return rep;
}

}  // namespace cbp
