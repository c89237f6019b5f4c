#include "cbp/limit_laws.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <limits>
#include <utility>

#include "cbp/extinction.hpp"
#include "cbp/laplace.hpp"
#include "cbp/taboo.hpp"

namespace cbp {

namespace {

// Truncated-tail threshold for inverted time-domain measures. The nominal
// target is 1e-10, but the transform inversion itself carries ~1e-8 absolute
// noise, so tails below that cannot be certified; the remaining mass is
// lumped into the last node, which keeps totals exact and bounds the induced
// quadrature error by the tail itself.
constexpr double kTailNoise = 3e-8;
constexpr std::size_t kMaxNodes = 4096;

// One u-quadrature node of a (possibly defective) holding/passage measure,
// pre-resolved against the lambda grid: for grid point i and node n the
// integrand argument is lambda_i * decay_n, stored either as an
// interpolation bracket (idx >= 1) or, below the first positive grid point,
// as the raw argument for the two-term expansion (idx = -1).
struct NodeRef {
  std::int32_t idx = -1;
  double t = 0.0;  // interpolation weight, or the raw argument when idx < 0
};

struct UMeasure {
  std::vector<double> w;      // node weights; sum + nothing else == mass
  std::vector<double> decay;  // e^{-nu u_node} per node
  double mass = 0.0;
  bool tail_ok = true;
  std::vector<NodeRef> table;  // (grid_size - 1) rows, one per positive grid
};

double quantile_step(double rate, double nu) {
  const double scale =
      std::min({1.0 / rate, 1.0, 1.0 / std::max(nu, 1e-12)});
  return scale / 32.0;
}

UMeasure exp_measure(double beta, double nu) {
  UMeasure m;
  double du = quantile_step(beta, nu);
  const double U0 = 25.33 / beta;  // Exp(beta) tail ~ 1e-11 past this point
  du = std::max(du, U0 / static_cast<double>(kMaxNodes));
  const std::size_t n = static_cast<std::size_t>(std::ceil(U0 / du));
  m.w.resize(n + 1);
  m.decay.resize(n + 1);
  for (std::size_t k = 1; k <= n; ++k) {
    m.w[k - 1] = std::exp(-beta * du * static_cast<double>(k - 1)) -
                 std::exp(-beta * du * static_cast<double>(k));
    m.decay[k - 1] = std::exp(-nu * du * (static_cast<double>(k) - 0.5));
  }
  const double U = du * static_cast<double>(n);
  m.w[n] = std::exp(-beta * U);
  m.decay[n] = std::exp(-nu * U);
  m.mass = 1.0;
  return m;
}

UMeasure inverted_measure(const TransformFn& fhat, double mass, double rate,
                          double nu) {
  UMeasure m;
  m.mass = mass;
  if (mass <= 1e-14) {  // unreachable target: empty measure
    m.w.assign(1, 0.0);
    m.decay.assign(1, 1.0);
    return m;
  }
  const double tail_tol = std::max(1e-10, kTailNoise);
  double U = 8.0 * std::max(1.0 / rate, 1.0);
  double tail = mass - invert_cdf(fhat, U);
  for (int d = 0; d < 12 && tail > tail_tol; ++d) {
    U *= 2.0;
    tail = mass - invert_cdf(fhat, U);
  }
  m.tail_ok = tail <= tail_tol;

  double du = quantile_step(rate, nu);
  du = std::max(du, U / static_cast<double>(kMaxNodes));
  const std::size_t n = static_cast<std::size_t>(std::ceil(U / du));
  U = du * static_cast<double>(n);
  m.w.resize(n + 1);
  m.decay.resize(n + 1);
  double prev = 0.0;
  double total = 0.0;
  for (std::size_t k = 1; k <= n; ++k) {
    const double cur = invert_cdf(fhat, du * static_cast<double>(k));
    m.w[k - 1] = std::max(cur - prev, 0.0);
    total += m.w[k - 1];
    m.decay[k - 1] = std::exp(-nu * du * (static_cast<double>(k) - 0.5));
    prev = cur;
  }
  double lump = mass - total;
  if (lump < 0.0) {  // inversion noise overshot: rescale back to exact mass
    const double scale = mass / total;
    for (std::size_t k = 0; k < n; ++k) m.w[k] *= scale;
    lump = 0.0;
  }
  m.w[n] = lump;
  m.decay[n] = std::exp(-nu * U);
  return m;
}

void build_table(UMeasure& m, const std::vector<double>& grid) {
  const std::size_t rows = grid.size() - 1;
  const std::size_t nodes = m.w.size();
  m.table.assign(rows * nodes, NodeRef{});
  for (std::size_t i = 1; i < grid.size(); ++i) {
    NodeRef* row = m.table.data() + (i - 1) * nodes;
    for (std::size_t nd = 0; nd < nodes; ++nd) {
      const double arg = grid[i] * m.decay[nd];
      if (arg < grid[1]) {
        row[nd].idx = -1;
        row[nd].t = arg;
        continue;
      }
      auto it = std::upper_bound(grid.begin() + 1, grid.end(), arg);
      std::size_t hi = static_cast<std::size_t>(it - grid.begin());
      if (hi >= grid.size()) hi = grid.size() - 1;
      const std::size_t lo = hi - 1;
      row[nd].idx = static_cast<std::int32_t>(lo);
      row[nd].t = (arg - grid[lo]) / (grid[hi] - grid[lo]);
    }
  }
}

// phi(lambda_i * decay_n; coordinate with values `vals` and zero-slope
// `slope`), integrated against the measure.
double integrate_linear(const UMeasure& m, std::size_t grid_i,
                        const std::vector<double>& vals, double slope) {
  const std::size_t nodes = m.w.size();
  const NodeRef* row = m.table.data() + (grid_i - 1) * nodes;
  double acc = 0.0;
  for (std::size_t nd = 0; nd < nodes; ++nd) {
    const NodeRef r = row[nd];
    const double ph = r.idx < 0
                          ? 1.0 - slope * r.t
                          : vals[r.idx] + r.t * (vals[r.idx + 1] - vals[r.idx]);
    acc += m.w[nd] * ph;
  }
  return acc;
}

double horner(const std::vector<double>& coeff, double s) {
  double v = 0.0;
  for (std::size_t k = coeff.size(); k-- > 0;) v = v * s + coeff[k];
  return v;
}

// Same integral with the offspring generating function applied inside.
double integrate_branch(const UMeasure& m, std::size_t grid_i,
                        const std::vector<double>& vals, double slope,
                        const std::vector<double>& pgf_coeff) {
  const std::size_t nodes = m.w.size();
  const NodeRef* row = m.table.data() + (grid_i - 1) * nodes;
  double acc = 0.0;
  for (std::size_t nd = 0; nd < nodes; ++nd) {
    const NodeRef r = row[nd];
    double ph = r.idx < 0
                    ? 1.0 - slope * r.t
                    : vals[r.idx] + r.t * (vals[r.idx + 1] - vals[r.idx]);
    ph = std::clamp(ph, 0.0, 1.0);
    acc += m.w[nd] * horner(pgf_coeff, ph);
  }
  return acc;
}

double sample_grid(const std::vector<double>& grid,
                   const std::vector<double>& vals, double slope,
                   double lambda) {
  if (!(lambda > 0.0)) return 1.0;
  if (lambda < grid[1]) return 1.0 - slope * lambda;
  if (lambda >= grid.back()) return vals.back();
  auto it = std::upper_bound(grid.begin() + 1, grid.end(), lambda);
  const std::size_t hi = static_cast<std::size_t>(it - grid.begin());
  const std::size_t lo = hi - 1;
  const double t = (lambda - grid[lo]) / (grid[hi] - grid[lo]);
  return vals[lo] + t * (vals[hi] - vals[lo]);
}

std::vector<double> dense_pgf(const OffspringLaw& law) {
  std::vector<double> coeff(static_cast<std::size_t>(law.max_count()) + 1,
                            0.0);
  for (const auto& [count, prob] : law.pmf())
    coeff[static_cast<std::size_t>(count)] += prob;
  return coeff;
}

std::vector<State> taboo_except(const ValidatedModel& model, std::size_t k) {
  std::vector<State> taboo;
  for (std::size_t j = 0; j < model.num_catalysts(); ++j)
    if (j != k) taboo.push_back(model.catalysts()[j].site);
  return taboo;
}

}  // namespace

PhiSolution solve_phi(const ValidatedModel& model,
                      const CriticalityReport& report,
                      const std::vector<State>& queries,
                      const PhiOptions& options) {
  if (report.cls != Criticality::supercritical || !report.nu)
    throw PreconditionError(
        "phi system is defined for supercritical models with nu computed");
  const std::size_t N = model.num_catalysts();
  if (report.u.size() != N)
    throw PreconditionError("criticality report lacks the Perron vector");

  PhiSolution out;
  out.nu = *report.nu;
  out.query_states = queries;

  const std::size_t points = std::max<std::size_t>(options.grid_points, 8);
  const double lmin = options.lambda_min;
  const double lmax = std::max(options.lambda_max, lmin * 8);
  out.lambda_grid.resize(points + 1);
  out.lambda_grid[0] = 0.0;
  const double ratio =
      std::pow(lmax / lmin, 1.0 / static_cast<double>(points - 1));
  for (std::size_t i = 1; i <= points; ++i)
    out.lambda_grid[i] =
        lmin * std::pow(ratio, static_cast<double>(i - 1));
  out.lambda_grid[points] = lmax;
  const auto& grid = out.lambda_grid;
  const std::size_t G = grid.size();

  const FixedPointResult Qres = solve_Q(model);
  out.Q_w = Qres.values;
  out.converged = Qres.converged;

  // Holding-clock and clock+passage measures for the catalyst system.
  std::vector<UMeasure> clock(N);
  std::vector<std::vector<UMeasure>> pass(N, std::vector<UMeasure>(N));
  std::vector<double> escape(N, 0.0);
  std::vector<std::vector<double>> pgf_coeff(N);
  for (std::size_t j = 0; j < N; ++j) {
    const auto& cat = model.catalysts()[j];
    clock[j] = exp_measure(cat.beta, out.nu);
    build_table(clock[j], grid);
    pgf_coeff[j] = dense_pgf(cat.offspring);
    double mass_sum = 0.0;
    for (std::size_t k = 0; k < N; ++k) {
      const std::vector<State> taboo = taboo_except(model, k);
      const State to = model.catalysts()[k].site;
      const TransformValue at0 =
          taboo_transform(model, {cat.site, to, taboo, 0.0});
      out.converged = out.converged && at0.converged;
      const int radius = at0.window_radius_used;
      const double beta = cat.beta;
      const State from = cat.site;
      TransformFn fhat = [&model, from, to, taboo, beta,
                          radius](std::complex<double> s) {
        return G_transform(beta, s) *
               taboo_transform_at(model, from, to, taboo, s, radius);
      };
      pass[j][k] = inverted_measure(fhat, at0.value, beta, out.nu);
      out.converged = out.converged && pass[j][k].tail_ok;
      build_table(pass[j][k], grid);
      mass_sum += pass[j][k].mass;
    }
    escape[j] = 1.0 - mass_sum;
  }

  // Expansion slopes -phi'(0; w_j): the derivative identity ties them to the
  // Perron vector of the mean matrix at nu. Using the vector of the
  // *quadrature* version of that matrix (same nodes and weights as the
  // sweeps) keeps the sub-grid expansion consistent with the grid equations
  // to machine precision instead of to quadrature accuracy.
  {
    Eigen::MatrixXd Dq = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(N),
                                               static_cast<Eigen::Index>(N));
    for (std::size_t j = 0; j < N; ++j) {
      const auto& cat = model.catalysts()[j];
      double clock_hat = 0.0;
      for (std::size_t nd = 0; nd < clock[j].w.size(); ++nd)
        clock_hat += clock[j].w[nd] * clock[j].decay[nd];
      for (std::size_t k = 0; k < N; ++k) {
        double pass_hat = 0.0;
        for (std::size_t nd = 0; nd < pass[j][k].w.size(); ++nd)
          pass_hat += pass[j][k].w[nd] * pass[j][k].decay[nd];
        Dq(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(k)) =
            (1.0 - cat.alpha) * pass_hat +
            (j == k ? cat.alpha * cat.offspring.mean() * clock_hat : 0.0);
      }
    }
    out.u = std::vector<double>(N);
    const PerronResult pr = perron_eigen(Dq);
    for (std::size_t j = 0; j < N; ++j)
      out.u[j] = pr.right(static_cast<Eigen::Index>(j));
  }

  // Jacobi sweeps: every positive grid point reads only arguments strictly
  // below itself, so updates within a sweep are independent.
  out.phi_w.assign(N, std::vector<double>(G, 1.0));
  for (std::size_t j = 0; j < N; ++j)
    for (std::size_t i = 1; i < G; ++i)
      out.phi_w[j][i] =
          out.Q_w[j] + (1.0 - out.Q_w[j]) * std::exp(-grid[i]);

  std::vector<std::vector<double>> next = out.phi_w;
  double delta = std::numeric_limits<double>::infinity();
  long sweeps = 0;
  while (sweeps < options.max_sweeps && delta >= options.tol) {
    delta = 0.0;
    for (std::size_t i = 1; i < G; ++i) {
      for (std::size_t j = 0; j < N; ++j) {
        const auto& cat = model.catalysts()[j];
        double move = escape[j];
        for (std::size_t k = 0; k < N; ++k)
          move += integrate_linear(pass[j][k], i, out.phi_w[k], out.u[k]);
        const double branch =
            integrate_branch(clock[j], i, out.phi_w[j], out.u[j],
                             pgf_coeff[j]);
        const double rhs =
            std::clamp(cat.alpha * branch + (1.0 - cat.alpha) * move, 0.0,
                       1.0);
        delta = std::max(delta, std::abs(rhs - out.phi_w[j][i]));
        next[j][i] = rhs;
      }
    }
    std::swap(out.phi_w, next);
    ++sweeps;
  }
  out.iterations = sweeps;
  out.converged = out.converged && delta < options.tol;

  // Defect of the returned values, evaluated once more over the whole grid.
  double defect = 0.0;
  for (std::size_t i = 1; i < G; ++i) {
    for (std::size_t j = 0; j < N; ++j) {
      const auto& cat = model.catalysts()[j];
      double move = escape[j];
      for (std::size_t k = 0; k < N; ++k)
        move += integrate_linear(pass[j][k], i, out.phi_w[k], out.u[k]);
      const double branch = integrate_branch(clock[j], i, out.phi_w[j],
                                             out.u[j], pgf_coeff[j]);
      const double rhs = cat.alpha * branch + (1.0 - cat.alpha) * move;
      defect = std::max(defect, std::abs(rhs - out.phi_w[j][i]));
    }
  }
  out.residual = defect;

  // Off-catalyst formula for the queried states.
  out.phi_x.assign(queries.size(), std::vector<double>(G, 1.0));
  out.deriv0_x.assign(queries.size(), 0.0);
  for (std::size_t qi = 0; qi < queries.size(); ++qi) {
    const State x = queries[qi];
    if (auto idx = model.catalyst_index(x)) {
      out.phi_x[qi] = out.phi_w[*idx];
      out.deriv0_x[qi] = out.u[*idx];
      continue;
    }
    const double exit = model.exit_rate(x);
    double mass_sum = 0.0;
    std::vector<UMeasure> reach(N);
    for (std::size_t k = 0; k < N; ++k) {
      const std::vector<State> taboo = taboo_except(model, k);
      const State to = model.catalysts()[k].site;
      const TransformValue at0 = taboo_transform(model, {x, to, taboo, 0.0});
      out.converged = out.converged && at0.converged;
      const int radius = at0.window_radius_used;
      TransformFn fhat = [&model, x, to, taboo, exit,
                          radius](std::complex<double> s) {
        return G_transform(exit, s) *
               taboo_transform_at(model, x, to, taboo, s, radius);
      };
      reach[k] = inverted_measure(fhat, at0.value, exit, out.nu);
      out.converged = out.converged && reach[k].tail_ok;
      build_table(reach[k], grid);
      mass_sum += reach[k].mass;
    }
    const double escape_x = 1.0 - mass_sum;
    for (std::size_t i = 1; i < G; ++i) {
      double acc = escape_x;
      for (std::size_t k = 0; k < N; ++k)
        acc += integrate_linear(reach[k], i, out.phi_w[k], out.u[k]);
      out.phi_x[qi][i] = std::clamp(acc, 0.0, 1.0);
    }
    double slope = 0.0;
    for (std::size_t k = 0; k < N; ++k) {
      double ghat = 0.0;
      for (std::size_t nd = 0; nd < reach[k].w.size(); ++nd)
        ghat += reach[k].w[nd] * reach[k].decay[nd];
      slope += out.u[k] * ghat;
    }
    out.deriv0_x[qi] = slope;
  }
  return out;
}

double phi_at(const PhiSolution& phi, std::size_t j, double lambda) {
  if (j >= phi.phi_w.size())
    throw PreconditionError("catalyst index out of range");
  return sample_grid(phi.lambda_grid, phi.phi_w[j], phi.u[j], lambda);
}

double phi_query_at(const PhiSolution& phi, std::size_t query_index,
                    double lambda) {
  if (query_index >= phi.phi_x.size())
    throw PreconditionError("query index out of range");
  return sample_grid(phi.lambda_grid, phi.phi_x[query_index],
                     phi.deriv0_x[query_index], lambda);
}

TransformComparison phi_vs_simulation(const PhiSolution& phi,
                                      const EnsembleStats& stats,
                                      std::size_t query_index, double c_x,
                                      double q_x, double Q_x) {
  TransformComparison out;
  const auto& counts = stats.final_total;
  const double R = static_cast<double>(counts.size());
  if (counts.empty()) return out;

  double mean = 0.0;
  for (auto n : counts) mean += static_cast<double>(n);
  mean /= R;
  const double norm = mean > 0.0 ? mean : 1.0;
  double var_n = 0.0;
  for (auto n : counts) {
    const double d = static_cast<double>(n) - mean;
    var_n += d * d;
  }
  var_n = counts.size() > 1 ? var_n / (R - 1.0) : 0.0;
  const double se_mean = std::sqrt(var_n / R);

  // Beyond lambda ~ 50 the empirical side is within noise of the atom
  // frequency; the transform comparison adds nothing there.
  constexpr double kLambdaCut = 50.0;
  for (double lam : phi.lambda_grid) {
    if (lam > kLambdaCut) break;
    double s1 = 0.0, s2 = 0.0, sn = 0.0;
    for (auto n : counts) {
      const double y = std::exp(-lam * static_cast<double>(n) / norm);
      s1 += y;
      s2 += y * y;
      sn += y * static_cast<double>(n);
    }
    const double emp = s1 / R;
    const double var_y =
        counts.size() > 1 ? std::max(0.0, (s2 - s1 * s1 / R) / (R - 1.0))
                          : 0.0;
    const double se_emp = std::sqrt(var_y / R);
    // Delta-method term for the estimated normalizer.
    const double dmean = lam / (norm * norm) * (sn / R);
    const double se_norm = std::abs(dmean) * se_mean;
    const double analytic = phi_query_at(phi, query_index, lam * c_x);
    const double se =
        std::sqrt(se_emp * se_emp + se_norm * se_norm) + 1e-4;
    out.lambdas.push_back(lam);
    out.empirical.push_back(emp);
    out.analytic.push_back(analytic);
    out.combined_se.push_back(se);
    out.max_dev_over_se =
        std::max(out.max_dev_over_se, std::abs(emp - analytic) / se);
  }
  out.within_3se = out.max_dev_over_se <= 3.0;

  std::size_t zeros = 0;
  for (auto n : counts)
    if (n == 0) ++zeros;
  out.atom_freq = static_cast<double>(zeros) / R;
  const double se_atom =
      std::sqrt(out.atom_freq * (1.0 - out.atom_freq) / R) + 1.0 / R;
  out.atom_lo = q_x - 3.0 * se_atom;
  out.atom_hi = Q_x + 3.0 * se_atom;
  out.atom_ok = out.atom_freq >= out.atom_lo && out.atom_freq <= out.atom_hi;
  return out;
}

SmoothnessReport density_smoothness_check(
    const std::vector<std::int64_t>& final_counts) {
  SmoothnessReport out;
  if (final_counts.empty()) {
    out.skipped = true;
    return out;
  }
  std::vector<double> survivors;
  std::size_t zeros = 0;
  for (auto n : final_counts) {
    if (n > 0)
      survivors.push_back(static_cast<double>(n));
    else
      ++zeros;
  }
  out.atom_freq =
      static_cast<double>(zeros) / static_cast<double>(final_counts.size());
  out.survivors = survivors.size();
  if (survivors.size() < 50) {
    out.skipped = true;
    return out;
  }
  const auto [lo, hi] = std::minmax_element(survivors.begin(),
                                            survivors.end());
  if (*lo == *hi) {  // degenerate law, e.g. deterministic unit offspring
    out.skipped = true;
    return out;
  }
  double mean = 0.0;
  for (double v : survivors) mean += v;
  mean /= static_cast<double>(survivors.size());
  const double top = *hi / mean;

  // An off-zero atom must dominate its neighborhood at both bandwidths.
  auto flagged_centers = [&](std::size_t bins) {
    std::vector<double> centers;
    std::vector<double> freq(bins, 0.0);
    for (double v : survivors) {
      std::size_t b = static_cast<std::size_t>(v / mean / top *
                                               static_cast<double>(bins));
      if (b >= bins) b = bins - 1;
      freq[b] += 1.0 / static_cast<double>(survivors.size());
    }
    const double floor = 25.0 / static_cast<double>(survivors.size());
    for (std::size_t b = 1; b + 1 < bins; ++b) {
      const double nb = 0.5 * (freq[b - 1] + freq[b + 1]);
      if (freq[b] >= floor && freq[b] > 10.0 * std::max(nb, floor / 25.0))
        centers.push_back((static_cast<double>(b) + 0.5) * top /
                          static_cast<double>(bins));
    }
    return centers;
  };
  const std::vector<double> c1 = flagged_centers(24);
  const std::vector<double> c2 = flagged_centers(48);
  const double bin1 = top / 24.0;
  for (double c : c2)
    for (double d : c1)
      if (std::abs(c - d) <= bin1) out.atom_flagged = true;
  return out;
}

}  // namespace cbp
