#include "cbp/spectral.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "cbp/taboo.hpp"

namespace cbp {

namespace {

// rows: catalyst sites, plus x when extended. Column taboo sets are
// W_j = W \ {w_j}, enlarged by x in the extended form.
DMatrix assemble(const ValidatedModel& m, double lambda,
                 std::optional<State> ext) {
  const std::size_t n_cat = m.num_catalysts();
  const std::size_t n = n_cat + (ext ? 1 : 0);

  std::vector<State> sites;
  std::vector<double> alpha, mean, g_star;
  for (const auto& c : m.catalysts()) {
    sites.push_back(c.site);
    alpha.push_back(c.alpha);
    mean.push_back(c.offspring.mean());
    g_star.push_back(G_transform(c.beta, lambda));
  }
  if (ext) {
    const double exit = m.exit_rate(*ext);
    sites.push_back(*ext);
    alpha.push_back(0.0);
    mean.push_back(0.0);
    g_star.push_back(exit / (exit + lambda));
  }

  DMatrix d;
  d.lambda = lambda;
  d.extended_for = ext;
  d.entries.setZero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));

  for (std::size_t j = 0; j < n; ++j) {
    std::vector<State> taboo;
    for (std::size_t k = 0; k < n; ++k)
      if (k != j) taboo.push_back(sites[k]);
    for (std::size_t i = 0; i < n; ++i) {
      const auto tv =
          taboo_transform(m, {sites[i], sites[j], taboo, lambda});
      if (!tv.converged)
        throw ConvergenceError(
            "lattice window exhausted while assembling the mean matrix "
            "(state " + m.label_of(sites[i]) + " -> " +
                m.label_of(sites[j]) + ")",
            tv.uncertainty);
      d.window_radius_used =
          std::max(d.window_radius_used, tv.window_radius_used);
      d.uncertainty = std::max(d.uncertainty, tv.uncertainty);
      double entry = (1.0 - alpha[i]) * g_star[i] * tv.value;
      if (i == j) entry += alpha[i] * mean[i] * g_star[i];
      d.entries(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
          entry;
    }
  }
  return d;
}

bool strongly_connected(const Eigen::MatrixXd& m) {
  const auto n = static_cast<std::size_t>(m.rows());
  auto reach = [&](bool forward) {
    std::vector<char> seen(n, 0);
    std::vector<std::size_t> stack{0};
    seen[0] = 1;
    std::size_t count = 1;
    while (!stack.empty()) {
      const std::size_t v = stack.back();
      stack.pop_back();
      for (std::size_t w = 0; w < n; ++w) {
        const double e = forward ? m(static_cast<Eigen::Index>(v),
                                     static_cast<Eigen::Index>(w))
                                 : m(static_cast<Eigen::Index>(w),
                                     static_cast<Eigen::Index>(v));
        if (e > 0.0 && !seen[w]) {
          seen[w] = 1;
          ++count;
          stack.push_back(w);
        }
      }
    }
    return count == n;
  };
  return reach(true) && reach(false);
}

// One certified power-iteration run; returns nullopt if the Collatz-Wielandt
// spread does not close within max_iters (periodic pattern).
std::optional<PerronResult> power_iterate(const Eigen::MatrixXd& m,
                                          int max_iters, double rel_tol) {
  const Eigen::Index n = m.rows();
  Eigen::VectorXd v = Eigen::VectorXd::Ones(n) / static_cast<double>(n);
  PerronResult out;
  for (int it = 1; it <= max_iters; ++it) {
    Eigen::VectorXd w = m * v;
    double lo = std::numeric_limits<double>::infinity();
    double hi = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      const double r = w(i) / v(i);
      lo = std::min(lo, r);
      hi = std::max(hi, r);
    }
    v = w / w.sum();
    if (hi - lo <= rel_tol * hi) {
      out.root = 0.5 * (lo + hi);
      out.right = v;
      out.iterations = it;
      out.bracket_spread = hi - lo;
      return out;
    }
  }
  return std::nullopt;
}

}  // namespace

DMatrix build_D(const ValidatedModel& model, double lambda) {
  if (!(lambda >= 0.0))
    throw PreconditionError("mean matrix requires lambda >= 0");
  return assemble(model, lambda, std::nullopt);
}

DMatrix build_D_ext(const ValidatedModel& model, State x, double lambda) {
  if (!(lambda >= 0.0))
    throw PreconditionError("mean matrix requires lambda >= 0");
  if (model.catalyst_index(x))
    throw PreconditionError(
        "extended mean matrix takes a state off the catalyst set");
  if (!model.contains(x)) throw PreconditionError("state out of range");
  return assemble(model, lambda, x);
}

PerronResult perron_eigen(const Eigen::MatrixXd& m) {
  if (m.rows() != m.cols() || m.rows() == 0)
    throw PreconditionError("Perron root requires a nonempty square matrix");
  if (m.minCoeff() < 0.0)
    throw PreconditionError("Perron root requires a nonnegative matrix");
  if (m.rows() == 1) {
    PerronResult out;
    out.root = m(0, 0);
    out.right = Eigen::VectorXd::Ones(1);
    return out;
  }
  if (!strongly_connected(m))
    throw PreconditionError("Perron root requires an irreducible matrix");

  constexpr double kRelTol = 1e-12;
  if (auto res = power_iterate(m, 512, kRelTol)) return *res;

  // Periodic positivity pattern: shift by the identity, which adds exactly 1
  // to every eigenvalue of a nonnegative matrix and makes it primitive.
  Eigen::MatrixXd shifted = m + Eigen::MatrixXd::Identity(m.rows(), m.cols());
  if (auto res = power_iterate(shifted, 50000, kRelTol)) {
    res->root -= 1.0;
    return *res;
  }
  throw ConvergenceError(
      "power iteration failed to certify the Perron root");
}

double perron_root(const Eigen::MatrixXd& m) { return perron_eigen(m).root; }

std::string to_string(Criticality c) {
  switch (c) {
    case Criticality::subcritical: return "subcritical";
    case Criticality::critical: return "critical";
    case Criticality::supercritical: return "supercritical";
  }
  return "unknown";
}

CriticalityReport classify(const ValidatedModel& model) {
  CriticalityReport report;
  report.rho0 = perron_root(build_D(model, 0.0).entries);
  if (report.rho0 > 1.0 + kCriticalBand)
    report.cls = Criticality::supercritical;
  else if (report.rho0 < 1.0 - kCriticalBand)
    report.cls = Criticality::subcritical;
  else
    report.cls = Criticality::critical;
  return report;
}

double malthusian(const ValidatedModel& model, double tol) {
  if (!(tol > 0.0)) throw PreconditionError("tolerance must be positive");
  auto report = classify(model);
  if (report.cls != Criticality::supercritical)
    throw PreconditionError(
        "growth exponent is defined for supercritical models only (rho0 = " +
        std::to_string(report.rho0) + ", " + to_string(report.cls) + ")");

  auto rho = [&model](double lambda) {
    return perron_root(build_D(model, lambda).entries);
  };

  double hi = 1.0;
  int guard = 0;
  while (rho(hi) >= 1.0) {
    hi *= 2.0;
    if (++guard > 60)
      throw ConvergenceError("no finite bracket for the growth exponent");
  }
  double lo = 0.0;
  while (hi - lo > tol) {
    const double mid = 0.5 * (lo + hi);
    if (rho(mid) >= 1.0)
      lo = mid;
    else
      hi = mid;
  }
  return 0.5 * (lo + hi);
}

CriticalityReport criticality_report(const ValidatedModel& model,
                                     double tol) {
  CriticalityReport report = classify(model);
  if (report.cls != Criticality::supercritical) return report;
  const double nu = malthusian(model, tol);
  report.nu = nu;
  report.bisection_width = tol;
  auto eig = perron_eigen(build_D(model, nu).entries);
  const double total = eig.right.sum();
  report.u.resize(model.num_catalysts());
  report.c_w.resize(model.num_catalysts());
  for (std::size_t k = 0; k < model.num_catalysts(); ++k) {
    report.u[k] = eig.right(static_cast<Eigen::Index>(k)) / total;
    report.c_w[k] = 1.0 / report.u[k];
  }
  return report;
}

double c_of(const ValidatedModel& model, const CriticalityReport& report,
            State x) {
  if (!report.nu)
    throw PreconditionError(
        "c(x) requires a supercritical report with the growth exponent");
  if (auto k = model.catalyst_index(x)) return report.c_w[*k];

  auto ext = build_D_ext(model, x, *report.nu);
  auto eig = perron_eigen(ext.entries);
  const auto n_cat = static_cast<Eigen::Index>(model.num_catalysts());
  const double head = eig.right.head(n_cat).sum();
  const double u_x = eig.right(n_cat) / head;
  return 1.0 / u_x;
}

}  // namespace cbp
