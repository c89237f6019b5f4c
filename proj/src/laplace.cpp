#include "cbp/laplace.hpp"

#include <cmath>
#include <numbers>
#include <vector>

#include "cbp/model.hpp"

namespace cbp {

double invert_transform(const TransformFn& fhat, double t,
                        const EulerInversion& params) {
  if (!(t > 0.0))
    throw PreconditionError("transform inversion requires t > 0");

  const double x = params.a / (2.0 * t);
  const double h = std::numbers::pi / t;
  const int n0 = params.base_terms;
  const int m = params.euler_terms;

  double sum = 0.5 * fhat({x, 0.0}).real();
  double sign = -1.0;
  for (int k = 1; k <= n0; ++k) {
    sum += sign * fhat({x, k * h}).real();
    sign = -sign;
  }

  // Euler acceleration: binomially weighted average of the next m partial
  // sums of the alternating series.
  std::vector<double> partial(static_cast<std::size_t>(m) + 1);
  partial[0] = sum;
  for (int j = 1; j <= m; ++j) {
    sum += sign * fhat({x, (n0 + j) * h}).real();
    sign = -sign;
    partial[static_cast<std::size_t>(j)] = sum;
  }
  double avg = 0.0;
  double binom = 1.0;  // C(m, 0)
  for (int j = 0; j <= m; ++j) {
    avg += binom * partial[static_cast<std::size_t>(j)];
    binom *= static_cast<double>(m - j) / (j + 1);
  }
  avg *= std::pow(0.5, m);

  return avg * std::exp(0.5 * params.a) / t;
}

double invert_cdf(const TransformFn& fhat, double t,
                  const EulerInversion& params) {
  if (t == 0.0) return 0.0;
  return invert_transform(
      [&fhat](std::complex<double> s) { return fhat(s) / s; }, t, params);
}

}  // namespace cbp
