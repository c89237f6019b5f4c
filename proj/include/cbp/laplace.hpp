#pragma once

#include <complex>
#include <functional>

namespace cbp {

using TransformFn =
    std::function<std::complex<double>(std::complex<double>)>;

/// Bromwich-integral inversion by alternating-series Euler summation
/// (Abate-Whitt). With the default contour parameter the discretization
/// error for transforms of bounded functions is about e^{-a} ~ 1e-8.
struct EulerInversion {
  double a = 18.4;
  int base_terms = 15;
  int euler_terms = 11;
};

/// Value at t > 0 of the function whose Laplace transform is `fhat`.
double invert_transform(const TransformFn& fhat, double t,
                        const EulerInversion& params = {});

/// CDF at t >= 0 of the (possibly defective) measure whose
/// Laplace-Stieltjes transform is `fhat`: inverts fhat(s)/s.
double invert_cdf(const TransformFn& fhat, double t,
                  const EulerInversion& params = {});

}  // namespace cbp
