#pragma once

// Double-exponential (tanh-sinh / exp-sinh) quadrature.  Chosen because the
// Stieltjes integrands downstream carry integrable endpoint singularities
// (tau^{p/2-1} densities, sigma^{q/2-1} weights) that defeat plain Gauss
// rules; under the tanh-sinh change of variables they become smooth and the
// trapezoid sum converges at double-exponential rate.

#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>

namespace folspec {

struct QuadratureOptions {
  double rel_tol = 1e-12;   // stop when the level-to-level change is this small
  int max_level = 12;       // each level doubles the node count
  double t_max = 4.5;       // truncation of the transformed axis
};

// Integral of f over the finite interval [a, b].  f is evaluated strictly
// inside (a, b); the node offsets from both endpoints are formed from
// exponentials directly so that integrable endpoint blow-ups are sampled at
// full relative accuracy.
inline double tanh_sinh(const std::function<double(double)>& f, double a, double b,
                        QuadratureOptions opts = {}) {
  if (a == b) return 0.0;
  if (b < a) return -tanh_sinh(f, b, a, opts);
  const double half = 0.5 * (b - a);
  const double pi_half = 1.5707963267948966;

  auto node_sum = [&](double t) -> double {
    const double s = pi_half * std::sinh(t);
    // 1 + tanh(s) and 1 - tanh(s) without cancellation; their product is
    // sech^2(s), the full jacobian of the change of variables.
    const double from_a = 2.0 / (1.0 + std::exp(-2.0 * s));
    const double from_b = 2.0 / (1.0 + std::exp(2.0 * s));
    const double w = pi_half * std::cosh(t) * from_a * from_b;
    if (w == 0.0) return 0.0;
    const double x = (from_a < from_b) ? (a + half * from_a) : (b - half * from_b);
    const double fx = f(x);
    if (fx == 0.0) return 0.0;
    return w * fx;
  };

  double h = 1.0;
  double sum = node_sum(0.0);
  {
    for (double t = h; t <= opts.t_max; t += h) sum += node_sum(t) + node_sum(-t);
  }
  double integral = half * h * sum;

  for (int level = 1; level <= opts.max_level; ++level) {
    h *= 0.5;
    double added = 0.0;
    for (double t = h; t <= opts.t_max; t += 2.0 * h) added += node_sum(t) + node_sum(-t);
    const double refined = 0.5 * integral + half * h * added;
    const double change = std::abs(refined - integral);
    integral = refined;
    if (level >= 3 &&
        change <= opts.rel_tol * std::max(std::abs(integral), 1e-300))
      break;
  }
  return integral;
}

// Integral of f over [0, infinity).  f must decay fast enough to be
// integrable; evaluations that return exactly 0 short-circuit so that the
// huge outer nodes of the substitution cannot overflow the product.
inline double exp_sinh(const std::function<double(double)>& f, QuadratureOptions opts = {}) {
  const double pi_half = 1.5707963267948966;
  opts.t_max = std::min(opts.t_max, 6.5);

  auto node_sum = [&](double t) -> double {
    const double s = pi_half * std::sinh(t);
    if (s > 700.0) return 0.0;
    const double x = std::exp(s);
    const double fx = f(x);
    if (fx == 0.0) return 0.0;
    return pi_half * std::cosh(t) * x * fx;
  };

  double h = 1.0;
  double sum = node_sum(0.0);
  for (double t = h; t <= opts.t_max; t += h) sum += node_sum(t) + node_sum(-t);
  double integral = h * sum;

  for (int level = 1; level <= opts.max_level; ++level) {
    h *= 0.5;
    double added = 0.0;
    for (double t = h; t <= opts.t_max; t += 2.0 * h) added += node_sum(t) + node_sum(-t);
    const double refined = 0.5 * integral + h * added;
    const double change = std::abs(refined - integral);
    integral = refined;
    if (level >= 3 &&
        change <= opts.rel_tol * std::max(std::abs(integral), 1e-300))
      break;
  }
  return integral;
}

}  // namespace folspec
