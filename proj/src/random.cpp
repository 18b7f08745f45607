#include "podbin/random.hpp"

#include <algorithm>

#include "podbin/types.hpp"

namespace podbin {

namespace {

// Standard normal restricted to [a, +inf), a > 0: exponential proposal.
double lower_tail(Rng& rng, double a, double b) {
  const double rate = 0.5 * (a + std::sqrt(a * a + 4.0));
  // Uniform proposal is cheaper when the interval is short.
  const double uniform_cutoff =
      (2.0 / rate) * std::exp(0.25 * (a * a - a * std::sqrt(a * a + 4.0)) + 0.5);
  if (b - a < uniform_cutoff) {
    for (;;) {
      const double z = rng.uniform(a, b);
      if (rng.uniform() <= std::exp(0.5 * (a * a - z * z))) return z;
    }
  }
  for (;;) {
    const double z = a + rng.exponential(rate);
    if (z >= b) continue;
    const double d = z - rate;
    if (rng.uniform() <= std::exp(-0.5 * d * d)) return z;
  }
}

// Standard normal on [a, b) with a <= 0 <= b.
double central(Rng& rng, double a, double b) {
  constexpr double kSqrt2Pi = 2.5066282746310002;
  if (b - a >= kSqrt2Pi) {
    for (;;) {
      const double z = rng.normal();
      if (z >= a && z < b) return z;
    }
  }
  for (;;) {
    const double z = rng.uniform(a, b);
    if (rng.uniform() <= std::exp(-0.5 * z * z)) return z;
  }
}

}  // namespace

double truncated_normal(Rng& rng, double mean, double lower, double upper) {
  if (!(lower < upper)) throw DomainError("truncated_normal: empty interval");
  const double a = lower - mean;
  const double b = upper - mean;
  if (a > 0.0) return mean + lower_tail(rng, a, b);
  if (b < 0.0) return mean - lower_tail(rng, -b, -a);
  return mean + central(rng, a, b);
}

}  // namespace podbin
