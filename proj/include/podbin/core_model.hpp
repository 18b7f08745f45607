#pragma once

// Closed-form probability model: time weights, probit category
// probabilities, observed-data likelihood and toxicity burden.

#include <algorithm>
#include <cmath>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "podbin/types.hpp"

namespace podbin {

template <typename Scalar = double>
using ProbVector4 = Eigen::Matrix<Scalar, 4, 1>;

// w(k, c) = Pr(observed category k | final category c), zero-based indices.
template <typename Scalar = double>
using WeightMatrix = Eigen::Matrix<Scalar, 4, 4>;

template <typename Scalar>
Scalar std_normal_cdf(Scalar x) {
  using std::erfc;
  using std::sqrt;
  return Scalar(0.5) * erfc(-x / sqrt(Scalar(2)));
}

// Phi(upper) - Phi(lower), evaluated on the side of zero that avoids cancellation.
template <typename Scalar>
Scalar std_normal_interval(Scalar lower, Scalar upper) {
  if (lower > Scalar(0)) {
    return std_normal_cdf<Scalar>(-lower) - std_normal_cdf<Scalar>(-upper);
  }
  return std_normal_cdf<Scalar>(upper) - std_normal_cdf<Scalar>(lower);
}

// Linear-in-time weights for a patient followed for `v` of a `window`-day
// assessment. Columns are conditional distributions and sum to one.
template <typename Scalar>
WeightMatrix<Scalar> weight_matrix(Scalar v, Scalar window) {
  if (!(window > Scalar(0))) throw DomainError("weight_matrix: window must be positive");
  if (!(v >= Scalar(0) && v <= window)) {
    throw DomainError("weight_matrix: follow-up must lie in [0, window]");
  }
  const Scalar u = v / window;
  const Scalar r = Scalar(1) - u;
  WeightMatrix<Scalar> w;
  // clang-format off
  w << 1, r, r, r * r,
       0, u, 0, u * r,
       0, 0, u, u * r,
       0, 0, 0, u * u;
  // clang-format on
  return w;
}

// Final-category probabilities p_{d,c} = Phi(g_c - m) - Phi(g_{c-1} - m) with
// m = alpha + d*beta and g = (-inf, 0, g2, g3, +inf).
template <typename Scalar>
ProbVector4<Scalar> category_probs(Scalar beta, Scalar g2, Scalar g3, int dose,
                                   Scalar alpha = Scalar(0)) {
  const Scalar mean = alpha + Scalar(dose) * beta;
  ProbVector4<Scalar> p;
  p(0) = std_normal_cdf<Scalar>(-mean);
  p(1) = std_normal_interval<Scalar>(-mean, g2 - mean);
  p(2) = std_normal_interval<Scalar>(g2 - mean, g3 - mean);
  p(3) = std_normal_cdf<Scalar>(mean - g3);
  return p;
}

inline ProbVector4<double> category_probs(const ModelParams& params, int dose) {
  return category_probs<double>(params.beta, params.g2, params.g3, dose, params.alpha);
}

// Distribution of the category observable after `v` days of follow-up.
template <typename Scalar>
ProbVector4<Scalar> observed_category_probs(Scalar beta, Scalar g2, Scalar g3, int dose,
                                            Scalar v, Scalar window, Scalar alpha = Scalar(0)) {
  return weight_matrix<Scalar>(v, window) * category_probs<Scalar>(beta, g2, g3, dose, alpha);
}

inline ProbVector4<double> observed_category_probs(const ModelParams& params, int dose,
                                                   double v, double window) {
  return observed_category_probs<double>(params.beta, params.g2, params.g3, dose, v, window,
                                         params.alpha);
}

// Sum over patients of log Pr(observed category | dose, follow-up). Returns
// -inf when some observed category has zero probability.
double log_likelihood(const ModelParams& params, std::span<const PatientRecord> patients,
                      double window);

template <typename Derived>
auto toxicity_burden(const Eigen::MatrixBase<Derived>& p, double severity_weight) {
  return severity_weight * (p(1) + p(3)) + (p(2) + p(3));
}

inline double prob_mt(const ProbVector4<double>& p) { return p(1) + p(3); }
inline double prob_dlt(const ProbVector4<double>& p) { return p(2) + p(3); }

// Sufficient statistics of a category multiset for the interval rules.
struct CategoryCounts {
  int n = 0;
  int n_mt = 0;
  int n_dlt = 0;
  int least_severe = 5;  // 5 when empty

  void add(OrdinalCategory c) {
    ++n;
    n_mt += has_mt(c) ? 1 : 0;
    n_dlt += has_dlt(c) ? 1 : 0;
    least_severe = std::min(least_severe, to_int(c));
  }

  static CategoryCounts from(std::span<const OrdinalCategory> categories) {
    CategoryCounts counts;
    for (auto c : categories) counts.add(c);
    return counts;
  }
};

double empirical_tb(const CategoryCounts& counts, double severity_weight);
double empirical_tb(std::span<const OrdinalCategory> categories, double severity_weight);

// Burden after resetting the least severe patient to "no toxicity".
double empirical_tb_minus1(const CategoryCounts& counts, double severity_weight);
double empirical_tb_minus1(std::span<const OrdinalCategory> categories, double severity_weight);

}  // namespace podbin
