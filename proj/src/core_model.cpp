#include "podbin/core_model.hpp"

#include <limits>

namespace podbin {

void DesignConfig::validate() const {
  auto fail = [](const std::string& key, const std::string& why) {
    throw DomainError("invalid config '" + key + "': " + why);
  };
  if (num_doses < 1) fail("design.num_doses", "must be >= 1");
  if (!(window > 0)) fail("design.window", "must be > 0");
  if (!(target_dlt >= 0 && target_dlt <= 1)) fail("design.target_dlt", "must be a probability");
  if (!(target_mt >= 0 && target_mt <= 1)) fail("design.target_mt", "must be a probability");
  if (!(severity_weight > 0 && severity_weight <= 1)) {
    fail("design.severity_weight", "must lie in (0, 1]");
  }
  if (!(ei_lower > 0)) fail("design.ei_lower", "must be > 0");
  if (!(ei_upper > 0)) fail("design.ei_upper", "must be > 0");
  if (!(ttb() - ei_lower > 0)) fail("design.ei_lower", "TTB - ei_lower must be > 0");
  if (!(ttb() + ei_upper < severity_weight + 1)) {
    fail("design.ei_upper", "TTB + ei_upper must be < severity_weight + 1");
  }
  if (!(lambda_e >= 0.33 && lambda_e <= 1)) fail("design.lambda_e", "must lie in [0.33, 1]");
  if (!(lambda_d >= 0 && lambda_d <= 0.5)) fail("design.lambda_d", "must lie in [0, 0.5]");
  if (cohort_size < 1) fail("design.cohort_size", "must be >= 1");
  if (max_n < 1) fail("design.max_n", "must be >= 1");
  if (stage2_threshold < cohort_size) fail("design.stage2_threshold", "must be >= cohort_size");
  if (max_n < stage2_threshold) fail("design.max_n", "must be >= stage2_threshold");
  if (!(safety_threshold > 0 && safety_threshold < 1)) {
    fail("design.safety_threshold", "must lie in (0, 1)");
  }
  if (mcmc.burn_in < 0) fail("mcmc.burn_in", "must be >= 0");
  if (mcmc.retained < 1) fail("mcmc.retained", "must be >= 1");
  if (mcmc.thin < 1) fail("mcmc.thin", "must be >= 1");
  if (!(mcmc.cutoff_proposal_scale > 0)) fail("mcmc.cutoff_proposal_scale", "must be > 0");
  if (!(mcmc.cutoff_max > 0)) fail("mcmc.cutoff_max", "must be > 0");
  if (!(mcmc.beta_max > 0)) fail("mcmc.beta_max", "must be > 0");
  if (!(mcmc.intercept_prior_sd >= 0)) fail("mcmc.intercept_prior_sd", "must be >= 0");
}

double log_likelihood(const ModelParams& params, std::span<const PatientRecord> patients,
                      double window) {
  double total = 0.0;
  for (const auto& patient : patients) {
    const auto probs = observed_category_probs(params, patient.dose, patient.follow_up, window);
    const double p = probs(to_index(patient.observed_category()));
    if (!(p > 0.0)) return -std::numeric_limits<double>::infinity();
    total += std::log(p);
  }
  return total;
}

double empirical_tb(const CategoryCounts& counts, double severity_weight) {
  if (counts.n <= 0) throw DomainError("empirical_tb: empty category set");
  const double n = counts.n;
  return severity_weight * (counts.n_mt / n) + counts.n_dlt / n;
}

double empirical_tb(std::span<const OrdinalCategory> categories, double severity_weight) {
  return empirical_tb(CategoryCounts::from(categories), severity_weight);
}

double empirical_tb_minus1(const CategoryCounts& counts, double severity_weight) {
  if (counts.n <= 0) throw DomainError("empirical_tb_minus1: empty category set");
  CategoryCounts reduced = counts;
  const auto least = static_cast<OrdinalCategory>(counts.least_severe);
  if (has_mt(least)) --reduced.n_mt;
  if (has_dlt(least)) --reduced.n_dlt;
  return empirical_tb(reduced, severity_weight);
}

double empirical_tb_minus1(std::span<const OrdinalCategory> categories, double severity_weight) {
  return empirical_tb_minus1(CategoryCounts::from(categories), severity_weight);
}

}  // namespace podbin
