#pragma once

#include <cstdint>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>

namespace podbin {

class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

class PreconditionError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

// Ordinal outcome of one patient. Higher is more severe.
enum class OrdinalCategory : std::uint8_t {
  NoToxicity = 1,
  ModerateOnly = 2,
  DltOnly = 3,
  Both = 4,
};

constexpr int to_int(OrdinalCategory c) { return static_cast<int>(c); }
constexpr int to_index(OrdinalCategory c) { return static_cast<int>(c) - 1; }

inline OrdinalCategory category_from_int(int value) {
  if (value < 1 || value > 4) {
    throw DomainError("ordinal category must be in 1..4, got " + std::to_string(value));
  }
  return static_cast<OrdinalCategory>(value);
}

constexpr bool has_mt(OrdinalCategory c) {
  return c == OrdinalCategory::ModerateOnly || c == OrdinalCategory::Both;
}
constexpr bool has_dlt(OrdinalCategory c) {
  return c == OrdinalCategory::DltOnly || c == OrdinalCategory::Both;
}
constexpr OrdinalCategory make_category(bool mt, bool dlt) {
  if (mt && dlt) return OrdinalCategory::Both;
  if (dlt) return OrdinalCategory::DltOnly;
  if (mt) return OrdinalCategory::ModerateOnly;
  return OrdinalCategory::NoToxicity;
}

enum class CutoffUpdate { Metropolis, Uniform };

struct McmcSettings {
  int burn_in = 1000;
  int retained = 2000;
  int thin = 1;
  double cutoff_proposal_scale = 0.1;
  CutoffUpdate cutoff_update = CutoffUpdate::Metropolis;
  // Upper edge of the flat cutoff prior; keeps g3 proper when category 4 is unseen.
  double cutoff_max = 10.0;
  // Upper edge of the flat slope prior (infinite by default).
  double beta_max = std::numeric_limits<double>::infinity();
  // Sd of the N(0, sd^2) prior on the probit intercept. 0 drops the
  // intercept, leaving the dose slope as the only location parameter.
  double intercept_prior_sd = 10.0;

  bool operator==(const McmcSettings&) const = default;
};

struct DesignConfig {
  int num_doses = 5;
  double window = 28.0;
  double target_dlt = 0.25;
  double target_mt = 0.0;
  double severity_weight = 0.15;
  double ei_lower = 0.10;
  double ei_upper = 0.10;
  double lambda_e = 1.0;
  double lambda_d = 0.0;
  int stage2_threshold = 12;
  int cohort_size = 3;
  int max_n = 30;
  double safety_threshold = 0.95;
  McmcSettings mcmc;
  std::uint64_t rng_seed = 20240101;

  double ttb() const { return target_dlt + severity_weight * target_mt; }
  double ei_low() const { return ttb() - ei_lower; }
  double ei_high() const { return ttb() + ei_upper; }

  // Throws DomainError naming the offending field.
  void validate() const;

  bool operator==(const DesignConfig&) const = default;
};

using PatientId = int;

// One enrolled subject. Onset times are days after enrollment and are the
// source of truth; the observed category is always derived from them.
struct PatientRecord {
  PatientId id = 0;
  int dose = 1;
  double enroll_time = 0.0;
  double follow_up = 0.0;
  std::optional<double> mt_onset;
  std::optional<double> dlt_onset;
  bool pending = true;

  OrdinalCategory observed_category() const {
    const bool mt = mt_onset && *mt_onset <= follow_up;
    const bool dlt = dlt_onset && *dlt_onset <= follow_up;
    return make_category(mt, dlt);
  }

  bool operator==(const PatientRecord&) const = default;
};

// Probit parameters. The latent mean at dose d is alpha + d*beta. g1 is
// fixed at 0; g0 = -inf and g4 = +inf are implicit.
struct ModelParams {
  double beta = 0.0;
  double g2 = 0.0;
  double g3 = 0.0;
  double alpha = 0.0;

  bool valid() const { return beta > 0.0 && 0.0 < g2 && g2 < g3; }
  bool operator==(const ModelParams&) const = default;
};

}  // namespace podbin
