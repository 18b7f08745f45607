#pragma once

// Simulated trials: scenario generators, the replicate driver and the
// operating-characteristics summary.

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "podbin/engine.hpp"
#include "podbin/random.hpp"

namespace podbin {

enum class TimeModel { ConditionalUniform, Weibull };

std::string to_string(TimeModel m);
TimeModel time_model_from_string(const std::string& s);

struct WeibullParams {
  double shape = 1.0;
  double scale = 1.0;

  double cdf(double t) const;
};

// Weibull law with F(W) = 0.999 and F(W/2) / F(W) = q.
WeibullParams weibull_from_fraction(double q, double window);

// Draw from the Weibull law conditioned on T <= window.
double sample_truncated_weibull(const WeibullParams& w, double window, Rng& rng);

struct Scenario {
  std::string id;
  std::vector<double> p_mt;
  std::vector<double> p_dlt;
  TimeModel time_model = TimeModel::ConditionalUniform;
  // Fraction of onsets in the first half of the window (Weibull only).
  double weibull_q_mt = 0.5;
  double weibull_q_dlt = 0.5;
  double accrual_rate = 0.14;

  int num_doses() const { return static_cast<int>(p_dlt.size()); }
  std::vector<double> toxicity_burden(double severity_weight) const;
  void validate() const;
};

// The six scenarios of the paper's main simulation study.
std::vector<Scenario> paper_scenarios();

// Weibull time-to-toxicity setting 1..4 applied to a scenario.
Scenario with_weibull_setting(Scenario s, int setting);

struct ToxicityDraw {
  std::optional<double> mt_onset;   // days after enrollment, in (0, W]
  std::optional<double> dlt_onset;

  OrdinalCategory category() const { return make_category(mt_onset.has_value(), dlt_onset.has_value()); }
};

// MT and DLT occur independently. All four variates are always consumed, so a
// patient's stream does not depend on the dose it is given.
ToxicityDraw gen_toxicity(const Scenario& scenario, int dose, double window, Rng& rng);

// Exponential inter-arrival gaps.
std::vector<double> gen_arrivals(double rate, int count, Rng& rng);

struct PatientOutcome {
  PatientId id = 0;
  int dose = 0;
  double enroll_time = 0.0;
  OrdinalCategory category = OrdinalCategory::NoToxicity;
};

struct TrialResult {
  std::string scenario;
  DesignMode mode = DesignMode::PodBin;
  std::uint64_t seed = 0;
  std::optional<int> mtd;
  bool terminated = false;
  double duration = 0.0;
  int turned_away = 0;
  std::vector<PatientOutcome> patients;
  std::vector<DecisionRecord> decisions;
  std::optional<std::string> failure;
};

TrialResult run_replicate(const Scenario& scenario, const DesignConfig& config, DesignMode mode,
                          std::uint64_t seed);

std::uint64_t replicate_seed(std::uint64_t master, int scenario_index, int replicate);

// Replicates 0..reps-1 of one scenario. Results do not depend on `parallel`.
std::vector<TrialResult> run_replicates(const Scenario& scenario, int scenario_index,
                                        const DesignConfig& config, DesignMode mode, int reps,
                                        std::uint64_t master_seed, int parallel);

struct OperatingCharacteristics {
  std::string scenario;
  DesignMode mode = DesignMode::PodBin;
  int replicates = 0;
  int failures = 0;
  std::vector<int> true_mtd;
  double pcs = 0, pca = 0, pos = 0, poa = 0, pomt = 0, podlt = 0;  // percentages
  std::vector<double> selection;  // per dose, percent of replicates
  double none_selected = 0;       // percent
  std::vector<double> allocation; // per dose, percent of patients
  std::array<double, 6> inconsistency{};  // DS DE SE SD ED ES per 100 decisions
  int rolling_decisions = 0;              // denominator of the rates
  double duration_mean = 0, duration_sd = 0;
};

OperatingCharacteristics operating_characteristics(std::span<const TrialResult> results,
                                                   const Scenario& scenario,
                                                   const DesignConfig& config);

}  // namespace podbin
