#pragma once

// Data-augmentation sampler for the ordinal probit time-to-toxicity model.

#include <array>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <vector>

#include "podbin/core_model.hpp"
#include "podbin/random.hpp"
#include "podbin/types.hpp"

namespace podbin {

class ChainDegenerate : public std::runtime_error {
 public:
  explicit ChainDegenerate(int sweep);
  int sweep() const { return sweep_; }

 private:
  int sweep_;
};

struct PosteriorDraws {
  struct Meta {
    int burn_in = 0;
    int thin = 1;
    double cutoff_acceptance = 0.0;
    std::uint64_t seed = 0;
    CutoffUpdate cutoff_update = CutoffUpdate::Metropolis;
  };

  std::vector<ModelParams> draws;
  Meta meta;

  std::size_t size() const { return draws.size(); }
};

// Sampler state for one chain. A sweep imputes final categories for pending
// patients, refreshes the cutoffs, the latent Gaussians and (intercept, slope).
//
// Cutoff update modes:
//   Metropolis - random-walk proposal on (g2, g3) accepted against the
//                likelihood of the imputed categories with Z integrated out,
//                followed by fresh latent draws.
//   Uniform    - exact conditional draw given Z (the classical scheme).
class OrdinalProbitChain {
 public:
  OrdinalProbitChain(std::span<const PatientRecord> patients, const DesignConfig& config);

  void sweep(Rng& rng);

  const ModelParams& params() const { return params_; }
  void set_params(const ModelParams& params) { params_ = params; }

  // Imputed final categories (1..4) and latent Gaussians, one per patient.
  const std::vector<int>& imputed() const { return imputed_; }
  const std::vector<double>& latent() const { return latent_; }

  // Replaces all observations by completed ones with the given latent values.
  // Used for joint (data, parameter) simulation checks.
  void reset_complete_data(std::span<const OrdinalCategory> categories,
                           std::span<const double> latent);

  int sweeps_done() const { return sweeps_; }
  double cutoff_acceptance() const {
    return proposals_ > 0 ? static_cast<double>(accepted_) / proposals_ : 0.0;
  }

 private:
  struct Subject {
    int dose;
    int observed;     // 1..4
    bool complete;
    std::array<double, 4> weight;  // row `observed` of the weight matrix
  };

  void refresh_probs(const ModelParams& params, std::vector<ProbVector4<double>>& out) const;
  void impute(Rng& rng);
  void draw_latent(Rng& rng);
  void draw_regression(Rng& rng);
  void metropolis_cutoffs(Rng& rng);
  void uniform_cutoffs(Rng& rng);
  double cutoff(int index) const;

  std::vector<Subject> subjects_;
  DesignConfig config_;
  ModelParams params_;
  std::vector<int> imputed_;
  std::vector<double> latent_;
  std::vector<ProbVector4<double>> probs_;
  std::vector<ProbVector4<double>> proposal_probs_;
  std::vector<std::array<int, 4>> counts_;
  double sum_dose_ = 0.0;
  double sum_dose_sq_ = 0.0;
  int sweeps_ = 0;
  int collapsed_run_ = 0;
  long proposals_ = 0;
  long accepted_ = 0;
};

// Runs burn-in plus retained*thin sweeps and keeps every thin-th draw.
// Deterministic in (patients, config, seed).
PosteriorDraws run_chain(std::span<const PatientRecord> patients, const DesignConfig& config,
                         std::uint64_t seed);

ProbVector4<double> posterior_mean_probs(const PosteriorDraws& draws, int dose);

double posterior_dlt_exceedance(const PosteriorDraws& draws, int dose, double target_dlt);

}  // namespace podbin
