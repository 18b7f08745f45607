#include "podbin/sampler.hpp"

#include <cmath>
#include <limits>
#include <string>

namespace podbin {

namespace {

constexpr double kCollapseTolerance = 1e-10;
constexpr int kMaxCollapsedSweeps = 50;
constexpr double kInf = std::numeric_limits<double>::infinity();

}  // namespace

ChainDegenerate::ChainDegenerate(int sweep)
    : std::runtime_error("cutoff interval collapsed; chain degenerate at sweep " +
                         std::to_string(sweep)),
      sweep_(sweep) {}

OrdinalProbitChain::OrdinalProbitChain(std::span<const PatientRecord> patients,
                                       const DesignConfig& config)
    : config_(config) {
  if (patients.empty()) throw DomainError("run_chain: at least one patient is required");
  subjects_.reserve(patients.size());
  for (const auto& patient : patients) {
    if (patient.dose < 1 || patient.dose > config.num_doses) {
      throw DomainError("run_chain: patient dose outside 1..num_doses");
    }
    const int k = to_int(patient.observed_category());
    const auto w = weight_matrix(patient.follow_up, config.window);
    Subject s{patient.dose, k, !patient.pending, {}};
    for (int c = 0; c < 4; ++c) s.weight[c] = w(k - 1, c);
    subjects_.push_back(s);
    sum_dose_ += patient.dose;
    sum_dose_sq_ += static_cast<double>(patient.dose) * patient.dose;
  }

  const auto& mcmc = config.mcmc;
  params_.beta = std::min(config.ttb() > 0 ? config.ttb() : 0.5, 0.5 * mcmc.beta_max);
  params_.g2 = std::min(0.5, mcmc.cutoff_max / 3.0);
  params_.g3 = std::min(1.0, 2.0 * mcmc.cutoff_max / 3.0);

  // Minimal reachable final category is the observed one.
  imputed_.resize(subjects_.size());
  for (std::size_t i = 0; i < subjects_.size(); ++i) imputed_[i] = subjects_[i].observed;
  latent_.assign(subjects_.size(), 0.0);
  probs_.resize(config.num_doses + 1);
  proposal_probs_.resize(config.num_doses + 1);
  counts_.resize(config.num_doses + 1);
}

double OrdinalProbitChain::cutoff(int index) const {
  switch (index) {
    case 0: return -kInf;
    case 1: return 0.0;
    case 2: return params_.g2;
    case 3: return params_.g3;
    default: return kInf;
  }
}

void OrdinalProbitChain::refresh_probs(const ModelParams& params,
                                       std::vector<ProbVector4<double>>& out) const {
  for (int d = 1; d <= config_.num_doses; ++d) out[d] = category_probs(params, d);
}

void OrdinalProbitChain::impute(Rng& rng) {
  for (auto& row : counts_) row.fill(0);
  for (std::size_t i = 0; i < subjects_.size(); ++i) {
    const auto& s = subjects_[i];
    int category = s.observed;
    if (!s.complete) {
      const auto& p = probs_[s.dose];
      std::array<double, 4> mass{};
      double total = 0.0;
      for (int c = 0; c < 4; ++c) {
        mass[c] = s.weight[c] * p(c);
        total += mass[c];
      }
      if (total > 0.0) {
        double u = rng.uniform() * total;
        category = 4;
        for (int c = 0; c < 4; ++c) {
          if (mass[c] <= 0.0) continue;
          if (u < mass[c]) {
            category = c + 1;
            break;
          }
          u -= mass[c];
        }
        // Guard against round-off selecting an unreachable category.
        while (mass[category - 1] <= 0.0) --category;
      }
    }
    imputed_[i] = category;
    ++counts_[s.dose][category - 1];
  }
}

void OrdinalProbitChain::draw_latent(Rng& rng) {
  for (std::size_t i = 0; i < subjects_.size(); ++i) {
    const int c = imputed_[i];
    const double mean = params_.alpha + subjects_[i].dose * params_.beta;
    latent_[i] = truncated_normal(rng, mean, cutoff(c - 1), cutoff(c));
  }
}

// Exact draw of (alpha, beta) given Z: beta from its marginal with alpha
// integrated out, then alpha given beta.
void OrdinalProbitChain::draw_regression(Rng& rng) {
  double sum_z = 0.0, cross = 0.0;
  for (std::size_t i = 0; i < subjects_.size(); ++i) {
    sum_z += latent_[i];
    cross += subjects_[i].dose * latent_[i];
  }
  const double prior_sd = config_.mcmc.intercept_prior_sd;
  const bool intercept = prior_sd > 0.0;
  const double a = intercept ? subjects_.size() + 1.0 / (prior_sd * prior_sd) : 0.0;
  const double precision = intercept ? sum_dose_sq_ - sum_dose_ * sum_dose_ / a : sum_dose_sq_;
  const double mean = (intercept ? cross - sum_dose_ * sum_z / a : cross) / precision;
  const double sd = 1.0 / std::sqrt(precision);
  const double upper = config_.mcmc.beta_max;
  const double z = truncated_normal(rng, 0.0, (0.0 - mean) / sd,
                                    std::isinf(upper) ? kInf : (upper - mean) / sd);
  params_.beta = std::max(mean + sd * z, std::numeric_limits<double>::min());
  params_.alpha =
      intercept ? (sum_z - params_.beta * sum_dose_) / a + rng.normal() / std::sqrt(a) : 0.0;
}

void OrdinalProbitChain::metropolis_cutoffs(Rng& rng) {
  const double scale = config_.mcmc.cutoff_proposal_scale;
  ModelParams proposal = params_;
  proposal.g2 = params_.g2 + scale * rng.normal();
  proposal.g3 = params_.g3 + scale * rng.normal();
  ++proposals_;
  if (!(proposal.g2 > 0.0 && proposal.g2 < proposal.g3 && proposal.g3 < config_.mcmc.cutoff_max)) {
    return;
  }
  refresh_probs(proposal, proposal_probs_);
  double log_ratio = 0.0;
  for (int d = 1; d <= config_.num_doses; ++d) {
    for (int c = 0; c < 4; ++c) {
      const int n = counts_[d][c];
      if (n == 0) continue;
      const double now = probs_[d](c);
      const double next = proposal_probs_[d](c);
      if (!(next > 0.0)) return;
      log_ratio += n * (std::log(next) - std::log(now));
    }
  }
  if (log_ratio >= 0.0 || std::log(rng.uniform_open()) < log_ratio) {
    params_ = proposal;
    std::swap(probs_, proposal_probs_);
    ++accepted_;
  }
}

void OrdinalProbitChain::uniform_cutoffs(Rng& rng) {
  double max2 = 0.0, min3 = kInf, max3 = -kInf, min4 = kInf;
  for (std::size_t i = 0; i < subjects_.size(); ++i) {
    const double z = latent_[i];
    switch (imputed_[i]) {
      case 2: max2 = std::max(max2, z); break;
      case 3:
        min3 = std::min(min3, z);
        max3 = std::max(max3, z);
        break;
      case 4: min4 = std::min(min4, z); break;
      default: break;
    }
  }
  bool collapsed = false;

  const double lo2 = max2;
  const double hi2 = std::min(min3, params_.g3);
  if (hi2 - lo2 > kCollapseTolerance) {
    params_.g2 = rng.uniform(lo2, hi2);
    if (params_.g2 <= 0.0) params_.g2 = 0.5 * (lo2 + hi2);
  } else {
    collapsed = true;
  }

  const double lo3 = std::max(params_.g2, max3);
  const double hi3 = std::min(min4, config_.mcmc.cutoff_max);
  if (hi3 - lo3 > kCollapseTolerance) {
    params_.g3 = rng.uniform(lo3, hi3);
    if (params_.g3 <= params_.g2) params_.g3 = 0.5 * (lo3 + hi3);
  } else {
    collapsed = true;
  }

  collapsed_run_ = collapsed ? collapsed_run_ + 1 : 0;
  if (collapsed_run_ > kMaxCollapsedSweeps) throw ChainDegenerate(sweeps_);
}

void OrdinalProbitChain::sweep(Rng& rng) {
  refresh_probs(params_, probs_);
  impute(rng);
  if (config_.mcmc.cutoff_update == CutoffUpdate::Metropolis) {
    metropolis_cutoffs(rng);
    if (params_.g3 - params_.g2 <= kCollapseTolerance) {
      if (++collapsed_run_ > kMaxCollapsedSweeps) throw ChainDegenerate(sweeps_);
    } else {
      collapsed_run_ = 0;
    }
    draw_latent(rng);
    draw_regression(rng);
  } else {
    draw_latent(rng);
    draw_regression(rng);
    uniform_cutoffs(rng);
  }
  ++sweeps_;
}

void OrdinalProbitChain::reset_complete_data(std::span<const OrdinalCategory> categories,
                                             std::span<const double> latent) {
  if (categories.size() != subjects_.size() || latent.size() != subjects_.size()) {
    throw DomainError("reset_complete_data: size mismatch");
  }
  for (std::size_t i = 0; i < subjects_.size(); ++i) {
    auto& s = subjects_[i];
    s.observed = to_int(categories[i]);
    s.complete = true;
    s.weight.fill(0.0);
    s.weight[s.observed - 1] = 1.0;
    imputed_[i] = s.observed;
    latent_[i] = latent[i];
  }
}

PosteriorDraws run_chain(std::span<const PatientRecord> patients, const DesignConfig& config,
                         std::uint64_t seed) {
  const auto& mcmc = config.mcmc;
  OrdinalProbitChain chain(patients, config);
  Rng rng(seed);
  for (int i = 0; i < mcmc.burn_in; ++i) chain.sweep(rng);

  PosteriorDraws out;
  out.draws.reserve(mcmc.retained);
  for (int b = 0; b < mcmc.retained; ++b) {
    for (int t = 0; t < mcmc.thin; ++t) chain.sweep(rng);
    out.draws.push_back(chain.params());
  }
  out.meta.burn_in = mcmc.burn_in;
  out.meta.thin = mcmc.thin;
  out.meta.cutoff_acceptance = chain.cutoff_acceptance();
  out.meta.seed = seed;
  out.meta.cutoff_update = mcmc.cutoff_update;
  return out;
}

ProbVector4<double> posterior_mean_probs(const PosteriorDraws& draws, int dose) {
  if (draws.draws.empty()) throw DomainError("posterior_mean_probs: no draws");
  ProbVector4<double> sum = ProbVector4<double>::Zero();
  for (const auto& params : draws.draws) sum += category_probs(params, dose);
  return sum / static_cast<double>(draws.draws.size());
}

double posterior_dlt_exceedance(const PosteriorDraws& draws, int dose, double target_dlt) {
  if (draws.draws.empty()) throw DomainError("posterior_dlt_exceedance: no draws");
  std::size_t hits = 0;
  for (const auto& params : draws.draws) {
    if (prob_dlt(category_probs(params, dose)) > target_dlt) ++hits;
  }
  return static_cast<double>(hits) / draws.draws.size();
}

}  // namespace podbin
