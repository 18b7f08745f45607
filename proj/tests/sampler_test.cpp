#include <doctest.h>

#include <chrono>
#include <cmath>
#include <numeric>
#include <vector>

#include "podbin/sampler.hpp"
#include "podbin/test_support.hpp"

using namespace podbin;
using OC = OrdinalCategory;

TEST_CASE("recovers generating parameters from complete data") {
  const ModelParams truth{0.5, 0.7, 1.2};
  const auto patients = testing::stratified_complete_patients(truth, 200, 5, 28.0);
  DesignConfig config;
  const auto t0 = std::chrono::steady_clock::now();
  const auto draws = run_chain(patients, config, 17);
  const double secs =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  MESSAGE("chain time " << secs << " s, cutoff acceptance " << draws.meta.cutoff_acceptance);

  REQUIRE(draws.size() == 2000);
  double beta = 0, g2 = 0, g3 = 0;
  for (const auto& d : draws.draws) {
    CHECK(d.valid());
    beta += d.beta;
    g2 += d.g2;
    g3 += d.g3;
  }
  const double n = draws.size();
  CHECK(std::abs(beta / n - truth.beta) < 0.15);
  CHECK(std::abs(g2 / n - truth.g2) < 0.15);
  CHECK(std::abs(g3 / n - truth.g3) < 0.15);

  const auto p3 = posterior_mean_probs(draws, 3);
  CHECK(std::abs(prob_dlt(p3) - prob_dlt(category_probs(truth, 3))) < 0.05);
}

TEST_CASE("posterior means are centred on the truth across random datasets") {
  const ModelParams truth{0.5, 0.7, 1.2};
  DesignConfig config;
  double beta = 0, g2 = 0, g3 = 0;
  const int datasets = 10;
  for (int s = 0; s < datasets; ++s) {
    const auto patients = testing::synthetic_complete_patients(truth, 200, 5, 28.0, 500 + s);
    const auto draws = run_chain(patients, config, 900 + s);
    for (const auto& d : draws.draws) {
      beta += d.beta;
      g2 += d.g2;
      g3 += d.g3;
    }
  }
  const double n = datasets * config.mcmc.retained;
  CHECK(std::abs(beta / n - truth.beta) < 0.1);
  CHECK(std::abs(g2 / n - truth.g2) < 0.1);
  CHECK(std::abs(g3 / n - truth.g3) < 0.1);
}

TEST_CASE("same seed gives bitwise identical draws") {
  const auto patients =
      testing::synthetic_complete_patients(ModelParams{0.4, 0.6, 1.3}, 30, 5, 28.0, 5);
  DesignConfig config;
  config.mcmc.burn_in = 200;
  config.mcmc.retained = 300;
  const auto a = run_chain(patients, config, 99);
  const auto b = run_chain(patients, config, 99);
  CHECK(a.draws == b.draws);
  const auto c = run_chain(patients, config, 100);
  CHECK_FALSE(a.draws == c.draws);
}

static std::vector<PatientRecord> clean_dose_one(int n) {
  std::vector<PatientRecord> patients(n);
  for (int i = 0; i < n; ++i) {
    patients[i].id = i + 1;
    patients[i].dose = 1;
    patients[i].follow_up = 28.0;
    patients[i].pending = false;
  }
  return patients;
}

TEST_CASE("clean patients at dose one keep most mass in category one") {
  const auto patients = clean_dose_one(3);
  const auto draws = run_chain(patients, DesignConfig{}, 3);
  CHECK(posterior_mean_probs(draws, 1)(0) > 0.5);
}

TEST_CASE("without intercept, clean dose one matches quadrature") {
  // All-clean data leave the cutoffs flat and give beta a density proportional
  // to Phi(-beta)^3 on (0, inf). E[Phi(-beta)] = int Phi^4 / int Phi^3 = 0.391281
  // (adaptive quadrature). p11 = Phi(-beta) can never exceed 0.5.
  const auto patients = clean_dose_one(3);
  DesignConfig config;
  config.mcmc.intercept_prior_sd = 0.0;
  config.mcmc.burn_in = 2000;
  config.mcmc.retained = 10000;
  const auto draws = run_chain(patients, config, 3);
  const double p11 = posterior_mean_probs(draws, 1)(0);
  CHECK(p11 == doctest::Approx(0.391281).epsilon(0.02));
  CHECK(p11 < 0.5);
}

TEST_CASE("imputation respects reachability") {
  // Observed DLT at mid follow-up: final category must be 3 or 4.
  std::vector<PatientRecord> patients(2);
  patients[0] = {1, 1, 0.0, 10.0, std::nullopt, 4.0, true};
  patients[1] = {2, 2, 0.0, 12.0, 3.0, 6.0, true};
  DesignConfig config;
  OrdinalProbitChain chain(patients, config);
  Rng rng(8);
  for (int s = 0; s < 2000; ++s) {
    chain.sweep(rng);
    CHECK(chain.imputed()[0] >= 3);
    CHECK(chain.imputed()[1] == 4);
    const auto& p = chain.params();
    CHECK(p.valid());
  }
}

TEST_CASE("complete data makes imputation deterministic") {
  const auto patients =
      testing::synthetic_complete_patients(ModelParams{0.4, 0.6, 1.3}, 25, 5, 28.0, 12);
  DesignConfig config;
  OrdinalProbitChain chain(patients, config);
  Rng rng(1);
  for (int s = 0; s < 200; ++s) {
    chain.sweep(rng);
    for (std::size_t i = 0; i < patients.size(); ++i) {
      CHECK(chain.imputed()[i] == to_int(patients[i].observed_category()));
    }
  }
}

TEST_CASE("latent values stay inside their category's cutoff interval") {
  auto patients = testing::synthetic_complete_patients(ModelParams{0.3, 0.8, 1.5}, 40, 5, 28.0, 77);
  patients[3].follow_up = 9.0;
  patients[3].pending = true;
  for (auto mode : {CutoffUpdate::Metropolis, CutoffUpdate::Uniform}) {
    DesignConfig config;
    config.mcmc.cutoff_update = mode;
    OrdinalProbitChain chain(patients, config);
    Rng rng(4);
    for (int s = 0; s < 500; ++s) {
      chain.sweep(rng);
      const auto& p = chain.params();
      const double cut[5] = {-INFINITY, 0.0, p.g2, p.g3, INFINITY};
      for (std::size_t i = 0; i < patients.size(); ++i) {
        const int c = chain.imputed()[i];
        if (mode == CutoffUpdate::Metropolis) {
          CHECK(chain.latent()[i] >= cut[c - 1]);
          CHECK(chain.latent()[i] < cut[c]);
        }
      }
      CHECK(p.valid());
    }
  }
}

TEST_CASE("uniform and Metropolis cutoff updates agree on posterior means") {
  auto patients = testing::synthetic_complete_patients(ModelParams{0.4, 0.6, 1.1}, 40, 5, 28.0, 31);
  // Leave a few patients pending so imputation is exercised.
  for (int i : {0, 7, 19}) {
    patients[i].follow_up = 14.0;
    patients[i].pending = true;
  }
  auto summarize = [&](CutoffUpdate mode, std::uint64_t seed) {
    DesignConfig config;
    config.mcmc.cutoff_update = mode;
    config.mcmc.burn_in = 5000;
    config.mcmc.retained = 40000;
    const auto draws = run_chain(patients, config, seed);
    return std::array{prob_dlt(posterior_mean_probs(draws, 2)),
                      prob_mt(posterior_mean_probs(draws, 4))};
  };
  const auto a = summarize(CutoffUpdate::Metropolis, 1);
  const auto b = summarize(CutoffUpdate::Uniform, 2);
  MESSAGE("metropolis " << a[0] << " " << a[1] << " uniform " << b[0] << " " << b[1]);
  CHECK(std::abs(a[0] - b[0]) < 0.02);
  CHECK(std::abs(a[1] - b[1]) < 0.02);
}

TEST_CASE("successive-conditional simulation matches the prior (joint distribution test)") {
  // Proper prior: beta ~ U(0, 2), (g2, g3) uniform on 0 < g2 < g3 < 3,
  // alpha ~ N(0, 1).
  DesignConfig config;
  config.mcmc.intercept_prior_sd = 1.0;
  config.mcmc.beta_max = 2.0;
  config.mcmc.cutoff_max = 3.0;
  config.mcmc.cutoff_proposal_scale = 0.3;
  const int n_patients = 8;
  std::vector<int> doses(n_patients);
  for (int i = 0; i < n_patients; ++i) doses[i] = 1 + i % 5;

  Rng rng(20240607);
  auto prior_draw = [&]() {
    ModelParams p;
    p.beta = rng.uniform(0.0, 2.0);
    double a = rng.uniform(0.0, 3.0), b = rng.uniform(0.0, 3.0);
    p.g2 = std::min(a, b);
    p.g3 = std::max(a, b);
    p.alpha = rng.normal();
    return p;
  };
  auto simulate_data = [&](const ModelParams& p, std::vector<OC>& cats, std::vector<double>& z) {
    for (int i = 0; i < n_patients; ++i) {
      z[i] = p.alpha + doses[i] * p.beta + rng.normal();
      int c = 1;
      if (z[i] >= 0.0) c = 2;
      if (z[i] >= p.g2) c = 3;
      if (z[i] >= p.g3) c = 4;
      cats[i] = static_cast<OC>(c);
    }
  };

  const int samples = 10000;
  std::vector<ModelParams> forward(samples);
  for (auto& f : forward) f = prior_draw();

  for (auto mode : {CutoffUpdate::Metropolis, CutoffUpdate::Uniform}) {
    config.mcmc.cutoff_update = mode;
    std::vector<PatientRecord> patients(n_patients);
    for (int i = 0; i < n_patients; ++i) {
      patients[i].dose = doses[i];
      patients[i].follow_up = 28.0;
      patients[i].pending = false;
    }
    OrdinalProbitChain chain(patients, config);
    ModelParams theta = prior_draw();
    chain.set_params(theta);
    std::vector<OC> cats(n_patients);
    std::vector<double> z(n_patients);
    std::vector<ModelParams> successive(samples);
    for (int s = 0; s < samples; ++s) {
      simulate_data(chain.params(), cats, z);
      chain.reset_complete_data(cats, z);
      chain.sweep(rng);
      successive[s] = chain.params();
    }
    for (double ModelParams::*field : {&ModelParams::beta, &ModelParams::alpha, &ModelParams::g2}) {
      for (int moment = 1; moment <= 2; ++moment) {
        auto stat = [&](const std::vector<ModelParams>& x) {
          std::vector<double> y(x.size());
          for (std::size_t i = 0; i < x.size(); ++i) y[i] = std::pow(x[i].*field, moment);
          return y;
        };
        const double z_score = testing::geweke_z(stat(forward), stat(successive));
        MESSAGE("mode " << static_cast<int>(mode) << " moment " << moment << " z = " << z_score);
        CHECK(std::abs(z_score) < 4.0);
      }
    }
  }
}

TEST_CASE("posterior summaries of explicit draws") {
  PosteriorDraws one;
  one.draws = {ModelParams{0.3, 0.5, 1.0}};
  CHECK(posterior_mean_probs(one, 2) == category_probs(one.draws[0], 2));

  PosteriorDraws two;
  two.draws = {ModelParams{0.3, 0.5, 1.0}, ModelParams{0.6, 0.9, 1.4}};
  const auto mean = posterior_mean_probs(two, 3);
  CHECK(mean.isApprox(0.5 * (category_probs(two.draws[0], 3) + category_probs(two.draws[1], 3))));

  // p_DLT at dose 1 for beta large is close to 1, for beta tiny close to Pr(Z >= g2).
  PosteriorDraws high;
  high.draws = {ModelParams{3.0, 0.1, 0.2}};
  CHECK(posterior_dlt_exceedance(high, 1, 0.25) == 1.0);
  PosteriorDraws low;
  low.draws = {ModelParams{0.01, 2.0, 3.0}};
  CHECK(posterior_dlt_exceedance(low, 1, 0.25) == 0.0);
  PosteriorDraws mixed;
  mixed.draws = {high.draws[0], low.draws[0]};
  CHECK(posterior_dlt_exceedance(mixed, 1, 0.25) == 0.5);
}

TEST_CASE("chain requires data") {
  std::vector<PatientRecord> none;
  CHECK_THROWS_AS(run_chain(none, DesignConfig{}, 1), DomainError);
}
