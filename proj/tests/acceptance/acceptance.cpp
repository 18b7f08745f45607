#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>

#include "podbin/io.hpp"
#include "podbin/predictive.hpp"
#include "podbin/rules.hpp"
#include "podbin/sampler.hpp"
#include "podbin/sim.hpp"
#include "podbin/test_support.hpp"

using namespace podbin;
using OC = OrdinalCategory;

namespace {

constexpr double kWeightTol = 1e-12;
constexpr double kPodTol = 1e-12;
constexpr double kBetaTailTol = 1e-12;
constexpr double kRecoveryTol = 0.15;
constexpr double kPcsTol = 4.0;        // percentage points
constexpr double kDurationTol = 15.0;  // days
constexpr double kInconsistencyMax = 0.1;  // per 100 decisions

struct Outcome {
  bool pass = true;
  std::string detail;
};

int failures = 0;

void report(const std::string& name, const Outcome& o, double seconds) {
  std::printf("%s  %-28s %6.1fs  %s\n", o.pass ? "PASS" : "FAIL", name.c_str(), seconds,
              o.detail.c_str());
  std::fflush(stdout);
  if (!o.pass) ++failures;
}

template <typename Fn>
void criterion(const std::string& name, Fn fn) {
  const auto t0 = std::chrono::steady_clock::now();
  Outcome o;
  try {
    o = fn();
  } catch (const std::exception& e) {
    o = {false, std::string("exception: ") + e.what()};
  }
  report(name, o, std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
}

std::string fmt(const char* f, double a) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

Outcome weight_matrix_laws() {
  const double window = 28.0;
  Rng rng(1);
  double worst = 0.0;
  for (int i = 0; i < 1000; ++i) {
    const auto w = weight_matrix(window * rng.uniform(), window);
    for (int c = 0; c < 4; ++c) worst = std::max(worst, std::abs(w.col(c).sum() - 1.0));
  }
  const double identity = (weight_matrix(window, window) - WeightMatrix<double>::Identity()).cwiseAbs().maxCoeff();
  return {worst <= kWeightTol && identity <= kWeightTol,
          "max |colsum-1| " + fmt("%.2e", worst) + ", |W(W)-I| " + fmt("%.2e", identity)};
}

ProbVector4<double> random_simplex(Rng& rng) {
  ProbVector4<double> q;
  for (int c = 0; c < 4; ++c) q(c) = rng.exponential(1.0);
  if (rng.bernoulli(0.15)) q(static_cast<int>(rng.uniform() * 4)) = 0.0;
  return q / q.sum();
}

Outcome pod_exactness() {
  DesignConfig config;
  Rng rng(2);
  double worst = 0.0;
  for (int s = 0; s < 500; ++s) {
    std::vector<OC> completed;
    const int n_completed = static_cast<int>(rng.uniform() * 9);
    for (int i = 0; i < n_completed; ++i) completed.push_back(category_from_int(1 + static_cast<int>(rng.uniform() * 4)));
    const int J = 1 + static_cast<int>(rng.uniform() * 4);
    std::vector<ProbVector4<double>> q;
    for (int j = 0; j < J; ++j) q.push_back(random_simplex(rng));
    const DoseBounds bounds{rng.bernoulli(0.2), rng.bernoulli(0.2)};
    const auto dp = decision_distribution(pending_count_distribution(q), completed, config, bounds);
    const auto brute = testing::enumerate_decisions(completed, q, [&](const std::vector<OC>& c) {
      return static_cast<int>(stage1_decision(c, config, bounds));
    });
    for (int a = 0; a < 3; ++a) worst = std::max(worst, std::abs(dp.prob[a] - brute[a]));
  }
  return {worst <= kPodTol, "500 states, max diff " + fmt("%.2e", worst)};
}

Outcome stage_one_table() {
  DesignConfig config;
  const double lo = config.target_dlt - config.ei_lower;
  const double hi = config.target_dlt + config.ei_upper;
  int checked = 0, violations = 0;
  for (int n = 1; n <= 12; ++n)
    for (int c2 = 0; c2 <= n; ++c2)
      for (int c3 = 0; c2 + c3 <= n; ++c3)
        for (int c4 = 0; c2 + c3 + c4 <= n; ++c4) {
          std::vector<OC> cats(n - c2 - c3 - c4, OC::NoToxicity);
          cats.insert(cats.end(), c2, OC::ModerateOnly);
          cats.insert(cats.end(), c3, OC::DltOnly);
          cats.insert(cats.end(), c4, OC::Both);
          const double tb = (config.severity_weight * (c2 + c4) + (c3 + c4)) / n;
          const Move m = stage1_decision(cats, config, {});
          if (tb > hi + 1e-9 && m == Move::Escalate) ++violations;
          if (tb < lo - 1e-9 && m == Move::DeEscalate) ++violations;
          ++checked;
        }

  DesignConfig table_one = config;
  table_one.severity_weight = 0.2;
  const std::vector<OC> example{OC::ModerateOnly, OC::Both, OC::DltOnly};
  const double tb = empirical_tb(example, 0.2);
  const double tb1 = empirical_tb_minus1(example, 0.2);
  const Move m = stage1_decision(example, table_one, {});
  const bool example_ok = m == Move::DeEscalate && std::abs(tb - 0.8) < 1e-12 &&
                          std::abs(tb1 - 0.733) < 5e-4;
  return {violations == 0 && example_ok,
          std::to_string(checked) + " multisets, " + std::to_string(violations) +
              " violations; example " + to_string(m) + " TB " + fmt("%.3f", tb) + " TB-1 " +
              fmt("%.3f", tb1)};
}

Outcome beta_tail_oracle() {
  const double a = std::abs(beta_tail(3, 3, 0.25) - (1 - std::pow(0.25, 4)));
  const double b = std::abs(beta_tail(0, 3, 0.25) - (1 - (1 - std::pow(0.75, 4))));
  return {a <= kBetaTailTol && b <= kBetaTailTol,
          "errors " + fmt("%.2e", a) + ", " + fmt("%.2e", b)};
}

Outcome sampler_recovery() {
  const ModelParams truth{0.5, 0.7, 1.2};
  const auto patients = testing::stratified_complete_patients(truth, 200, 5, 28.0);
  DesignConfig config;
  const auto draws = run_chain(patients, config, 17);
  const auto again = run_chain(patients, config, 17);
  bool same = draws.size() == again.size();
  for (std::size_t i = 0; same && i < draws.size(); ++i) {
    same = draws.draws[i].beta == again.draws[i].beta && draws.draws[i].g2 == again.draws[i].g2 &&
           draws.draws[i].g3 == again.draws[i].g3 && draws.draws[i].alpha == again.draws[i].alpha;
  }
  double beta = 0, g2 = 0, g3 = 0;
  for (const auto& d : draws.draws) {
    beta += d.beta;
    g2 += d.g2;
    g3 += d.g3;
  }
  const double n = draws.size();
  beta /= n;
  g2 /= n;
  g3 /= n;
  const bool close = std::abs(beta - truth.beta) <= kRecoveryTol &&
                     std::abs(g2 - truth.g2) <= kRecoveryTol &&
                     std::abs(g3 - truth.g3) <= kRecoveryTol;
  return {close && same, "beta " + fmt("%.3f", beta) + " g2 " + fmt("%.3f", g2) + " g3 " +
                             fmt("%.3f", g3) + (same ? ", deterministic" : ", NOT deterministic")};
}

std::vector<OperatingCharacteristics> simulate(const std::vector<Scenario>& scenarios,
                                               const DesignConfig& config, DesignMode mode,
                                               int reps, std::uint64_t seed, int parallel) {
  std::vector<OperatingCharacteristics> out;
  for (std::size_t i = 0; i < scenarios.size(); ++i) {
    const auto rs = run_replicates(scenarios[i], static_cast<int>(i), config, mode, reps, seed, parallel);
    out.push_back(operating_characteristics(rs, scenarios[i], config));
  }
  return out;
}

double mean_duration(const std::vector<OperatingCharacteristics>& ocs) {
  double s = 0;
  for (const auto& oc : ocs) s += oc.duration_mean;
  return s / ocs.size();
}

Outcome paper_scale(const io::ConfigFile& file, int reps, int parallel) {
  const auto scenarios = paper_scenarios();
  const auto pod = simulate(scenarios, file.design, DesignMode::PodBin, reps, file.sim.seed, parallel);
  const auto bench = simulate(scenarios, file.design, DesignMode::Benchmark, reps, file.sim.seed, parallel);

  const double target_pcs[3] = {73, 86, 81};
  bool pass = true;
  std::string detail = std::to_string(reps) + " reps; PCS";
  for (int s = 0; s < 3; ++s) {
    pass = pass && std::abs(pod[s].pcs - target_pcs[s]) <= kPcsTol;
    detail += " " + scenarios[s].id + "=" + fmt("%.1f", pod[s].pcs);
  }
  const double dur_pod = mean_duration(pod);
  const double dur_bench = mean_duration(bench);
  pass = pass && std::abs(dur_bench - 476) <= kDurationTol && std::abs(dur_pod - 423) <= kDurationTol;
  double de = 0, se = 0;
  for (const auto& oc : pod) {
    de = std::max(de, oc.inconsistency[1]);
    se = std::max(se, oc.inconsistency[2]);
  }
  pass = pass && de <= kInconsistencyMax && se <= kInconsistencyMax;
  detail += "; duration benchmark " + fmt("%.1f", dur_bench) + " podbin " + fmt("%.1f", dur_pod) +
            "; max DE " + fmt("%.3f", de) + " SE " + fmt("%.3f", se);
  return {pass, detail};
}

Outcome weibull_ordering(const io::ConfigFile& file, int reps, int parallel) {
  std::vector<Scenario> w1, w2;
  for (const auto& s : paper_scenarios()) {
    w1.push_back(with_weibull_setting(s, 1));
    w2.push_back(with_weibull_setting(s, 2));
  }
  const double d1 = mean_duration(simulate(w1, file.design, DesignMode::PodBin, reps, file.sim.seed, parallel));
  const double d2 = mean_duration(simulate(w2, file.design, DesignMode::PodBin, reps, file.sim.seed, parallel));
  return {d1 < d2, std::to_string(reps) + " reps; setting 1 " + fmt("%.1f", d1) + " vs setting 2 " +
                       fmt("%.1f", d2)};
}

std::string results_bytes(const io::ConfigFile& file, int reps, int parallel) {
  io::ResultsFile results;
  results.config = file.design;
  results.reps = reps;
  results.seed = file.sim.seed;
  results.scenarios = paper_scenarios();
  for (std::size_t i = 0; i < results.scenarios.size(); ++i) {
    auto rs = run_replicates(results.scenarios[i], static_cast<int>(i), results.config,
                             results.mode, reps, results.seed, parallel);
    results.results.insert(results.results.end(), rs.begin(), rs.end());
  }
  std::ostringstream out;
  io::write_results(out, results);
  return out.str();
}

Outcome determinism(const io::ConfigFile& file, int reps, int parallel) {
  const std::string a = results_bytes(file, reps, 1);
  const std::string b = results_bytes(file, reps, std::max(2, parallel));
  return {a == b && !a.empty(), std::to_string(reps) + " reps x 6 scenarios, parallel 1 vs " +
                                    std::to_string(std::max(2, parallel)) + ", " +
                                    std::to_string(a.size()) + " bytes" +
                                    (a == b ? ", identical" : ", DIFFERENT")};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Acceptance checks"};
  std::string config_path = PODBIN_PAPER_CONFIG;
  int reps = 1000;
  int weibull_reps = 200;
  int determinism_reps = 10;
  int parallel = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  app.add_option("--config", config_path, "Paper config file");
  app.add_option("--reps", reps, "Replicates per scenario for the paper-scale run");
  app.add_option("--weibull-reps", weibull_reps, "Replicates per scenario for the Weibull check");
  app.add_option("--determinism-reps", determinism_reps, "Replicates per scenario for the determinism check");
  app.add_option("--parallel", parallel, "Worker threads");
  CLI11_PARSE(app, argc, argv);

  const auto file = io::load_config(config_path);

  criterion("weight-matrix laws", weight_matrix_laws);
  criterion("PoD exactness", pod_exactness);
  criterion("stage I table", stage_one_table);
  criterion("beta tail closed forms", beta_tail_oracle);
  criterion("sampler recovery", sampler_recovery);
  criterion("paper-scale reproduction", [&] { return paper_scale(file, reps, parallel); });
  criterion("Weibull duration ordering", [&] { return weibull_ordering(file, weibull_reps, parallel); });
  criterion("determinism across threads", [&] { return determinism(file, determinism_reps, parallel); });

  std::printf("%d of 8 criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
