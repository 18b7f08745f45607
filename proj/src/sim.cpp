#include "podbin/sim.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <numeric>
#include <queue>
#include <thread>
#include <tuple>

namespace podbin {

namespace {
constexpr double kWindowMass = 0.999;
}

std::string to_string(TimeModel m) {
  return m == TimeModel::ConditionalUniform ? "uniform" : "weibull";
}

TimeModel time_model_from_string(const std::string& s) {
  if (s == "uniform") return TimeModel::ConditionalUniform;
  if (s == "weibull") return TimeModel::Weibull;
  throw DomainError("unknown time model '" + s + "' (uniform|weibull)");
}

double WeibullParams::cdf(double t) const {
  if (t <= 0.0) return 0.0;
  return -std::expm1(-std::pow(t / scale, shape));
}

WeibullParams weibull_from_fraction(double q, double window) {
  if (!(q > 0.0 && q < 1.0)) throw DomainError("weibull_from_fraction: q must be in (0, 1)");
  if (!(window > 0.0)) throw DomainError("weibull_from_fraction: window must be positive");
  // F(W) = m gives (W/scale)^k = L with L = -log(1 - m); then
  // F(W/2) = 1 - exp(-L 2^-k) = q m.
  const double L = -std::log1p(-kWindowMass);
  const double shape = -std::log2(-std::log1p(-q * kWindowMass) / L);
  if (!(shape >= 0.01 && shape <= 50.0)) {
    throw DomainError("weibull_from_fraction: shape outside [0.01, 50] for q=" + std::to_string(q));
  }
  return {shape, window / std::pow(L, 1.0 / shape)};
}

double sample_truncated_weibull(const WeibullParams& w, double window, Rng& rng) {
  const double u = rng.uniform_open() * w.cdf(window);
  const double t = w.scale * std::pow(-std::log1p(-u), 1.0 / w.shape);
  return std::min(t, window);
}

std::vector<double> Scenario::toxicity_burden(double severity_weight) const {
  std::vector<double> tb(p_dlt.size());
  for (std::size_t d = 0; d < tb.size(); ++d) tb[d] = severity_weight * p_mt[d] + p_dlt[d];
  return tb;
}

void Scenario::validate() const {
  auto fail = [&](const std::string& what) {
    throw DomainError("scenario '" + id + "': " + what);
  };
  if (p_dlt.empty() || p_mt.size() != p_dlt.size()) fail("p_mt and p_dlt need equal, nonzero length");
  for (double p : p_mt)
    if (!(p >= 0.0 && p <= 1.0)) fail("p_mt entries must be probabilities");
  for (double p : p_dlt)
    if (!(p >= 0.0 && p <= 1.0)) fail("p_dlt entries must be probabilities");
  if (!(accrual_rate > 0.0)) fail("accrual_rate must be positive");
  if (time_model == TimeModel::Weibull) {
    if (!(weibull_q_mt > 0.0 && weibull_q_mt < 1.0) || !(weibull_q_dlt > 0.0 && weibull_q_dlt < 1.0))
      fail("Weibull fractions must be in (0, 1)");
  }
}

std::vector<Scenario> paper_scenarios() {
  auto make = [](std::string id, std::vector<double> mt, std::vector<double> dlt) {
    Scenario s;
    s.id = std::move(id);
    s.p_mt = std::move(mt);
    s.p_dlt = std::move(dlt);
    return s;
  };
  return {
      make("S1", {0.31, 0.40, 0.50, 0.60, 0.69}, {0.26, 0.38, 0.50, 0.62, 0.74}),
      make("S2", {0.11, 0.26, 0.47, 0.68, 0.85}, {0.07, 0.20, 0.42, 0.67, 0.86}),
      make("S3", {0.09, 0.21, 0.38, 0.56, 0.70}, {0.02, 0.08, 0.21, 0.43, 0.68}),
      make("S4", {0.11, 0.21, 0.31, 0.40, 0.48}, {0.03, 0.09, 0.21, 0.37, 0.57}),
      make("S5", {0.02, 0.07, 0.20, 0.37, 0.48}, {0.00, 0.00, 0.03, 0.11, 0.30}),
      make("S6", {0.19, 0.24, 0.28, 0.32, 0.35}, {0.04, 0.06, 0.08, 0.11, 0.15}),
  };
}

Scenario with_weibull_setting(Scenario s, int setting) {
  // {MT, DLT} fraction of onsets in the first half of the window.
  static const double q[4][2] = {{0.8, 0.8}, {0.2, 0.2}, {0.2, 0.8}, {0.8, 0.2}};
  if (setting < 1 || setting > 4) throw DomainError("Weibull setting must be 1..4");
  s.time_model = TimeModel::Weibull;
  s.weibull_q_mt = q[setting - 1][0];
  s.weibull_q_dlt = q[setting - 1][1];
  s.id += "-W" + std::to_string(setting);
  return s;
}

ToxicityDraw gen_toxicity(const Scenario& scenario, int dose, double window, Rng& rng) {
  const bool mt = rng.bernoulli(scenario.p_mt[dose - 1]);
  const bool dlt = rng.bernoulli(scenario.p_dlt[dose - 1]);
  double t_mt, t_dlt;
  if (scenario.time_model == TimeModel::ConditionalUniform) {
    t_mt = window * (1.0 - rng.uniform());
    t_dlt = window * (1.0 - rng.uniform());
  } else {
    t_mt = sample_truncated_weibull(weibull_from_fraction(scenario.weibull_q_mt, window), window, rng);
    t_dlt =
        sample_truncated_weibull(weibull_from_fraction(scenario.weibull_q_dlt, window), window, rng);
  }
  ToxicityDraw out;
  if (mt) out.mt_onset = t_mt;
  if (dlt) out.dlt_onset = t_dlt;
  return out;
}

std::vector<double> gen_arrivals(double rate, int count, Rng& rng) {
  if (!(rate > 0.0)) throw DomainError("gen_arrivals: rate must be positive");
  std::vector<double> gaps(count);
  for (auto& g : gaps) g = rng.exponential(rate);
  return gaps;
}

std::uint64_t replicate_seed(std::uint64_t master, int scenario_index, int replicate) {
  return derive_seed(derive_seed(master, static_cast<std::uint64_t>(scenario_index)),
                     static_cast<std::uint64_t>(replicate));
}

namespace {

// Streams under one replicate seed.
enum : std::uint64_t { kInferenceStream = 1, kArrivalStream = 2, kPatientStream = 3 };

struct Pending {
  double time;
  int priority;  // onsets, then follow-up completions, then arrivals
  long seq;
  Event event;

  bool operator>(const Pending& o) const {
    return std::tie(time, priority, seq) > std::tie(o.time, o.priority, o.seq);
  }
};

}  // namespace

TrialResult run_replicate(const Scenario& scenario, const DesignConfig& config, DesignMode mode,
                          std::uint64_t seed) {
  TrialResult result;
  result.scenario = scenario.id;
  result.mode = mode;
  result.seed = seed;

  DesignConfig cfg = config;
  cfg.rng_seed = derive_seed(seed, kInferenceStream);
  const double window = cfg.window;

  std::vector<ToxicityDraw> truth;
  EngineOptions options;
  options.mode = mode;
  options.arrivals = ArrivalPolicy::TurnAway;
  options.truth = [&truth](PatientId id) { return truth.at(id - 1).category(); };

  try {
    scenario.validate();
    if (scenario.num_doses() != cfg.num_doses) {
      throw DomainError("scenario '" + scenario.id + "' has " +
                        std::to_string(scenario.num_doses()) + " doses, config has " +
                        std::to_string(cfg.num_doses));
    }
    TrialState state = new_trial(cfg);
    Rng arrivals(derive_seed(seed, kArrivalStream));
    std::priority_queue<Pending, std::vector<Pending>, std::greater<>> events;
    long seq = 0;
    auto schedule = [&](const Event& e, int priority) {
      events.push({e.time, priority, seq++, e});
    };
    schedule(Event::arrival(arrivals.exponential(scenario.accrual_rate)), 2);

    while (!events.empty() && !state.finished()) {
      const Event e = events.top().event;
      events.pop();
      const auto outcome = advance(state, e, options);
      for (PatientId id : outcome.enrolled) {
        const auto& p = state.patient(id);
        Rng rng(derive_seed(derive_seed(seed, kPatientStream), static_cast<std::uint64_t>(id)));
        truth.push_back(gen_toxicity(scenario, p.dose, window, rng));
        const auto& t = truth.back();
        if (t.mt_onset) schedule(Event::onset(id, Toxicity::MT, p.enroll_time + *t.mt_onset), 0);
        if (t.dlt_onset) schedule(Event::onset(id, Toxicity::DLT, p.enroll_time + *t.dlt_onset), 0);
        schedule(Event::tick(p.enroll_time + window), 1);
      }
      if (e.type == Event::Type::Arrival && state.enrolled() < cfg.max_n && !state.terminated) {
        schedule(Event::arrival(e.time + arrivals.exponential(scenario.accrual_rate)), 2);
      }
    }

    result.terminated = state.terminated;
    result.duration = state.duration();
    result.turned_away = state.turned_away;
    for (const auto& p : state.patients) {
      result.patients.push_back({p.id, p.dose, p.enroll_time, truth[p.id - 1].category()});
    }
    result.decisions = state.decisions;
    result.mtd = finalize(state).selected;
  } catch (const std::exception& ex) {
    result.failure = ex.what();
  }
  return result;
}

std::vector<TrialResult> run_replicates(const Scenario& scenario, int scenario_index,
                                        const DesignConfig& config, DesignMode mode, int reps,
                                        std::uint64_t master_seed, int parallel) {
  std::vector<TrialResult> results(reps);
  std::atomic<int> next{0};
  auto work = [&] {
    for (int r = next++; r < reps; r = next++) {
      results[r] = run_replicate(scenario, config, mode, replicate_seed(master_seed, scenario_index, r));
    }
  };
  const int threads = std::clamp(parallel, 1, std::max(reps, 1));
  std::vector<std::thread> pool;
  for (int t = 1; t < threads; ++t) pool.emplace_back(work);
  work();
  for (auto& t : pool) t.join();
  return results;
}

OperatingCharacteristics operating_characteristics(std::span<const TrialResult> results,
                                                   const Scenario& scenario,
                                                   const DesignConfig& config) {
  if (results.empty()) throw DomainError("operating_characteristics: no replicates");
  const int D = scenario.num_doses();
  OperatingCharacteristics oc;
  oc.scenario = scenario.id;
  oc.mode = results.front().mode;
  const auto tb = scenario.toxicity_burden(config.severity_weight);
  oc.true_mtd = true_mtd_set(tb, config);

  // Doses above this one count as overdosing.
  int top = 0;
  if (!oc.true_mtd.empty()) {
    top = oc.true_mtd.back();
  } else {
    for (int d = D; d >= 1; --d)
      if (tb[d - 1] < config.ttb()) {
        top = d;
        break;
      }
  }
  auto in_true = [&](int d) {
    return std::find(oc.true_mtd.begin(), oc.true_mtd.end(), d) != oc.true_mtd.end();
  };

  oc.selection.assign(D, 0.0);
  oc.allocation.assign(D, 0.0);
  std::array<int, 6> tags{};
  std::vector<double> durations;
  double pca = 0, poa = 0, pomt = 0, podlt = 0;
  long patients_total = 0;
  int used = 0;
  for (const auto& r : results) {
    if (r.failure) {
      ++oc.failures;
      continue;
    }
    ++used;
    if (r.mtd) {
      oc.selection[*r.mtd - 1] += 1;
      if (in_true(*r.mtd)) oc.pcs += 1;
      if (*r.mtd > top) oc.pos += 1;
    } else {
      oc.none_selected += 1;
      if (oc.true_mtd.empty()) oc.pcs += 1;
    }
    if (!r.patients.empty()) {
      int correct = 0, over = 0, mt = 0, dlt = 0;
      for (const auto& p : r.patients) {
        oc.allocation[p.dose - 1] += 1;
        correct += in_true(p.dose);
        over += p.dose > top;
        mt += has_mt(p.category);
        dlt += has_dlt(p.category);
      }
      const double n = static_cast<double>(r.patients.size());
      pca += correct / n;
      poa += over / n;
      pomt += mt / n;
      podlt += dlt / n;
      patients_total += static_cast<long>(r.patients.size());
    }
    for (const auto& d : r.decisions) {
      if (d.stage != Stage::II || d.pending == 0 || !d.action.is_move()) continue;
      ++oc.rolling_decisions;
      if (d.inconsistency) ++tags[static_cast<int>(*d.inconsistency)];
    }
    durations.push_back(r.duration);
  }
  oc.replicates = used;
  if (used == 0) throw DomainError("operating_characteristics: every replicate failed");
  const double reps = used;
  oc.pcs *= 100.0 / reps;
  oc.pos *= 100.0 / reps;
  oc.none_selected *= 100.0 / reps;
  for (auto& s : oc.selection) s *= 100.0 / reps;
  for (auto& a : oc.allocation) a *= patients_total > 0 ? 100.0 / patients_total : 0.0;
  oc.pca = 100.0 * pca / reps;
  oc.poa = 100.0 * poa / reps;
  oc.pomt = 100.0 * pomt / reps;
  oc.podlt = 100.0 * podlt / reps;
  for (int i = 0; i < 6; ++i) {
    oc.inconsistency[i] = oc.rolling_decisions > 0 ? 100.0 * tags[i] / oc.rolling_decisions : 0.0;
  }
  oc.duration_mean = std::accumulate(durations.begin(), durations.end(), 0.0) / reps;
  double ss = 0;
  for (double d : durations) ss += (d - oc.duration_mean) * (d - oc.duration_mean);
  oc.duration_sd = used > 1 ? std::sqrt(ss / (used - 1)) : 0.0;
  return oc;
}

}  // namespace podbin
