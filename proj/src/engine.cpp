#include "podbin/engine.hpp"

#include <algorithm>
#include <array>

#include "podbin/random.hpp"
#include "podbin/sampler.hpp"

namespace podbin {

namespace {
// Onsets recorded as enroll + t and read back as time - enroll may drift by
// an ulp past the window.
constexpr double kTimeSlack = 1e-9;
}  // namespace

std::string to_string(Stage s) { return s == Stage::I ? "I" : "II"; }

std::string to_string(DesignMode m) { return m == DesignMode::PodBin ? "podbin" : "benchmark"; }

std::string to_string(ArrivalPolicy p) { return p == ArrivalPolicy::Queue ? "queue" : "turn_away"; }

std::string to_string(Toxicity t) { return t == Toxicity::MT ? "MT" : "DLT"; }

std::string to_string(Inconsistency i) {
  static const std::array<const char*, 6> names{"DS", "DE", "SE", "SD", "ED", "ES"};
  return names[static_cast<int>(i)];
}

DesignMode design_mode_from_string(const std::string& s) {
  if (s == "podbin") return DesignMode::PodBin;
  if (s == "benchmark") return DesignMode::Benchmark;
  throw DomainError("unknown design mode '" + s + "' (podbin|benchmark)");
}

ArrivalPolicy arrival_policy_from_string(const std::string& s) {
  if (s == "queue") return ArrivalPolicy::Queue;
  if (s == "turn_away") return ArrivalPolicy::TurnAway;
  throw DomainError("unknown arrival policy '" + s + "' (queue|turn_away)");
}

Toxicity toxicity_from_string(const std::string& s) {
  if (s == "MT") return Toxicity::MT;
  if (s == "DLT") return Toxicity::DLT;
  throw DomainError("unknown toxicity '" + s + "' (MT|DLT)");
}

std::string to_string(Event::Type t) {
  switch (t) {
    case Event::Type::Arrival: return "Arrival";
    case Event::Type::Onset: return "Onset";
    case Event::Type::FollowupTick: return "FollowupTick";
  }
  return "?";
}

Event::Type event_type_from_string(const std::string& s) {
  for (auto t : {Event::Type::Arrival, Event::Type::Onset, Event::Type::FollowupTick}) {
    if (to_string(t) == s) return t;
  }
  throw DomainError("unknown event type '" + s + "'");
}

std::string to_string(DecisionDetail::Status s) {
  switch (s) {
    case DecisionDetail::Status::FirstCohort: return "FirstCohort";
    case DecisionDetail::Status::Decided: return "Decided";
    case DecisionDetail::Status::AwaitingFollowUp: return "AwaitingFollowUp";
    case DecisionDetail::Status::Closed: return "Closed";
  }
  return "?";
}

std::optional<Inconsistency> classify_inconsistency(Move oracle, Move taken) {
  using M = Move;
  if (oracle == taken) return std::nullopt;
  if (oracle == M::DeEscalate) return taken == M::Stay ? Inconsistency::DS : Inconsistency::DE;
  if (oracle == M::Stay) return taken == M::Escalate ? Inconsistency::SE : Inconsistency::SD;
  return taken == M::DeEscalate ? Inconsistency::ED : Inconsistency::ES;
}

int TrialState::pending_count() const {
  return static_cast<int>(std::count_if(patients.begin(), patients.end(),
                                        [](const PatientRecord& p) { return p.pending; }));
}

int TrialState::pending_at(int dose) const {
  return static_cast<int>(std::count_if(patients.begin(), patients.end(), [&](const auto& p) {
    return p.pending && p.dose == dose;
  }));
}

std::vector<OrdinalCategory> TrialState::completed_at(int dose) const {
  std::vector<OrdinalCategory> out;
  for (const auto& p : patients) {
    if (!p.pending && p.dose == dose) out.push_back(p.observed_category());
  }
  return out;
}

const PatientRecord& TrialState::patient(PatientId id) const {
  if (id < 1 || id > enrolled()) throw EventError("unknown patient " + std::to_string(id));
  return patients[id - 1];
}

bool TrialState::finished() const {
  return terminated || (enrolled() >= config.max_n && pending_count() == 0);
}

double TrialState::duration() const {
  if (patients.empty()) return 0.0;
  if (terminated_at) return *terminated_at - patients.front().enroll_time;
  double end = 0.0;
  for (const auto& p : patients) end = std::max(end, p.enroll_time + config.window);
  return end - patients.front().enroll_time;
}

TrialState new_trial(const DesignConfig& config) {
  config.validate();
  TrialState state;
  state.config = config;
  return state;
}

std::uint64_t decision_seed(const TrialState& state, int decision_index) {
  return derive_seed(state.config.rng_seed, static_cast<std::uint64_t>(decision_index) + 1);
}

std::uint64_t final_seed(const TrialState& state) { return derive_seed(state.config.rng_seed, 0); }

void stage_transition_check(TrialState& state) {
  if (state.stage == Stage::II) return;
  std::array<bool, 4> seen{};
  for (const auto& p : state.patients) seen[to_index(p.observed_category())] = true;
  const bool all_seen = std::all_of(seen.begin(), seen.end(), [](bool b) { return b; });
  if (state.enrolled() >= state.config.stage2_threshold || all_seen) state.stage = Stage::II;
}

namespace {

void update_follow_up(TrialState& state) {
  const double window = state.config.window;
  for (auto& p : state.patients) {
    p.pending = state.clock < p.enroll_time + window;
    p.follow_up = p.pending ? state.clock - p.enroll_time : window;
  }
}

std::vector<DoseTally> safety_tallies(const TrialState& state) {
  std::vector<DoseTally> tally(state.config.num_doses);
  for (const auto& p : state.patients) {
    const bool dlt = has_dlt(p.observed_category());
    auto& t = tally[p.dose - 1];
    if (!p.pending || dlt) ++t.n;
    if (dlt) ++t.n_dlt;
  }
  return tally;
}

void apply_safety(TrialState& state) {
  if (state.terminated) return;
  const auto tally = safety_tallies(state);
  const auto actions = safety_check(tally, state.config);
  state.excluded_from = 0;
  for (const auto& a : actions) {
    if (a.kind == ActionKind::Terminate) {
      state.terminated = true;
      state.terminated_at = state.clock;
      state.cohort_slots = 0;
      return;
    }
    if (a.kind == ActionKind::ExcludeFrom) state.excluded_from = a.dose;
  }
  if (state.is_excluded(state.current_dose)) {
    state.current_dose = state.highest_available();
    state.cohort_slots = 0;
  }
}

DoseBounds bounds_at(const TrialState& state, int dose) {
  return {dose <= 1, dose >= state.highest_available()};
}

int dose_after(int dose, Move m) {
  switch (m) {
    case Move::DeEscalate: return dose - 1;
    case Move::Stay: return dose;
    case Move::Escalate: return dose + 1;
  }
  return dose;
}

PatientId enroll(TrialState& state) {
  PatientRecord p;
  p.id = state.enrolled() + 1;
  p.dose = state.current_dose;
  p.enroll_time = state.clock;
  p.follow_up = 0.0;
  p.pending = true;
  state.patients.push_back(p);
  --state.cohort_slots;
  return p.id;
}

void open_cohort(TrialState& state, int dose) {
  state.current_dose = dose;
  state.cohort_slots = std::min(state.config.cohort_size, state.config.max_n - state.enrolled());
  ++state.cohorts_opened;
  state.suspended.reset();
}

bool closed(const TrialState& state) {
  return state.terminated || state.enrolled() >= state.config.max_n;
}

// Tries to enroll one arrival now. Returns the new patient id, or nothing if
// enrollment is blocked.
std::optional<PatientId> try_enroll(TrialState& state, const EngineOptions& options) {
  if (closed(state)) return std::nullopt;
  if (state.cohort_slots > 0) return enroll(state);
  DecisionDetail detail = next_assignment(state, options);
  switch (detail.status) {
    case DecisionDetail::Status::FirstCohort:
      open_cohort(state, 1);
      return enroll(state);
    case DecisionDetail::Status::Closed:
    case DecisionDetail::Status::AwaitingFollowUp:
      return std::nullopt;
    case DecisionDetail::Status::Decided: break;
  }
  const Action action = detail.record.action;
  const int next = detail.record.next_dose;
  state.decisions.push_back(std::move(detail.record));
  if (action.kind == ActionKind::Suspend) {
    state.suspended = action.reason;
    return std::nullopt;
  }
  open_cohort(state, next);
  return enroll(state);
}

}  // namespace

AdvanceResult advance(TrialState& state, const Event& event, const EngineOptions& options) {
  if (event.time < state.clock) {
    throw EventError("event at t=" + std::to_string(event.time) + " precedes the trial clock " +
                     std::to_string(state.clock));
  }
  if (event.type == Event::Type::Onset) {
    const auto& p = state.patient(event.patient);
    const double onset = event.time - p.enroll_time;
    if (onset > state.config.window + kTimeSlack) {
      throw EventError("onset for patient " + std::to_string(p.id) + " after follow-up ended");
    }
    const auto& slot = event.toxicity == Toxicity::MT ? p.mt_onset : p.dlt_onset;
    if (slot) {
      throw EventError(to_string(event.toxicity) + " onset already recorded for patient " +
                       std::to_string(p.id));
    }
  }

  state.clock = event.time;
  update_follow_up(state);
  if (event.type == Event::Type::Onset) {
    auto& p = state.patients[event.patient - 1];
    const double onset = std::min(event.time - p.enroll_time, p.follow_up);
    (event.toxicity == Toxicity::MT ? p.mt_onset : p.dlt_onset) = onset;
  }
  apply_safety(state);
  stage_transition_check(state);

  AdvanceResult result;
  if (event.type == Event::Type::Arrival) state.queue.push_back(event.time);
  while (!state.queue.empty()) {
    if (closed(state)) {
      result.turned_away += static_cast<int>(state.queue.size());
      state.queue.clear();
      break;
    }
    const auto id = try_enroll(state, options);
    if (!id) break;
    state.queue.pop_front();
    result.enrolled.push_back(*id);
    stage_transition_check(state);
  }
  if (options.arrivals == ArrivalPolicy::TurnAway) {
    result.turned_away += static_cast<int>(state.queue.size());
    state.queue.clear();
  }
  result.queued = static_cast<int>(state.queue.size());
  state.turned_away += result.turned_away;
  return result;
}

DecisionDetail next_assignment(const TrialState& state, const EngineOptions& options) {
  DecisionDetail detail;
  if (closed(state)) {
    detail.status = DecisionDetail::Status::Closed;
    return detail;
  }
  if (state.cohorts_opened == 0) {
    detail.status = DecisionDetail::Status::FirstCohort;
    detail.record.next_dose = 1;
    return detail;
  }
  const bool rolling = options.mode == DesignMode::PodBin && state.stage == Stage::II;
  if (!rolling && state.pending_count() > 0) {
    detail.status = DecisionDetail::Status::AwaitingFollowUp;
    return detail;
  }

  const int dose = state.current_dose;
  const auto completed = state.completed_at(dose);
  const DoseBounds bounds = bounds_at(state, dose);
  auto& rec = detail.record;
  rec.index = static_cast<int>(state.decisions.size());
  rec.time = state.clock;
  rec.dose = dose;
  rec.stage = state.stage;
  rec.pending = state.pending_at(dose);
  rec.seed = decision_seed(state, rec.index);

  if (rec.pending == 0) {
    // A dose reached through an exclusion may have no data yet.
    const Move m = completed.empty() ? Move::Stay : stage1_decision(completed, state.config, bounds);
    rec.pod = degenerate_distribution(m);
    rec.action = Action::from_move(m);
  } else {
    const auto draws = run_chain(state.patients, state.config, rec.seed);
    std::vector<ProbVector4<double>> probs;
    for (const auto& p : state.patients) {
      if (!p.pending || p.dose != dose) continue;
      const auto q = predictive_completion(draws, p, state.config.window).probs;
      detail.completions.emplace_back(p.id, q);
      probs.push_back(q);
    }
    const auto counts = pending_count_distribution(probs);
    const auto dist = decision_distribution(counts, completed, state.config, bounds);
    DoseActivity activity;
    activity.pending = rec.pending;
    activity.completed = static_cast<int>(completed.size());
    activity.completed_without_dlt = static_cast<int>(
        std::count_if(completed.begin(), completed.end(), [](auto c) { return !has_dlt(c); }));
    rec.pod = dist;
    rec.action = apply_suspension(dist.optimal, dist, activity, state.config);
  }
  if (rec.action.is_move()) {
    rec.next_dose = dose_after(dose, rec.action.move());
    if (options.truth) {
      rec.oracle = oracle_decision(state, options.truth);
      rec.inconsistency = classify_inconsistency(*rec.oracle, rec.action.move());
    }
  }
  return detail;
}

Move whatif_decision(const TrialState& state, std::span<const OrdinalCategory> pending_finals) {
  const int dose = state.current_dose;
  auto categories = state.completed_at(dose);
  if (static_cast<int>(pending_finals.size()) != state.pending_at(dose)) {
    throw DomainError("whatif: expected " + std::to_string(state.pending_at(dose)) +
                      " categories for the pending patients at dose " + std::to_string(dose) +
                      ", got " + std::to_string(pending_finals.size()));
  }
  categories.insert(categories.end(), pending_finals.begin(), pending_finals.end());
  if (categories.empty()) return Move::Stay;
  return stage1_decision(categories, state.config, bounds_at(state, dose));
}

Move oracle_decision(const TrialState& state,
                     const std::function<OrdinalCategory(PatientId)>& truth) {
  std::vector<OrdinalCategory> finals;
  for (const auto& p : state.patients) {
    if (p.pending && p.dose == state.current_dose) finals.push_back(truth(p.id));
  }
  return whatif_decision(state, finals);
}

MtdResult finalize(const TrialState& state) {
  if (state.terminated) {
    MtdResult result;
    result.reason = MtdResult::Reason::AllTooToxic;
    return result;
  }
  if (state.patients.empty()) throw PreconditionError("finalize: no patients enrolled");
  if (state.pending_count() > 0) {
    throw PreconditionError("finalize: " + std::to_string(state.pending_count()) +
                            " patients are still in follow-up");
  }
  std::vector<int> n_per_dose(state.config.num_doses, 0);
  for (const auto& p : state.patients) ++n_per_dose[p.dose - 1];
  const auto draws = run_chain(state.patients, state.config, final_seed(state));
  return select_mtd(draws, n_per_dose, state.config);
}

TrialState replay(const DesignConfig& config, std::span<const Event> events,
                  const EngineOptions& options) {
  TrialState state = new_trial(config);
  for (const auto& e : events) advance(state, e, options);
  return state;
}

}  // namespace podbin
