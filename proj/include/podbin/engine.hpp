#pragma once

// Event-driven trial state machine. A trial is a DesignConfig plus an ordered
// list of events; every state is reconstructed by replaying the events.

#include <cstdint>
#include <deque>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "podbin/predictive.hpp"
#include "podbin/rules.hpp"
#include "podbin/types.hpp"

namespace podbin {

enum class Stage { I = 1, II = 2 };

// PodBin rolls enrollment in Stage II; Benchmark waits for complete
// follow-up before every cohort.
enum class DesignMode { PodBin, Benchmark };

// Queue holds arrivals that cannot be enrolled yet and enrolls them as soon
// as enrollment reopens. TurnAway drops them (simulation accrual model).
enum class ArrivalPolicy { Queue, TurnAway };

enum class Toxicity { MT, DLT };

enum class Inconsistency { DS, DE, SE, SD, ED, ES };

std::string to_string(Stage s);
std::string to_string(DesignMode m);
std::string to_string(ArrivalPolicy p);
std::string to_string(Toxicity t);
std::string to_string(Inconsistency i);
DesignMode design_mode_from_string(const std::string& s);
ArrivalPolicy arrival_policy_from_string(const std::string& s);
Toxicity toxicity_from_string(const std::string& s);

// Tag for a rolling move that differs from the complete-data move.
std::optional<Inconsistency> classify_inconsistency(Move oracle, Move taken);

struct Event {
  enum class Type { Arrival, Onset, FollowupTick };
  Type type = Type::FollowupTick;
  double time = 0.0;
  PatientId patient = 0;          // Onset only
  Toxicity toxicity = Toxicity::DLT;  // Onset only

  static Event arrival(double t) { return {Type::Arrival, t, 0, Toxicity::DLT}; }
  static Event onset(PatientId id, Toxicity tox, double t) { return {Type::Onset, t, id, tox}; }
  static Event tick(double t) { return {Type::FollowupTick, t, 0, Toxicity::DLT}; }

  bool operator==(const Event&) const = default;
};

std::string to_string(Event::Type t);
Event::Type event_type_from_string(const std::string& s);

// Rejected event: in the past, unknown patient, onset outside follow-up.
class EventError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct DecisionRecord {
  int index = 0;
  double time = 0.0;
  int dose = 1;  // dose the decision was made at
  Stage stage = Stage::I;
  int pending = 0;  // J_d at decision time
  std::optional<DecisionDistribution> pod;
  Action action;
  int next_dose = 0;  // dose assigned to the cohort; 0 when suspended
  std::optional<Move> oracle;
  std::optional<Inconsistency> inconsistency;
  std::uint64_t seed = 0;
};

struct EngineOptions {
  DesignMode mode = DesignMode::PodBin;
  ArrivalPolicy arrivals = ArrivalPolicy::Queue;
  // Simulation only: true final category of a patient.
  std::function<OrdinalCategory(PatientId)> truth;
};

struct TrialState {
  DesignConfig config;
  double clock = 0.0;
  Stage stage = Stage::I;
  int current_dose = 1;
  std::vector<PatientRecord> patients;
  // Doses >= this index are excluded; 0 when nothing is excluded.
  int excluded_from = 0;
  std::optional<SuspendReason> suspended;
  bool terminated = false;
  std::optional<double> terminated_at;
  int cohort_slots = 0;  // remaining places in the open cohort
  int cohorts_opened = 0;
  std::deque<double> queue;  // arrival times waiting for enrollment
  int turned_away = 0;
  std::vector<DecisionRecord> decisions;

  int enrolled() const { return static_cast<int>(patients.size()); }
  int highest_available() const {
    return excluded_from > 0 ? excluded_from - 1 : config.num_doses;
  }
  bool is_excluded(int dose) const { return excluded_from > 0 && dose >= excluded_from; }
  int pending_count() const;
  int pending_at(int dose) const;
  std::vector<OrdinalCategory> completed_at(int dose) const;
  const PatientRecord& patient(PatientId id) const;
  // No more enrollment possible and nobody left in follow-up.
  bool finished() const;
  // Trial start (first enrollment) to last follow-up completion or termination.
  double duration() const;
};

TrialState new_trial(const DesignConfig& config);

// Outcome of one event, so a driver knows whom to generate outcomes for.
struct AdvanceResult {
  std::vector<PatientId> enrolled;
  int turned_away = 0;
  int queued = 0;
};

// Applies one event. Throws EventError for events the state cannot accept.
AdvanceResult advance(TrialState& state, const Event& event, const EngineOptions& options);

struct DecisionDetail {
  enum class Status {
    FirstCohort,       // nothing decided yet; the first cohort goes to dose 1
    Decided,           // record holds the decision
    AwaitingFollowUp,  // Stage I / Benchmark: patients still pending
    Closed,            // terminated or fully enrolled
  };
  Status status = Status::Decided;
  DecisionRecord record;
  // Predictive completions for pending patients at the current dose.
  std::vector<std::pair<PatientId, ProbVector4<double>>> completions;
};

std::string to_string(DecisionDetail::Status s);

// The decision the trial would take for a cohort opening now. Pure.
DecisionDetail next_assignment(const TrialState& state, const EngineOptions& options);

// Stage I rule on completed data plus the given final categories of the
// patients pending at the current dose.
Move whatif_decision(const TrialState& state, std::span<const OrdinalCategory> pending_finals);

// Moves the trial to Stage II when n >= n* or all four categories were seen.
void stage_transition_check(TrialState& state);

Move oracle_decision(const TrialState& state, const std::function<OrdinalCategory(PatientId)>& truth);

// Selects the MTD on complete data. Requires no pending patients unless the
// trial was terminated for toxicity.
MtdResult finalize(const TrialState& state);

TrialState replay(const DesignConfig& config, std::span<const Event> events,
                  const EngineOptions& options);

std::uint64_t decision_seed(const TrialState& state, int decision_index);
std::uint64_t final_seed(const TrialState& state);

}  // namespace podbin
