#pragma once

// Deterministic decision logic: the complete-data interval algorithm,
// suspension rules for pending outcomes, safety rules and MTD selection.

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "podbin/core_model.hpp"
#include "podbin/types.hpp"

namespace podbin {

struct PosteriorDraws;

enum class Move { DeEscalate = 0, Stay = 1, Escalate = 2 };

enum class SuspendReason {
  NewDosePending,
  EscalationConfidence,
  NoCompletedNonDLT,
  StayDeescalationRisk,
};

enum class ActionKind { DeEscalate, Stay, Escalate, Suspend, ExcludeFrom, Terminate };

struct Action {
  ActionKind kind = ActionKind::Stay;
  std::optional<SuspendReason> reason;  // set iff kind == Suspend
  int dose = 0;                         // set for ExcludeFrom

  static Action from_move(Move m);
  static Action suspend(SuspendReason r) { return {ActionKind::Suspend, r, 0}; }
  static Action exclude_from(int dose) { return {ActionKind::ExcludeFrom, std::nullopt, dose}; }
  static Action terminate() { return {ActionKind::Terminate, std::nullopt, 0}; }

  bool is_move() const {
    return kind == ActionKind::DeEscalate || kind == ActionKind::Stay ||
           kind == ActionKind::Escalate;
  }
  Move move() const;

  bool operator==(const Action&) const = default;
};

std::string to_string(Move m);
std::string to_string(SuspendReason r);
std::string to_string(ActionKind k);
std::string to_string(const Action& a);
Move move_from_string(const std::string& s);
SuspendReason suspend_reason_from_string(const std::string& s);

// Whether the decided dose sits at the bottom or top of the admissible range.
struct DoseBounds {
  bool lowest = false;
  bool highest = false;
};

enum class BurdenZone { Below, Inside, Above };

// Inside means within [TTB - e1, TTB + e2] (with a 1e-12 slack for round-off).
BurdenZone classify_burden(double tb, const DesignConfig& config);

Move stage1_decision(const CategoryCounts& counts, const DesignConfig& config, DoseBounds bounds);
Move stage1_decision(std::span<const OrdinalCategory> categories, const DesignConfig& config,
                     DoseBounds bounds);

struct DecisionDistribution;

struct DoseActivity {
  int pending = 0;                // J_d
  int completed = 0;              // |C_d|
  int completed_without_dlt = 0;  // completed in category 1 or 2
};

// Applies the pending-outcome suspension rules to the optimal move.
Action apply_suspension(Move optimal, const DecisionDistribution& dist, const DoseActivity& dose,
                        const DesignConfig& config);

// Pr(p > target) under Beta(1 + n_dlt, 1 + n - n_dlt).
double beta_tail(int n_dlt, int n, double target);

struct DoseTally {
  int n = 0;
  int n_dlt = 0;
};

// Terminate, or ExcludeFrom(lowest violating dose), or nothing.
std::vector<Action> safety_check(std::span<const DoseTally> per_dose, const DesignConfig& config);

// Weighted isotonic (nondecreasing) regression by pool-adjacent-violators.
std::vector<double> pava(std::span<const double> values, std::span<const double> weights);

struct MtdResult {
  enum class Reason { Selected, AllTooToxic };
  std::optional<int> selected;
  std::vector<double> tb_posterior;  // per dose, before the isotonic step
  std::vector<double> tb_isotonic;   // per dose; untested doses carry NaN
  Reason reason = Reason::Selected;
};

// Selection from per-dose posterior-mean burdens.
MtdResult select_mtd_from_burden(std::span<const double> tb, std::span<const int> n_per_dose,
                                 const DesignConfig& config);

MtdResult select_mtd(const PosteriorDraws& draws, std::span<const int> n_per_dose,
                     const DesignConfig& config);

std::vector<int> true_mtd_set(std::span<const double> scenario_tb, const DesignConfig& config);

}  // namespace podbin
