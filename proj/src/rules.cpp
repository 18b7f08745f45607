#include "podbin/rules.hpp"

#include <cmath>
#include <limits>

#include <boost/math/special_functions/beta.hpp>

#include "podbin/predictive.hpp"
#include "podbin/sampler.hpp"

namespace podbin {

namespace {
constexpr double kZoneSlack = 1e-12;
}

Action Action::from_move(Move m) {
  switch (m) {
    case Move::DeEscalate: return {ActionKind::DeEscalate, std::nullopt, 0};
    case Move::Stay: return {ActionKind::Stay, std::nullopt, 0};
    case Move::Escalate: return {ActionKind::Escalate, std::nullopt, 0};
  }
  return {};
}

Move Action::move() const {
  switch (kind) {
    case ActionKind::DeEscalate: return Move::DeEscalate;
    case ActionKind::Stay: return Move::Stay;
    case ActionKind::Escalate: return Move::Escalate;
    default: throw DomainError("action is not a dose move: " + to_string(kind));
  }
}

std::string to_string(Move m) {
  switch (m) {
    case Move::DeEscalate: return "DeEscalate";
    case Move::Stay: return "Stay";
    case Move::Escalate: return "Escalate";
  }
  return "?";
}

std::string to_string(SuspendReason r) {
  switch (r) {
    case SuspendReason::NewDosePending: return "NewDosePending";
    case SuspendReason::EscalationConfidence: return "EscalationConfidence";
    case SuspendReason::NoCompletedNonDLT: return "NoCompletedNonDLT";
    case SuspendReason::StayDeescalationRisk: return "StayDeescalationRisk";
  }
  return "?";
}

std::string to_string(ActionKind k) {
  switch (k) {
    case ActionKind::DeEscalate: return "DeEscalate";
    case ActionKind::Stay: return "Stay";
    case ActionKind::Escalate: return "Escalate";
    case ActionKind::Suspend: return "Suspend";
    case ActionKind::ExcludeFrom: return "ExcludeFrom";
    case ActionKind::Terminate: return "Terminate";
  }
  return "?";
}

std::string to_string(const Action& a) {
  if (a.kind == ActionKind::Suspend && a.reason) return "Suspend(" + to_string(*a.reason) + ")";
  if (a.kind == ActionKind::ExcludeFrom) return "ExcludeFrom(" + std::to_string(a.dose) + ")";
  return to_string(a.kind);
}

Move move_from_string(const std::string& s) {
  if (s == "DeEscalate") return Move::DeEscalate;
  if (s == "Stay") return Move::Stay;
  if (s == "Escalate") return Move::Escalate;
  throw DomainError("unknown move '" + s + "'");
}

SuspendReason suspend_reason_from_string(const std::string& s) {
  for (auto r : {SuspendReason::NewDosePending, SuspendReason::EscalationConfidence,
                 SuspendReason::NoCompletedNonDLT, SuspendReason::StayDeescalationRisk}) {
    if (to_string(r) == s) return r;
  }
  throw DomainError("unknown suspension reason '" + s + "'");
}

BurdenZone classify_burden(double tb, const DesignConfig& config) {
  if (tb < config.ei_low() - kZoneSlack) return BurdenZone::Below;
  if (tb > config.ei_high() + kZoneSlack) return BurdenZone::Above;
  return BurdenZone::Inside;
}

Move stage1_decision(const CategoryCounts& counts, const DesignConfig& config, DoseBounds bounds) {
  if (counts.n <= 0) throw DomainError("stage1_decision: no patients at the current dose");
  const double r = config.severity_weight;
  Move move = Move::DeEscalate;
  switch (classify_burden(empirical_tb(counts, r), config)) {
    case BurdenZone::Below: move = Move::Escalate; break;
    case BurdenZone::Inside: move = Move::Stay; break;
    case BurdenZone::Above:
      move = classify_burden(empirical_tb_minus1(counts, r), config) == BurdenZone::Below
                 ? Move::Stay
                 : Move::DeEscalate;
      break;
  }
  if (move == Move::DeEscalate && bounds.lowest) return Move::Stay;
  if (move == Move::Escalate && bounds.highest) return Move::Stay;
  return move;
}

Move stage1_decision(std::span<const OrdinalCategory> categories, const DesignConfig& config,
                     DoseBounds bounds) {
  return stage1_decision(CategoryCounts::from(categories), config, bounds);
}

Action apply_suspension(Move optimal, const DecisionDistribution& dist, const DoseActivity& dose,
                        const DesignConfig& config) {
  if (dose.completed == 0 && dose.pending >= 3) {
    return Action::suspend(SuspendReason::NewDosePending);
  }
  if (optimal == Move::Escalate) {
    if (dist[Move::Escalate] < config.lambda_e) {
      return Action::suspend(SuspendReason::EscalationConfidence);
    }
    if (dose.completed_without_dlt == 0) return Action::suspend(SuspendReason::NoCompletedNonDLT);
  }
  if (optimal == Move::Stay && dist[Move::DeEscalate] > config.lambda_d) {
    return Action::suspend(SuspendReason::StayDeescalationRisk);
  }
  return Action::from_move(optimal);
}

double beta_tail(int n_dlt, int n, double target) {
  if (n_dlt < 0 || n < n_dlt) throw DomainError("beta_tail: need 0 <= n_dlt <= n");
  if (target <= 0.0) return 1.0;
  if (target >= 1.0) return 0.0;
  return boost::math::ibetac(1.0 + n_dlt, 1.0 + (n - n_dlt), target);
}

std::vector<Action> safety_check(std::span<const DoseTally> per_dose, const DesignConfig& config) {
  auto violated = [&](const DoseTally& t) {
    return t.n >= 3 && beta_tail(t.n_dlt, t.n, config.target_dlt) > config.safety_threshold;
  };
  if (!per_dose.empty() && violated(per_dose[0])) return {Action::terminate()};
  for (std::size_t d = 1; d < per_dose.size(); ++d) {
    if (violated(per_dose[d])) return {Action::exclude_from(static_cast<int>(d) + 1)};
  }
  return {};
}

std::vector<double> pava(std::span<const double> values, std::span<const double> weights) {
  if (values.size() != weights.size()) throw DomainError("pava: length mismatch");
  struct Block {
    double mean;
    double weight;
    std::size_t count;
  };
  std::vector<Block> blocks;
  blocks.reserve(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (weights[i] < 0) throw DomainError("pava: negative weight");
    blocks.push_back({values[i], weights[i], 1});
    while (blocks.size() > 1) {
      auto& last = blocks[blocks.size() - 1];
      auto& prev = blocks[blocks.size() - 2];
      if (prev.mean <= last.mean) break;
      const double w = prev.weight + last.weight;
      // A zero-weight block takes its neighbour's level.
      prev.mean = w > 0 ? (prev.mean * prev.weight + last.mean * last.weight) / w
                        : 0.5 * (prev.mean + last.mean);
      prev.weight = w;
      prev.count += last.count;
      blocks.pop_back();
    }
  }
  std::vector<double> out;
  out.reserve(values.size());
  for (const auto& b : blocks) out.insert(out.end(), b.count, b.mean);
  return out;
}

MtdResult select_mtd_from_burden(std::span<const double> tb, std::span<const int> n_per_dose,
                                 const DesignConfig& config) {
  if (tb.size() != n_per_dose.size()) throw DomainError("select_mtd: length mismatch");
  MtdResult result;
  result.tb_posterior.assign(tb.begin(), tb.end());
  result.tb_isotonic.assign(tb.size(), std::numeric_limits<double>::quiet_NaN());

  std::vector<double> values, weights;
  std::vector<std::size_t> tested;
  for (std::size_t d = 0; d < tb.size(); ++d) {
    if (n_per_dose[d] > 0) {
      tested.push_back(d);
      values.push_back(tb[d]);
      weights.push_back(n_per_dose[d]);
    }
  }
  if (tested.empty()) throw DomainError("select_mtd: no dose has been administered");
  const auto fitted = pava(values, weights);

  double best = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < tested.size(); ++i) {
    result.tb_isotonic[tested[i]] = fitted[i];
    const double distance = std::abs(fitted[i] - config.ttb());
    if (distance < best) {
      best = distance;
      result.selected = static_cast<int>(tested[i]) + 1;
    }
  }
  result.reason = MtdResult::Reason::Selected;
  return result;
}

MtdResult select_mtd(const PosteriorDraws& draws, std::span<const int> n_per_dose,
                     const DesignConfig& config) {
  std::vector<double> tb(n_per_dose.size());
  for (std::size_t d = 0; d < tb.size(); ++d) {
    tb[d] = toxicity_burden(posterior_mean_probs(draws, static_cast<int>(d) + 1),
                            config.severity_weight);
  }
  return select_mtd_from_burden(tb, n_per_dose, config);
}

std::vector<int> true_mtd_set(std::span<const double> scenario_tb, const DesignConfig& config) {
  std::vector<int> set;
  for (std::size_t d = 0; d < scenario_tb.size(); ++d) {
    if (classify_burden(scenario_tb[d], config) == BurdenZone::Inside) {
      set.push_back(static_cast<int>(d) + 1);
    }
  }
  if (!set.empty()) return set;
  for (std::size_t d = scenario_tb.size(); d-- > 0;) {
    if (scenario_tb[d] < config.ttb()) return {static_cast<int>(d) + 1};
  }
  return {};
}

}  // namespace podbin
