#include "podbin/predictive.hpp"

namespace podbin {

Completion predictive_completion(const PosteriorDraws& draws, const PatientRecord& patient,
                                 double window) {
  const int k = to_index(patient.observed_category());
  const Eigen::RowVector4d w = weight_matrix(patient.follow_up, window).row(k);
  Completion out;
  int used = 0;
  for (const auto& params : draws.draws) {
    const ProbVector4<double> joint = w.transpose().cwiseProduct(category_probs(params, patient.dose));
    const double total = joint.sum();
    if (!(total > 0.0)) {
      ++out.skipped_draws;
      continue;
    }
    out.probs += joint / total;
    ++used;
  }
  if (used == 0) {
    throw DomainError("predictive_completion: observed category impossible under every draw");
  }
  out.probs /= static_cast<double>(used);
  return out;
}

CountDistribution::CountDistribution(int pending)
    : pending_(pending), mass_(static_cast<std::size_t>(pending + 1) * (pending + 1) * 8, 0.0) {
  if (pending < 0) throw DomainError("CountDistribution: negative pending count");
}

Eigen::MatrixXd CountDistribution::counts_marginal() const {
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(pending_ + 1, pending_ + 1);
  for_each_support([&](int a, int b, int, double p) { out(a, b) += p; });
  return out;
}

CountDistribution pending_count_distribution(std::span<const ProbVector4<double>> completions) {
  const int total = static_cast<int>(completions.size());
  CountDistribution dist(total);
  dist.at(0, 0, 0) = 1.0;
  for (int j = 0; j < total; ++j) {
    const auto& q = completions[j];
    CountDistribution next(total);
    dist.for_each_support([&](int a, int b, int mask, double p) {
      next.at(a, b, mask | 0b001) += p * q(0);
      next.at(a + 1, b, mask | 0b010) += p * q(1);
      next.at(a, b + 1, mask | 0b100) += p * q(2);
      next.at(a + 1, b + 1, mask) += p * q(3);
    });
    dist = std::move(next);
  }
  return dist;
}

Move optimal_decision(const std::array<double, 3>& prob) {
  Move best = Move::DeEscalate;
  for (Move m : {Move::Stay, Move::Escalate}) {
    if (prob[static_cast<int>(m)] > prob[static_cast<int>(best)]) best = m;
  }
  return best;
}

DecisionDistribution degenerate_distribution(Move move) {
  DecisionDistribution out;
  out.prob[static_cast<int>(move)] = 1.0;
  out.optimal = move;
  return out;
}

DecisionDistribution decision_distribution(const CountDistribution& counts,
                                           std::span<const OrdinalCategory> completed,
                                           const DesignConfig& config, DoseBounds bounds) {
  const CategoryCounts base = CategoryCounts::from(completed);
  const int pending = counts.pending();
  DecisionDistribution out;
  counts.for_each_support([&](int a, int b, int mask, double p) {
    CategoryCounts full = base;
    full.n += pending;
    full.n_mt += a;
    full.n_dlt += b;
    if (pending > 0) {
      int least = 4;
      for (int c = 1; c <= 3; ++c) {
        if (mask & (1 << (c - 1))) {
          least = c;
          break;
        }
      }
      full.least_severe = std::min(full.least_severe, least);
    }
    out.prob[static_cast<int>(stage1_decision(full, config, bounds))] += p;
  });
  out.optimal = optimal_decision(out.prob);
  return out;
}

}  // namespace podbin
