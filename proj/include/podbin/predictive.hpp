#pragma once

// Posterior-predictive completion of pending patients and the probability
// of each dose decision.

#include <array>
#include <span>
#include <vector>

#include "podbin/core_model.hpp"
#include "podbin/rules.hpp"
#include "podbin/sampler.hpp"

namespace podbin {

struct Completion {
  ProbVector4<double> probs = ProbVector4<double>::Zero();
  int skipped_draws = 0;
};

// Predictive law of a pending patient's final category, averaged over draws.
Completion predictive_completion(const PosteriorDraws& draws, const PatientRecord& patient,
                                 double window);

// Joint law of the counts added by the pending patients:
//   mt   - completions with MT (categories 2, 4)
//   dlt  - completions with DLT (categories 3, 4)
//   mask - bit c-1 set when some completion is category c, c in {1, 2, 3}
// The mask is what the delete-one rule needs to find the least severe patient.
class CountDistribution {
 public:
  explicit CountDistribution(int pending);

  int pending() const { return pending_; }
  double& at(int mt, int dlt, int mask) { return mass_[index(mt, dlt, mask)]; }
  double at(int mt, int dlt, int mask) const { return mass_[index(mt, dlt, mask)]; }

  // Marginal over the flag: (mt, dlt) -> probability.
  Eigen::MatrixXd counts_marginal() const;

  template <typename Fn>
  void for_each_support(Fn&& fn) const {
    for (int a = 0; a <= pending_; ++a)
      for (int b = 0; b <= pending_; ++b)
        for (int m = 0; m < 8; ++m) {
          const double p = mass_[index(a, b, m)];
          if (p > 0.0) fn(a, b, m, p);
        }
  }

 private:
  std::size_t index(int mt, int dlt, int mask) const {
    return (static_cast<std::size_t>(mt) * (pending_ + 1) + dlt) * 8 + mask;
  }
  int pending_;
  std::vector<double> mass_;
};

CountDistribution pending_count_distribution(std::span<const ProbVector4<double>> completions);

struct DecisionDistribution {
  // Indexed by Move: DeEscalate, Stay, Escalate.
  std::array<double, 3> prob{0.0, 0.0, 0.0};
  Move optimal = Move::Stay;

  double operator[](Move m) const { return prob[static_cast<int>(m)]; }
};

// Argmax with ties resolved toward the safer move.
Move optimal_decision(const std::array<double, 3>& prob);

DecisionDistribution degenerate_distribution(Move move);

DecisionDistribution decision_distribution(const CountDistribution& counts,
                                           std::span<const OrdinalCategory> completed,
                                           const DesignConfig& config, DoseBounds bounds);

}  // namespace podbin
