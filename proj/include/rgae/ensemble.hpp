#pragma once

#include <memory>
#include <span>
#include <vector>

#include "rgae/mathcore.hpp"
#include "rgae/predictor.hpp"

namespace rgae {

struct WeightedCombineConfig {
  double bias = 0.5;             // b in w_m = H_rel(p_m)^-b
  double entropy_floor = 1e-6;   // lower clamp for the relative entropy
  double probability_floor = 1e-12;

  void validate() const;
};

/// -sum p log2 p with 0 log 0 = 0. Rejects inputs that do not sum to 1 +- 1e-6
/// or contain negative entries.
double shannon_entropy(const Vector& p);

/// H(p) / log2 |A|, clamped below at entropy_floor. Rejects |A| < 2.
double relative_entropy(const Vector& p, double entropy_floor = 1e-6);

/// Entropy-weighted geometric mean: p(a) ~ (prod_m p_m(a)^{w_m})^{1/sum w},
/// computed in log space and renormalized.
Vector combine(std::span<const Vector> dists, const WeightedCombineConfig& config = {});

/// Ensemble of sequence models over a common alphabet whose per-step
/// prediction is `combine` of the members' predictions.
class EnsembleModel final : public SequenceModel {
 public:
  EnsembleModel(std::vector<const SequenceModel*> members, WeightedCombineConfig config);

  int alphabet() const override;
  int min_primer() const override;
  std::unique_ptr<PredictorState> start() const override;

 private:
  std::vector<const SequenceModel*> members_;
  WeightedCombineConfig config_;
};

}  // namespace rgae
