#include "rgae/ensemble.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace rgae {

void WeightedCombineConfig::validate() const {
  if (!(bias >= 0.0)) throw std::invalid_argument("ensemble bias must be non-negative");
  if (!(entropy_floor > 0.0)) throw std::invalid_argument("entropy floor must be positive");
  if (!(probability_floor > 0.0)) throw std::invalid_argument("probability floor must be positive");
}

double shannon_entropy(const Vector& p) {
  if (p.size() == 0) throw std::invalid_argument("shannon_entropy: empty distribution");
  if ((p.array() < 0.0).any()) throw std::invalid_argument("shannon_entropy: negative probability");
  if (std::abs(p.sum() - 1.0) > 1e-6) throw std::invalid_argument("shannon_entropy: distribution is not normalized");
  double h = 0.0;
  for (Eigen::Index i = 0; i < p.size(); ++i)
    if (p(i) > 0.0) h -= p(i) * std::log2(p(i));
  return std::max(h, 0.0);
}

double relative_entropy(const Vector& p, double entropy_floor) {
  if (p.size() < 2) throw std::invalid_argument("relative_entropy: alphabet must have at least 2 symbols");
  const double h_max = std::log2(static_cast<double>(p.size()));
  return std::max(shannon_entropy(p) / h_max, entropy_floor);
}

Vector combine(std::span<const Vector> dists, const WeightedCombineConfig& config) {
  config.validate();
  if (dists.empty()) throw std::invalid_argument("combine: no distributions");
  const Eigen::Index size = dists.front().size();
  for (const auto& d : dists)
    if (d.size() != size) throw std::invalid_argument("combine: alphabet mismatch between distributions");

  // Weighted geometric mean: exponents w_m / sum(w), then normalization R.
  Vector log_p = Vector::Zero(size);
  double weight_sum = 0.0;
  for (const auto& d : dists) {
    const double weight = std::pow(relative_entropy(d, config.entropy_floor), -config.bias);
    log_p += weight * d.array().max(config.probability_floor).log().matrix();
    weight_sum += weight;
  }
  return softmax(log_p / weight_sum);
}

EnsembleModel::EnsembleModel(std::vector<const SequenceModel*> members, WeightedCombineConfig config)
    : members_(std::move(members)), config_(config) {
  config_.validate();
  if (members_.empty()) throw std::invalid_argument("ensemble needs at least one member");
  for (const auto* m : members_)
    if (m->alphabet() != members_.front()->alphabet())
      throw std::invalid_argument("ensemble members have mismatched alphabets");
}

int EnsembleModel::alphabet() const { return members_.front()->alphabet(); }

int EnsembleModel::min_primer() const {
  int n = 1;
  for (const auto* m : members_) n = std::max(n, m->min_primer());
  return n;
}

namespace {

class EnsembleState final : public PredictorState {
 public:
  EnsembleState(const std::vector<const SequenceModel*>& members, const WeightedCombineConfig& config)
      : config_(config) {
    for (const auto* m : members) states_.push_back(m->start());
  }

  Vector observe(const Frame& frame) override {
    std::vector<Vector> dists;
    dists.reserve(states_.size());
    for (auto& s : states_) dists.push_back(s->observe(frame));
    return combine(dists, config_);
  }

 private:
  WeightedCombineConfig config_;
  std::vector<std::unique_ptr<PredictorState>> states_;
};

}  // namespace

std::unique_ptr<PredictorState> EnsembleModel::start() const {
  return std::make_unique<EnsembleState>(members_, config_);
}

}  // namespace rgae
