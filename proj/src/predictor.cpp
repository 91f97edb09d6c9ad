#include "rgae/predictor.hpp"

#include <stdexcept>

namespace rgae {

std::vector<Vector> predict_sequence(const SequenceModel& model, const FrameSequence& seq) {
  if (seq.alphabet != model.alphabet()) throw std::invalid_argument("sequence alphabet does not match the model");
  std::vector<Vector> out;
  if (seq.size() < 2) return out;
  out.reserve(seq.size() - 1);
  auto state = model.start();
  for (std::size_t t = 0; t + 1 < seq.size(); ++t) out.push_back(state->observe(seq.frames[t]));
  return out;
}

FrameSequence continue_sequence(const SequenceModel& model, const FrameSequence& primer, std::size_t steps) {
  if (primer.alphabet != model.alphabet()) throw std::invalid_argument("primer alphabet does not match the model");
  if (primer.size() < static_cast<std::size_t>(std::max(1, model.min_primer())))
    throw std::invalid_argument("primer needs at least " + std::to_string(std::max(1, model.min_primer())) +
                                " frames, got " + std::to_string(primer.size()));
  FrameSequence out;
  out.alphabet = primer.alphabet;
  out.source_id = primer.source_id;
  out.scheme_id = primer.scheme_id;
  if (steps == 0) return out;

  auto state = model.start();
  Vector dist;
  for (const Frame& f : primer.frames) dist = state->observe(f);
  out.frames.reserve(steps);
  for (std::size_t s = 0; s < steps; ++s) {
    Frame next{argmax_lowest(dist)};
    out.frames.push_back(next);
    if (s + 1 < steps) dist = state->observe(next);
  }
  return out;
}

int argmax_lowest(const Vector& v) {
  if (v.size() == 0) throw std::invalid_argument("argmax of empty vector");
  Eigen::Index best = 0;
  for (Eigen::Index i = 1; i < v.size(); ++i)
    if (v(i) > v(best)) best = i;
  return static_cast<int>(best);
}

double categorical_cross_entropy(int target, const Vector& dist) {
  if (target < 0 || target >= dist.size()) throw std::invalid_argument("target index outside distribution");
  return -log2_clamped(dist(target));
}

}  // namespace rgae
