#pragma once

#include <memory>
#include <string>
#include <vector>

#include "rgae/frames.hpp"
#include "rgae/mathcore.hpp"

namespace rgae {

/// Incremental prediction state. observe(x_t) consumes frame t and returns
/// the predicted distribution over the alphabet for frame t+1.
class PredictorState {
 public:
  virtual ~PredictorState() = default;
  virtual Vector observe(const Frame& frame) = 0;
};

/// Anything that predicts next-frame distributions over a pitch alphabet.
class SequenceModel {
 public:
  virtual ~SequenceModel() = default;
  virtual int alphabet() const = 0;
  /// Shortest primer accepted by continue_sequence.
  virtual int min_primer() const { return 1; }
  virtual std::unique_ptr<PredictorState> start() const = 0;
};

/// Teacher-forced predictions: element i is the distribution for frame i+1,
/// so a sequence of T frames yields T-1 distributions.
std::vector<Vector> predict_sequence(const SequenceModel& model, const FrameSequence& seq);

/// Consumes the primer with teacher forcing, then generates `steps` frames by
/// argmax, feeding each generated frame back in. Returns only the generated
/// frames. Throws if the primer is shorter than model.min_primer().
FrameSequence continue_sequence(const SequenceModel& model, const FrameSequence& primer, std::size_t steps);

/// Index of the largest entry; ties go to the lowest index.
int argmax_lowest(const Vector& v);

/// -log2 dist[target], with dist clamped below at 1e-12.
double categorical_cross_entropy(int target, const Vector& dist);

}  // namespace rgae
