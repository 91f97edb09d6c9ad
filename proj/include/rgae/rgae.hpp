#pragma once

#include <memory>
#include <vector>

#include "rgae/gae.hpp"
#include "rgae/gru.hpp"
#include "rgae/predictor.hpp"
#include "rgae/training.hpp"

namespace rgae {

/// Recurrent gated autoencoder: a GRU over GAE mappings that predicts the
/// next mapping, which the GAE decoder turns into a next-frame softmax.
struct RgaeModel final : SequenceModel {
  GaeParams gae;
  GruParams gru;  // input K, output K

  RgaeModel() = default;
  RgaeModel(GaeParams g, GruParams r);

  /// Fresh GRU of `hidden` units on top of an existing GAE.
  static RgaeModel create(GaeParams gae, int hidden, Rng& rng);

  void validate() const;
  std::vector<TensorView> tensors();

  int alphabet() const override { return gae.shape.alphabet; }
  int min_primer() const override { return gae.shape.context; }
  std::unique_ptr<PredictorState> start() const override;
};

/// Streaming RGAE state. Exposes the hidden state for analysis.
class RgaeState final : public PredictorState {
 public:
  explicit RgaeState(const RgaeModel& model);
  Vector observe(const Frame& frame) override;
  const Vector& hidden() const { return h_; }
  const Vector& last_mapping() const { return mapping_; }

 private:
  const RgaeModel& model_;
  std::vector<Frame> window_;  // last n frames, oldest first
  Vector h_;
  Vector mapping_;
};

/// Teacher-forced next-frame distributions (T-1 of them).
std::vector<Vector> rgae_forward(const RgaeModel& model, const FrameSequence& seq);
/// Hidden states h_0' .. h_{T-2}' produced while predicting frames 1..T-1.
std::vector<Vector> rgae_hidden_trajectory(const RgaeModel& model, const FrameSequence& seq);

enum class TrainMode { kFrozenGae, kFinetune };

/// Summed categorical cross-entropy of a prepared batch. `windows[t]` must
/// hold the context columns for t in [0, batch.steps). When `grad` is
/// non-null it receives dL/dparams of the batch-mean loss; GAE gradients
/// are left untouched in kFrozenGae mode.
BatchLoss rgae_batch_loss(const RgaeModel& model, const SequenceBatch& batch,
                          const std::vector<std::vector<SparseColumn>>& windows, TrainMode mode,
                          RgaeModel* grad);

struct RgaeOptimizer {
  RmsPropState gru;
  RmsPropState gae;  // created when fine-tuning starts
  bool has_gae = false;
};

RgaeOptimizer make_rgae_optimizer(RgaeModel& model, const TrainConfig& config);

/// BPTT training, epochs [first_epoch, config.epochs). GAE is frozen until
/// the last `finetune_epochs` epochs. Returns epoch-mean losses (bits/event).
std::vector<double> train_rgae(RgaeModel& model, const Corpus& corpus, const TrainConfig& config,
                               RgaeOptimizer& optimizer, int first_epoch = 0, const EpochCallback& on_epoch = {});

}  // namespace rgae
