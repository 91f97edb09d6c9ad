#pragma once

#include <memory>
#include <vector>

#include "rgae/gru.hpp"
#include "rgae/predictor.hpp"
#include "rgae/training.hpp"

namespace rgae {

/// Absolute-pitch GRU baseline. The input at step t is the concatenation of
/// the last `window` frames up to and including x_t; the prediction for
/// x_{t+1} is softmax(Uo h_t).
struct BaselineModel final : SequenceModel {
  int window = 1;
  int alphabet_size = 0;
  GruParams gru;  // input window*M, output M

  BaselineModel() = default;
  BaselineModel(int window, int alphabet, GruParams params);

  static BaselineModel create(int window, int alphabet, int hidden, Rng& rng);

  void validate() const;
  std::vector<TensorView> tensors() { return gru.tensors("gru/"); }

  int alphabet() const override { return alphabet_size; }
  int min_primer() const override { return window; }
  std::unique_ptr<PredictorState> start() const override;
};

class BaselineState final : public PredictorState {
 public:
  explicit BaselineState(const BaselineModel& model);
  Vector observe(const Frame& frame) override;
  const Vector& hidden() const { return h_; }

 private:
  const BaselineModel& model_;
  std::vector<Frame> window_;
  Vector h_;
};

std::vector<Vector> rnn_forward(const BaselineModel& model, const FrameSequence& seq);

/// `inputs[t][b]` is the flattened input window ending at frame t.
BatchLoss rnn_batch_loss(const BaselineModel& model, const SequenceBatch& batch,
                         const std::vector<std::vector<SparseColumn>>& inputs, GruParams* grad);

RmsPropState make_rnn_optimizer(BaselineModel& model, const TrainConfig& config);

std::vector<double> train_rnn(BaselineModel& model, const Corpus& corpus, const TrainConfig& config,
                              RmsPropState& optimizer, int first_epoch = 0, const EpochCallback& on_epoch = {});

}  // namespace rgae
