#include "rgae/baseline.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

#include "rgae/gae.hpp"

namespace rgae {

BaselineModel::BaselineModel(int w, int alphabet, GruParams params)
    : window(w), alphabet_size(alphabet), gru(std::move(params)) {
  validate();
}

BaselineModel BaselineModel::create(int window, int alphabet, int hidden, Rng& rng) {
  return BaselineModel(window, alphabet, GruParams::random(window * alphabet, hidden, alphabet, rng));
}

void BaselineModel::validate() const {
  if (window <= 0 || alphabet_size <= 0) throw std::invalid_argument("baseline window and alphabet must be positive");
  gru.validate();
  if (gru.input_size != window * alphabet_size || gru.output_size != alphabet_size)
    throw std::invalid_argument("baseline GRU sizes do not match window * M inputs and M outputs");
}

std::unique_ptr<PredictorState> BaselineModel::start() const { return std::make_unique<BaselineState>(*this); }

BaselineState::BaselineState(const BaselineModel& model)
    : model_(model), window_(static_cast<std::size_t>(model.window)), h_(Vector::Zero(model.gru.hidden)) {}

Vector BaselineState::observe(const Frame& frame) {
  for (int p : frame)
    if (p < 0 || p >= model_.alphabet_size) throw std::invalid_argument("frame pitch outside alphabet");
  window_.erase(window_.begin());
  window_.push_back(frame);
  const SparseColumn x = flatten_window(window_, model_.alphabet_size);
  const auto& g = model_.gru;
  // Same cell as gru_step, with sparse input projections.
  const Vector z = sigmoid(Vector(project(g.wz, x) + g.uz * h_ + g.bz));
  const Vector r = sigmoid(Vector(project(g.wr, x) + g.ur * h_ + g.br));
  const Vector c = tanh(Vector(project(g.wh, x) + g.uh * r.cwiseProduct(h_) + g.bh));
  h_ = z.cwiseProduct(h_) + (Vector::Ones(g.hidden) - z).cwiseProduct(c);
  return softmax(Vector(g.uo * h_));
}

std::vector<Vector> rnn_forward(const BaselineModel& model, const FrameSequence& seq) {
  if (seq.size() < 2) throw std::invalid_argument("rnn_forward: sequence needs at least 2 frames");
  return predict_sequence(model, seq);
}

BatchLoss rnn_batch_loss(const BaselineModel& model, const SequenceBatch& batch,
                         const std::vector<std::vector<SparseColumn>>& inputs, GruParams* grad) {
  const std::size_t steps = batch.steps;
  const std::size_t width = batch.frames.size();
  BatchLoss loss;
  if (steps < 2) return loss;
  const std::size_t n_steps = steps - 1;
  if (inputs.size() < n_steps) throw std::invalid_argument("rnn_batch_loss: missing input windows");
  const auto& gru = model.gru;
  const auto cols = static_cast<Eigen::Index>(width);

  std::vector<GruStepCache> caches(n_steps);
  std::vector<Matrix> hidden(n_steps), probs(n_steps);
  Matrix h = Matrix::Zero(gru.hidden, cols);
  for (std::size_t t = 0; t < n_steps; ++t) {
    h = gru_forward_step(gru, project_columns(gru.wz, inputs[t]), project_columns(gru.wr, inputs[t]),
                         project_columns(gru.wh, inputs[t]), h, grad ? &caches[t] : nullptr);
    hidden[t] = h;
    probs[t] = softmax_columns(Matrix(gru.uo * h));
    for (std::size_t b = 0; b < width; ++b) {
      const int target = batch.targets[b][t + 1];
      if (target < 0) continue;
      loss.sum_bits -= log2_clamped(probs[t](target, static_cast<Eigen::Index>(b)));
      ++loss.events;
    }
  }
  if (!grad || loss.events == 0) return loss;

  const double scale = 1.0 / (std::numbers::ln2 * static_cast<double>(loss.events));
  Matrix d_next = Matrix::Zero(gru.hidden, cols);
  Matrix d_prev;
  for (std::size_t t = n_steps; t-- > 0;) {
    Matrix d_logits = probs[t];
    for (std::size_t b = 0; b < width; ++b) {
      const auto col = static_cast<Eigen::Index>(b);
      const int target = batch.targets[b][t + 1];
      if (target < 0) {
        d_logits.col(col).setZero();
      } else {
        d_logits(target, col) -= 1.0;
        d_logits.col(col) *= scale;
      }
    }
    grad->uo.noalias() += d_logits * hidden[t].transpose();
    Matrix d_h = d_next;
    d_h.noalias() += gru.uo.transpose() * d_logits;
    const GruGateGrads g = gru_backward_step(gru, caches[t], d_h, *grad, d_prev);
    d_next = d_prev;
    accumulate_columns(grad->wz, g.dz, inputs[t]);
    accumulate_columns(grad->wr, g.dr, inputs[t]);
    accumulate_columns(grad->wh, g.dh, inputs[t]);
  }
  return loss;
}

RmsPropState make_rnn_optimizer(BaselineModel& model, const TrainConfig& config) {
  auto t = model.gru.tensors();
  return RmsPropState(config.rmsprop, t);
}

std::vector<double> train_rnn(BaselineModel& model, const Corpus& corpus, const TrainConfig& config,
                              RmsPropState& optimizer, int first_epoch, const EpochCallback& on_epoch) {
  config.validate();
  model.validate();
  require_monophonic(corpus, model.alphabet());
  const LrSchedule schedule(config.learning_rate, config.epochs);

  std::vector<double> trace;
  for (int epoch = first_epoch; epoch < config.epochs; ++epoch) {
    Rng rng = Rng::derive(config.seed, "rnn-train", static_cast<std::uint64_t>(epoch));
    const double rate = schedule.rate(epoch);
    double sum = 0.0;
    std::size_t events = 0;
    for (const auto& indices : make_length_batches(corpus, config.batch_size, rng)) {
      const int delta =
          config.augment_transpose ? static_cast<int>(rng.uniform_int(config.delta_min, config.delta_max)) : 0;
      const SequenceBatch batch = make_sequence_batch(corpus, indices, delta);
      const auto inputs =
          window_columns(batch, model.window, 1, batch.steps > 0 ? batch.steps - 1 : 0, config.dropout, &rng);
      GruParams grad = GruParams::zeros(model.gru.input_size, model.gru.hidden, model.gru.output_size);
      const BatchLoss loss = rnn_batch_loss(model, batch, inputs, &grad);
      if (!std::isfinite(loss.sum_bits)) throw std::runtime_error("baseline training diverged (non-finite loss)");
      sum += loss.sum_bits;
      events += loss.events;
      if (loss.events == 0) continue;
      auto p = model.gru.tensors();
      auto g = grad.tensors();
      clip_global_norm(g, config.grad_clip);
      rmsprop_step(p, g, optimizer, rate);
      quantize_f32(p);
      quantize_f32(optimizer);
    }
    const double mean = events ? sum / static_cast<double>(events) : 0.0;
    trace.push_back(mean);
    if (on_epoch) on_epoch(epoch, mean, rate);
  }
  return trace;
}

}  // namespace rgae
