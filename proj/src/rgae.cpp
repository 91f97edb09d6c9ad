#include "rgae/rgae.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace rgae {

RgaeModel::RgaeModel(GaeParams g, GruParams r) : gae(std::move(g)), gru(std::move(r)) { validate(); }

RgaeModel RgaeModel::create(GaeParams gae, int hidden, Rng& rng) {
  const int k = gae.shape.mappings;
  GruParams gru = GruParams::random(k, hidden, k, rng);
  return RgaeModel(std::move(gae), std::move(gru));
}

void RgaeModel::validate() const {
  gae.validate();
  gru.validate();
  if (gru.input_size != gae.shape.mappings || gru.output_size != gae.shape.mappings)
    throw std::invalid_argument("RGAE: GRU input/output size must equal the GAE mapping size");
}

std::vector<TensorView> RgaeModel::tensors() {
  auto out = gae.tensors("gae/");
  for (auto& t : gru.tensors("gru/")) out.push_back(std::move(t));
  return out;
}

std::unique_ptr<PredictorState> RgaeModel::start() const { return std::make_unique<RgaeState>(*this); }

RgaeState::RgaeState(const RgaeModel& model)
    : model_(model),
      window_(static_cast<std::size_t>(model.gae.shape.context)),
      h_(Vector::Zero(model.gru.hidden)) {}

Vector RgaeState::observe(const Frame& frame) {
  const auto& gae = model_.gae;
  mapping_ = infer_mapping(gae, window_, frame);
  h_ = gru_step(model_.gru, mapping_, h_);
  window_.erase(window_.begin());
  window_.push_back(frame);
  const Vector predicted = softplus(Vector(model_.gru.uo * h_));
  return reconstruct(gae, window_, predicted, OutputKind::kSoftmax);
}

std::vector<Vector> rgae_forward(const RgaeModel& model, const FrameSequence& seq) {
  if (seq.size() < 2) throw std::invalid_argument("rgae_forward: sequence needs at least 2 frames");
  return predict_sequence(model, seq);
}

std::vector<Vector> rgae_hidden_trajectory(const RgaeModel& model, const FrameSequence& seq) {
  RgaeState state(model);
  std::vector<Vector> out;
  for (std::size_t t = 0; t + 1 < seq.size(); ++t) {
    state.observe(seq.frames[t]);
    out.push_back(state.hidden());
  }
  return out;
}

// ---------------------------------------------------------------------------

namespace {

Matrix one_hot_residual(const Matrix& probs, const SequenceBatch& batch, std::size_t t, double scale) {
  Matrix d = probs;
  for (std::size_t b = 0; b < batch.targets.size(); ++b) {
    const auto col = static_cast<Eigen::Index>(b);
    const int target = batch.targets[b][t];
    if (target < 0) {
      d.col(col).setZero();
    } else {
      d(target, col) -= 1.0;
      d.col(col) *= scale;
    }
  }
  return d;
}

}  // namespace

BatchLoss rgae_batch_loss(const RgaeModel& model, const SequenceBatch& batch,
                          const std::vector<std::vector<SparseColumn>>& windows, TrainMode mode, RgaeModel* grad) {
  const std::size_t steps = batch.steps;
  const std::size_t width = batch.frames.size();
  BatchLoss loss;
  if (steps < 2) return loss;
  if (windows.size() < steps) throw std::invalid_argument("rgae_batch_loss: missing context windows");
  const auto& gae = model.gae;
  const auto& gru = model.gru;
  const bool finetune = grad != nullptr && mode == TrainMode::kFinetune;
  const auto cols = static_cast<Eigen::Index>(width);

  std::vector<Matrix> fq(steps);
  for (std::size_t t = 0; t < steps; ++t) fq[t] = project_columns(gae.q, windows[t]);

  const std::size_t n_steps = steps - 1;
  std::vector<std::vector<SparseColumn>> inputs(n_steps, std::vector<SparseColumn>(width));
  std::vector<Matrix> fv(n_steps), factors(n_steps), pre(n_steps), maps(n_steps);
  std::vector<Matrix> hidden(n_steps), out_pre(n_steps), predicted(n_steps), gate(n_steps), prod(n_steps),
      probs(n_steps);
  std::vector<GruStepCache> caches(n_steps);

  Matrix h = Matrix::Zero(gru.hidden, cols);
  for (std::size_t t = 0; t < n_steps; ++t) {
    for (std::size_t b = 0; b < width; ++b) inputs[t][b] = to_sparse(batch.frames[b][t]);
    fv[t] = project_columns(gae.v, inputs[t]);
    factors[t] = fq[t].cwiseProduct(fv[t]);
    pre[t] = gae.wm * factors[t];
    maps[t] = softplus(pre[t]);

    h = gru_forward_step(gru, gru.wz * maps[t], gru.wr * maps[t], gru.wh * maps[t], h, grad ? &caches[t] : nullptr);
    hidden[t] = h;
    out_pre[t] = gru.uo * h;
    predicted[t] = softplus(out_pre[t]);
    gate[t] = gae.wm.transpose() * predicted[t];
    prod[t] = gate[t].cwiseProduct(fq[t + 1]);
    probs[t] = softmax_columns(Matrix(gae.v.transpose() * prod[t]));

    for (std::size_t b = 0; b < width; ++b) {
      const int target = batch.targets[b][t + 1];
      if (target < 0) continue;
      loss.sum_bits -= log2_clamped(probs[t](target, static_cast<Eigen::Index>(b)));
      ++loss.events;
    }
  }
  if (!grad || loss.events == 0) return loss;

  const double scale = 1.0 / (std::numbers::ln2 * static_cast<double>(loss.events));
  std::vector<Matrix> d_fq;
  if (finetune) d_fq.assign(steps, Matrix::Zero(gae.shape.factors, cols));

  Matrix d_next = Matrix::Zero(gru.hidden, cols);
  Matrix d_prev;
  for (std::size_t t = n_steps; t-- > 0;) {
    const Matrix d_logits = one_hot_residual(probs[t], batch, t + 1, scale);
    if (finetune) grad->gae.v.noalias() += prod[t] * d_logits.transpose();
    const Matrix d_prod = gae.v * d_logits;
    const Matrix d_gate = d_prod.cwiseProduct(fq[t + 1]);
    if (finetune) {
      d_fq[t + 1] += d_prod.cwiseProduct(gate[t]);
      grad->gae.wm.noalias() += predicted[t] * d_gate.transpose();
    }
    const Matrix d_out_pre = Matrix(gae.wm * d_gate).cwiseProduct(sigmoid(out_pre[t]));
    grad->gru.uo.noalias() += d_out_pre * hidden[t].transpose();
    Matrix d_h = d_next;
    d_h.noalias() += gru.uo.transpose() * d_out_pre;

    const GruGateGrads g = gru_backward_step(gru, caches[t], d_h, grad->gru, d_prev);
    d_next = d_prev;
    grad->gru.wz.noalias() += g.dz * maps[t].transpose();
    grad->gru.wr.noalias() += g.dr * maps[t].transpose();
    grad->gru.wh.noalias() += g.dh * maps[t].transpose();

    if (finetune) {
      Matrix d_map = gru.wz.transpose() * g.dz;
      d_map.noalias() += gru.wr.transpose() * g.dr;
      d_map.noalias() += gru.wh.transpose() * g.dh;
      const Matrix d_pre = d_map.cwiseProduct(sigmoid(pre[t]));
      grad->gae.wm.noalias() += d_pre * factors[t].transpose();
      const Matrix d_factors = gae.wm.transpose() * d_pre;
      d_fq[t] += d_factors.cwiseProduct(fv[t]);
      accumulate_columns(grad->gae.v, d_factors.cwiseProduct(fq[t]), inputs[t]);
    }
  }
  if (finetune)
    for (std::size_t t = 0; t < steps; ++t) accumulate_columns(grad->gae.q, d_fq[t], windows[t]);
  return loss;
}

// ---------------------------------------------------------------------------

RgaeOptimizer make_rgae_optimizer(RgaeModel& model, const TrainConfig& config) {
  RgaeOptimizer opt;
  auto gru_t = model.gru.tensors();
  opt.gru = RmsPropState(config.rmsprop, gru_t);
  return opt;
}

std::vector<double> train_rgae(RgaeModel& model, const Corpus& corpus, const TrainConfig& config,
                               RgaeOptimizer& optimizer, int first_epoch, const EpochCallback& on_epoch) {
  config.validate();
  model.validate();
  require_monophonic(corpus, model.alphabet());
  const LrSchedule schedule(config.learning_rate, config.epochs);
  const int finetune_from = config.epochs - config.finetune_epochs;
  const int n = model.gae.shape.context;

  std::vector<double> trace;
  for (int epoch = first_epoch; epoch < config.epochs; ++epoch) {
    Rng rng = Rng::derive(config.seed, "rgae-train", static_cast<std::uint64_t>(epoch));
    const TrainMode mode = epoch >= finetune_from ? TrainMode::kFinetune : TrainMode::kFrozenGae;
    if (mode == TrainMode::kFinetune && !optimizer.has_gae) {
      auto gae_t = model.gae.tensors();
      optimizer.gae = RmsPropState(config.rmsprop, gae_t);
      optimizer.has_gae = true;
    }
    const double rate = schedule.rate(epoch);
    double sum = 0.0;
    std::size_t events = 0;
    for (const auto& indices : make_length_batches(corpus, config.batch_size, rng)) {
      const int delta =
          config.augment_transpose ? static_cast<int>(rng.uniform_int(config.delta_min, config.delta_max)) : 0;
      const SequenceBatch batch = make_sequence_batch(corpus, indices, delta);
      const auto windows = window_columns(batch, n, 0, batch.steps, config.dropout, &rng);

      RgaeModel grad(GaeParams::zeros(model.gae.shape),
                     GruParams::zeros(model.gru.input_size, model.gru.hidden, model.gru.output_size));
      const BatchLoss loss = rgae_batch_loss(model, batch, windows, mode, &grad);
      if (!std::isfinite(loss.sum_bits)) throw std::runtime_error("RGAE training diverged (non-finite loss)");
      sum += loss.sum_bits;
      events += loss.events;
      if (loss.events == 0) continue;

      auto gru_p = model.gru.tensors();
      auto gru_g = grad.gru.tensors();
      if (mode == TrainMode::kFinetune) {
        auto gae_p = model.gae.tensors();
        auto gae_g = grad.gae.tensors();
        std::vector<TensorView> all_g = gru_g;
        all_g.insert(all_g.end(), gae_g.begin(), gae_g.end());
        clip_global_norm(all_g, config.grad_clip);
        rmsprop_step(gae_p, gae_g, optimizer.gae, rate);
        quantize_f32(gae_p);
        quantize_f32(optimizer.gae);
      } else {
        clip_global_norm(gru_g, config.grad_clip);
      }
      rmsprop_step(gru_p, gru_g, optimizer.gru, rate);
      quantize_f32(gru_p);
      quantize_f32(optimizer.gru);
    }
    const double mean = events ? sum / static_cast<double>(events) : 0.0;
    trace.push_back(mean);
    if (on_epoch) on_epoch(epoch, mean, rate);
  }
  return trace;
}

}  // namespace rgae
