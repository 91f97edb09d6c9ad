#include "rgae/gae.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace rgae {

GaeParams GaeParams::zeros(const GaeShape& shape) {
  GaeParams p;
  p.shape = shape;
  p.q = Matrix::Zero(shape.factors, shape.context * shape.alphabet);
  p.v = Matrix::Zero(shape.factors, shape.alphabet);
  p.wm = Matrix::Zero(shape.mappings, shape.factors);
  p.validate();
  return p;
}

GaeParams GaeParams::random(const GaeShape& shape, Rng& rng) {
  GaeParams p;
  p.shape = shape;
  p.q = glorot_uniform(shape.factors, shape.context * shape.alphabet, rng);
  p.v = glorot_uniform(shape.factors, shape.alphabet, rng);
  p.wm = glorot_uniform(shape.mappings, shape.factors, rng);
  quantize_f32(p.q);
  quantize_f32(p.v);
  quantize_f32(p.wm);
  p.validate();
  return p;
}

void GaeParams::validate() const {
  const auto& s = shape;
  if (s.context <= 0 || s.alphabet <= 0 || s.factors <= 0 || s.mappings <= 0)
    throw std::invalid_argument("GAE dimensions must be positive");
  if (q.rows() != s.factors || q.cols() != s.context * s.alphabet)
    throw std::invalid_argument("GAE Q has shape inconsistent with (F, n*M)");
  if (v.rows() != s.factors || v.cols() != s.alphabet)
    throw std::invalid_argument("GAE V has shape inconsistent with (F, M)");
  if (wm.rows() != s.mappings || wm.cols() != s.factors)
    throw std::invalid_argument("GAE Wm has shape inconsistent with (K, F)");
}

std::vector<TensorView> GaeParams::tensors(const std::string& prefix) {
  return {view(prefix + "Q", q), view(prefix + "V", v), view(prefix + "Wm", wm)};
}

// ---------------------------------------------------------------------------

Vector project(const Matrix& w, const SparseColumn& x) {
  Vector out = Vector::Zero(w.rows());
  for (std::size_t i = 0; i < x.nnz(); ++i) out.noalias() += x.value[i] * w.col(x.index[i]);
  return out;
}

Matrix project_columns(const Matrix& w, std::span<const SparseColumn> cols) {
  Matrix out = Matrix::Zero(w.rows(), static_cast<Eigen::Index>(cols.size()));
  for (std::size_t b = 0; b < cols.size(); ++b) {
    const auto& x = cols[b];
    auto dst = out.col(static_cast<Eigen::Index>(b));
    for (std::size_t i = 0; i < x.nnz(); ++i) dst.noalias() += x.value[i] * w.col(x.index[i]);
  }
  return out;
}

void accumulate_outer(Matrix& dw, const Eigen::Ref<const Vector>& d, const SparseColumn& x) {
  for (std::size_t i = 0; i < x.nnz(); ++i) dw.col(x.index[i]).noalias() += x.value[i] * d;
}

void accumulate_columns(Matrix& dw, const Matrix& d, std::span<const SparseColumn> cols) {
  for (std::size_t b = 0; b < cols.size(); ++b) accumulate_outer(dw, d.col(static_cast<Eigen::Index>(b)), cols[b]);
}

// ---------------------------------------------------------------------------

namespace {

void check_window(const GaeParams& params, std::span<const Frame> context) {
  if (static_cast<int>(context.size()) != params.shape.context)
    throw std::invalid_argument("context window must hold exactly n = " + std::to_string(params.shape.context) +
                                " frames, got " + std::to_string(context.size()));
  for (const Frame& f : context)
    for (int p : f)
      if (p < 0 || p >= params.shape.alphabet) throw std::invalid_argument("context pitch outside alphabet");
}

void check_frame(const GaeParams& params, const Frame& f) {
  for (int p : f)
    if (p < 0 || p >= params.shape.alphabet) throw std::invalid_argument("target pitch outside alphabet");
}

}  // namespace

Vector infer_mapping(const GaeParams& params, std::span<const Frame> context, const Frame& target) {
  check_window(params, context);
  check_frame(params, target);
  const Vector fq = project(params.q, flatten_window(context, params.shape.alphabet));
  const Vector fv = project(params.v, to_sparse(target));
  return softplus(Vector(params.wm * fq.cwiseProduct(fv)));
}

Vector reconstruct(const GaeParams& params, std::span<const Frame> context, const Vector& mapping,
                   OutputKind kind) {
  check_window(params, context);
  if (mapping.size() != params.shape.mappings)
    throw std::invalid_argument("mapping size must equal K = " + std::to_string(params.shape.mappings));
  const Vector fq = project(params.q, flatten_window(context, params.shape.alphabet));
  const Vector logits = params.v.transpose() * (params.wm.transpose() * mapping).cwiseProduct(fq);
  return kind == OutputKind::kSigmoid ? sigmoid(logits) : softmax(logits);
}

double binary_cross_entropy(const Vector& target, const Vector& recon) {
  if (target.size() != recon.size() || target.size() == 0)
    throw std::invalid_argument("binary_cross_entropy: size mismatch");
  double sum = 0.0;
  for (Eigen::Index i = 0; i < target.size(); ++i) {
    const double r = std::clamp(recon(i), kLogFloor, 1.0 - kLogFloor);
    sum += target(i) * std::log2(r) + (1.0 - target(i)) * std::log2(1.0 - r);
  }
  return -sum / static_cast<double>(target.size());
}

// ---------------------------------------------------------------------------

void GaePretrainConfig::validate() const {
  if (epochs <= 0) throw std::invalid_argument("GAE epochs must be positive");
  if (batch_size <= 0) throw std::invalid_argument("GAE batch size must be positive");
  if (delta_min > delta_max) throw std::invalid_argument("delta range is empty");
  if (delta_min != -delta_max) throw std::invalid_argument("delta range must be symmetric around 0");
  if (!(dropout >= 0.0 && dropout < 1.0)) throw std::invalid_argument("dropout must be in [0, 1)");
  if (!(norm_cap > 0.0)) throw std::invalid_argument("norm cap must be positive");
  if (!(learning_rate > 0.0)) throw std::invalid_argument("learning rate must be positive");
}

namespace {

double column_norm_deviation(const Matrix& w, double weight, Matrix* grad) {
  if (w.cols() == 0) return 0.0;
  const Vector norms = w.colwise().norm().transpose();
  const double mean = norms.mean();
  double penalty = 0.0;
  for (Eigen::Index j = 0; j < w.cols(); ++j) {
    const double dev = norms(j) - mean;
    penalty += dev * dev;
    // The mean's own derivative cancels because the deviations sum to zero.
    if (grad && norms(j) > 0.0) grad->col(j) += (2.0 * weight * dev / norms(j)) * w.col(j);
  }
  return weight * penalty;
}

}  // namespace

RegularizationTerms regularization_terms(const GaeParams& params, const Matrix& mappings,
                                         const GaeRegularization& reg, GaeParams* grad, Matrix* mapping_grad) {
  RegularizationTerms terms;
  if (mappings.cols() > 0) {
    const Vector mean = mappings.rowwise().mean();
    const Vector dev = mean.array() - reg.sparsity_target;
    terms.sparsity = reg.sparsity_weight * dev.squaredNorm();
    if (mapping_grad) {
      const Vector g = (2.0 * reg.sparsity_weight / static_cast<double>(mappings.cols())) * dev;
      mapping_grad->colwise() += g;
    }
  }
  terms.norm_deviation = column_norm_deviation(params.q, reg.norm_deviation_weight, grad ? &grad->q : nullptr) +
                         column_norm_deviation(params.v, reg.norm_deviation_weight, grad ? &grad->v : nullptr);
  return terms;
}

double max_column_norm(const Matrix& m) { return m.cols() == 0 ? 0.0 : m.colwise().norm().maxCoeff(); }

namespace {

void cap_columns(Matrix& w, double cap) {
  for (Eigen::Index j = 0; j < w.cols(); ++j) {
    const double norm = w.col(j).norm();
    if (norm > cap) {
      w.col(j) *= cap / norm;
      // Rounding toward zero keeps the stored float32 column on or inside the cap.
      for (Eigen::Index i = 0; i < w.rows(); ++i) w(i, j) = round_f32_toward_zero(w(i, j));
    }
  }
}

}  // namespace

void apply_norm_cap(GaeParams& params, double cap) {
  cap_columns(params.q, cap);
  cap_columns(params.v, cap);
}

// ---------------------------------------------------------------------------

PreparedPretrainBatch prepare_pretrain_batch(std::span<const GaePair> batch, int alphabet, int delta,
                                             double dropout, Rng& rng) {
  PreparedPretrainBatch out;
  out.delta = delta;
  const double keep_scale = 1.0 / (1.0 - dropout);
  for (const GaePair& pair : batch) {
    SparseColumn ctx;
    SparseColumn shifted;
    for (std::size_t j = 0; j < pair.context.size(); ++j) {
      const int base = static_cast<int>(j) * alphabet;
      for (int p : pair.context[j]) {
        double value = 1.0;
        if (dropout > 0.0) {
          if (rng.bernoulli(dropout)) continue;
          value = keep_scale;
        }
        ctx.push(base + p, value);
        shifted.push(base + wrap_pitch(static_cast<long long>(p) - delta, alphabet), value);
      }
    }
    out.context.push_back(std::move(ctx));
    out.shifted_context.push_back(std::move(shifted));
    out.target.push_back(to_sparse(pair.target));
    out.shifted_target.push_back(shift(pair.target, delta, alphabet));
  }
  return out;
}

PretrainLoss pretrain_loss(const GaeParams& params, const PreparedPretrainBatch& batch,
                           const GaeRegularization& reg, GaeParams* grad) {
  const auto b = static_cast<Eigen::Index>(batch.context.size());
  if (b == 0) throw std::invalid_argument("pre-training batch is empty");
  const int alphabet = params.shape.alphabet;

  const Matrix fq = project_columns(params.q, batch.context);
  const Matrix fv = project_columns(params.v, batch.target);
  const Matrix factors = fq.cwiseProduct(fv);
  const Matrix pre = params.wm * factors;
  const Matrix mappings = softplus(pre);

  const Matrix fq_shift = project_columns(params.q, batch.shifted_context);
  const Matrix gate = params.wm.transpose() * mappings;
  const Matrix prod = gate.cwiseProduct(fq_shift);
  const Matrix recon = sigmoid(Matrix(params.v.transpose() * prod));

  Matrix targets = Matrix::Zero(alphabet, b);
  for (Eigen::Index c = 0; c < b; ++c)
    for (int p : batch.shifted_target[static_cast<std::size_t>(c)]) targets(p, c) = 1.0;

  PretrainLoss loss;
  for (Eigen::Index c = 0; c < b; ++c)
    loss.reconstruction += binary_cross_entropy(targets.col(c), recon.col(c));
  loss.reconstruction /= static_cast<double>(b);

  Matrix d_mappings = Matrix::Zero(mappings.rows(), b);
  loss.regularization = regularization_terms(params, mappings, reg, grad, grad ? &d_mappings : nullptr);
  if (!grad) return loss;

  const double scale = 1.0 / (static_cast<double>(alphabet) * std::numbers::ln2 * static_cast<double>(b));
  const Matrix d_logits = (recon - targets) * scale;
  grad->v.noalias() += prod * d_logits.transpose();
  const Matrix d_prod = params.v * d_logits;
  const Matrix d_gate = d_prod.cwiseProduct(fq_shift);
  accumulate_columns(grad->q, d_prod.cwiseProduct(gate), batch.shifted_context);
  d_mappings.noalias() += params.wm * d_gate;
  grad->wm.noalias() += mappings * d_gate.transpose();

  const Matrix d_pre = d_mappings.cwiseProduct(sigmoid(pre));
  grad->wm.noalias() += d_pre * factors.transpose();
  const Matrix d_factors = params.wm.transpose() * d_pre;
  accumulate_columns(grad->q, d_factors.cwiseProduct(fv), batch.context);
  accumulate_columns(grad->v, d_factors.cwiseProduct(fq), batch.target);
  return loss;
}

RmsPropState make_pretrain_state(GaeParams& params, const GaePretrainConfig& config) {
  auto t = params.tensors();
  return RmsPropState(config.rmsprop, t);
}

PretrainLoss pretrain_step(GaeParams& params, std::span<const GaePair> batch, const GaePretrainConfig& config,
                           RmsPropState& state, double rate, Rng& rng) {
  if (batch.empty()) throw std::invalid_argument("pre-training batch is empty");
  const int delta = static_cast<int>(rng.uniform_int(config.delta_min, config.delta_max));
  const auto prepared = prepare_pretrain_batch(batch, params.shape.alphabet, delta, config.dropout, rng);

  GaeParams grad = GaeParams::zeros(params.shape);
  const PretrainLoss loss = pretrain_loss(params, prepared, config.regularization, &grad);

  auto p = params.tensors();
  auto g = grad.tensors();
  rmsprop_step(p, g, state, rate);
  quantize_f32(p);
  quantize_f32(state);
  apply_norm_cap(params, config.norm_cap);
  return loss;
}

std::vector<GaePair> collect_pairs(const Corpus& corpus, int context) {
  std::vector<GaePair> pairs;
  for (const auto& seq : corpus) {
    for (std::size_t t = static_cast<std::size_t>(context); t < seq.size(); ++t)
      pairs.push_back(GaePair{context_window(seq, t, context), seq.frames[t]});
  }
  return pairs;
}

std::vector<double> pretrain_gae(GaeParams& params, const Corpus& corpus, const GaePretrainConfig& config,
                                 RmsPropState& state, int first_epoch,
                                 const std::function<void(int, double, double)>& on_epoch) {
  config.validate();
  params.validate();
  for (const auto& seq : corpus)
    if (seq.alphabet != params.shape.alphabet)
      throw std::invalid_argument("corpus alphabet does not match the GAE");
  std::vector<GaePair> pairs = collect_pairs(corpus, params.shape.context);
  if (pairs.empty()) throw std::invalid_argument("corpus has no sequence longer than the context window");

  const LrSchedule schedule(config.learning_rate, config.epochs);
  std::vector<double> trace;
  std::vector<std::size_t> order(pairs.size());
  for (int epoch = first_epoch; epoch < config.epochs; ++epoch) {
    Rng rng = Rng::derive(config.seed, "gae-pretrain", static_cast<std::uint64_t>(epoch));
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    rng.shuffle(order);
    const double rate = schedule.rate(epoch);
    double sum = 0.0;
    std::size_t batches = 0;
    std::vector<GaePair> batch;
    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(config.batch_size)) {
      const std::size_t end = std::min(order.size(), start + static_cast<std::size_t>(config.batch_size));
      batch.clear();
      for (std::size_t i = start; i < end; ++i) batch.push_back(pairs[order[i]]);
      const double loss = pretrain_step(params, batch, config, state, rate, rng).total();
      if (!std::isfinite(loss)) throw std::runtime_error("GAE pre-training diverged (non-finite loss)");
      sum += loss;
      ++batches;
    }
    const double mean = sum / static_cast<double>(batches);
    trace.push_back(mean);
    if (on_epoch) on_epoch(epoch, mean, rate);
  }
  return trace;
}

double cosine_similarity(const Vector& a, const Vector& b) {
  const double denom = a.norm() * b.norm();
  return denom > 0.0 ? a.dot(b) / denom : 0.0;
}

}  // namespace rgae
