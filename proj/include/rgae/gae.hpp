#pragma once

#include <functional>
#include <span>
#include <utility>
#include <vector>

#include "rgae/frames.hpp"
#include "rgae/mathcore.hpp"

namespace rgae {

struct GaeShape {
  int context = 0;   // n, frames in the look-back window
  int alphabet = 0;  // M
  int factors = 0;   // F
  int mappings = 0;  // K
};

/// Gated autoencoder weights.
///   Q  : F x (n*M)  filters on the flattened context window
///   V  : F x M      filters on the target frame
///   Wm : K x F      factor-to-mapping weights
struct GaeParams {
  GaeShape shape;
  Matrix q;
  Matrix v;
  Matrix wm;

  static GaeParams zeros(const GaeShape& shape);
  static GaeParams random(const GaeShape& shape, Rng& rng);

  int input_size() const { return shape.context * shape.alphabet; }
  /// Throws std::invalid_argument if matrix shapes disagree with `shape`.
  void validate() const;
  std::vector<TensorView> tensors(const std::string& prefix = "gae/");
};

enum class OutputKind { kSigmoid, kSoftmax };

// ---------------------------------------------------------------------------
// Sparse helpers shared with the recurrent models
// ---------------------------------------------------------------------------

/// W * x for a sparse column x.
Vector project(const Matrix& w, const SparseColumn& x);
/// Column b of the result is W * cols[b].
Matrix project_columns(const Matrix& w, std::span<const SparseColumn> cols);
/// dW += d * x^T.
void accumulate_outer(Matrix& dw, const Eigen::Ref<const Vector>& d, const SparseColumn& x);
void accumulate_columns(Matrix& dw, const Matrix& d, std::span<const SparseColumn> cols);

// ---------------------------------------------------------------------------
// Inference
// ---------------------------------------------------------------------------

/// m = softplus(Wm ((Q ctx) .* (V target))). `context` must hold exactly n
/// frames (oldest first).
Vector infer_mapping(const GaeParams& params, std::span<const Frame> context, const Frame& target);

/// x~ = act(V^T ((Wm^T m) .* (Q ctx))) with act = sigmoid or softmax.
Vector reconstruct(const GaeParams& params, std::span<const Frame> context, const Vector& mapping,
                   OutputKind kind);

/// Mean binary cross-entropy in bits over the M components of one frame.
/// Reconstruction entries are clamped to [1e-12, 1 - 1e-12].
double binary_cross_entropy(const Vector& target, const Vector& recon);

// ---------------------------------------------------------------------------
// Pre-training
// ---------------------------------------------------------------------------

struct GaeRegularization {
  double sparsity_target = 0.05;
  double sparsity_weight = 0.1;
  double norm_deviation_weight = 0.01;
};

struct GaePretrainConfig {
  int epochs = 50;
  int batch_size = 64;
  int delta_min = -30;
  int delta_max = 30;
  double dropout = 0.0;
  GaeRegularization regularization;
  double norm_cap = 1.0;
  double learning_rate = 0.001;
  RmsPropConfig rmsprop;
  std::uint64_t seed = 1;

  void validate() const;
};

struct RegularizationTerms {
  double sparsity = 0.0;
  double norm_deviation = 0.0;
};

/// Sparsity: w_s * sum_k (mean_b m_kb - target)^2.
/// Norm deviation: w_n * sum_cols (|col| - mean |col|)^2 over the columns of
/// Q and over the columns of V (each matrix against its own mean).
/// `mappings` is K x B. When `grad` is given, dQ/dV receive the norm-deviation
/// gradient and `mapping_grad` (K x B) the sparsity gradient.
RegularizationTerms regularization_terms(const GaeParams& params, const Matrix& mappings,
                                         const GaeRegularization& reg, GaeParams* grad = nullptr,
                                         Matrix* mapping_grad = nullptr);

/// Rescales any column of Q or V whose L2 norm exceeds `cap` back onto the cap.
void apply_norm_cap(GaeParams& params, double cap);
double max_column_norm(const Matrix& m);

/// One context/target training pair.
struct GaePair {
  std::vector<Frame> context;
  Frame target;
};

/// A pre-training batch after dropout and transposition have been applied.
struct PreparedPretrainBatch {
  int delta = 0;
  std::vector<SparseColumn> context;          // dropout applied, unshifted
  std::vector<SparseColumn> shifted_context;  // same mask, every frame shifted by delta
  std::vector<SparseColumn> target;           // unshifted
  std::vector<Frame> shifted_target;
};

/// Applies inverted dropout (same mask for both views) and the shift.
PreparedPretrainBatch prepare_pretrain_batch(std::span<const GaePair> batch, int alphabet, int delta,
                                             double dropout, Rng& rng);

struct PretrainLoss {
  double reconstruction = 0.0;  // batch-mean binary cross-entropy, bits
  RegularizationTerms regularization;
  double total() const { return reconstruction + regularization.sparsity + regularization.norm_deviation; }
};

/// Transposition pre-training objective: mapping from the unshifted pair,
/// sigmoid reconstruction from the shifted context, cross-entropy against the
/// shifted target, plus both regularizers. Fills `grad` when non-null.
PretrainLoss pretrain_loss(const GaeParams& params, const PreparedPretrainBatch& batch,
                           const GaeRegularization& reg, GaeParams* grad = nullptr);

/// Draws delta and dropout masks from `rng`, takes one RMSProp step at `rate`,
/// re-caps column norms. Throws on an empty batch.
PretrainLoss pretrain_step(GaeParams& params, std::span<const GaePair> batch,
                           const GaePretrainConfig& config, RmsPropState& state, double rate, Rng& rng);

RmsPropState make_pretrain_state(GaeParams& params, const GaePretrainConfig& config);

/// Every (context, target) pair with t >= n from all sequences.
std::vector<GaePair> collect_pairs(const Corpus& corpus, int context);

/// Runs epochs [first_epoch, config.epochs). Returns the epoch-mean loss of
/// each epoch run. `on_epoch(epoch, mean_loss, rate)` is called after each.
std::vector<double> pretrain_gae(GaeParams& params, const Corpus& corpus, const GaePretrainConfig& config,
                                 RmsPropState& state, int first_epoch = 0,
                                 const std::function<void(int, double, double)>& on_epoch = {});

double cosine_similarity(const Vector& a, const Vector& b);

}  // namespace rgae
