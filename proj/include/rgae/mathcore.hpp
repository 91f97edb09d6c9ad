#pragma once

#include <cstdint>
#include <functional>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

namespace rgae {

// Column-major dense storage. Serialization converts to row-major.
using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Smallest argument passed to any logarithm.
inline constexpr double kLogFloor = 1e-12;

// ---------------------------------------------------------------------------
// Nonlinearities
// ---------------------------------------------------------------------------

double softplus(double x);
double sigmoid(double x);

Vector softplus(const Vector& x);
Vector sigmoid(const Vector& x);
Vector tanh(const Vector& x);
/// Numerically stable softmax (max subtraction).
Vector softmax(const Vector& x);

// Column-wise versions used by the batched training paths.
Matrix softplus(const Matrix& x);
Matrix sigmoid(const Matrix& x);
Matrix softmax_columns(const Matrix& x);

double log2_clamped(double p);

bool all_finite(const Matrix& m);
bool all_finite(const Vector& v);

// ---------------------------------------------------------------------------
// Deterministic RNG
// ---------------------------------------------------------------------------

/// Seedable generator with a portable output sequence. The engine is
/// mt19937_64 (fully specified by the standard); the distributions are
/// implemented here because the standard library ones are not portable.
class Rng {
 public:
  explicit Rng(std::uint64_t seed);

  /// Independent stream derived from a base seed, a purpose tag and an index.
  static Rng derive(std::uint64_t seed, std::string_view tag, std::uint64_t stream = 0);

  std::uint64_t next_u64() { return engine_(); }
  /// Uniform in [0, 1).
  double uniform();
  double uniform(double lo, double hi);
  /// Uniform integer in [lo, hi], inclusive.
  std::int64_t uniform_int(std::int64_t lo, std::int64_t hi);
  bool bernoulli(double p) { return uniform() < p; }

  template <class T>
  void shuffle(std::vector<T>& items) {
    for (std::size_t i = items.size(); i > 1; --i) {
      auto j = static_cast<std::size_t>(uniform_int(0, static_cast<std::int64_t>(i) - 1));
      std::swap(items[i - 1], items[j]);
    }
  }

 private:
  std::mt19937_64 engine_;
};

std::uint64_t hash_string(std::string_view s);

/// Uniform in [-s, s] with s = sqrt(6 / (rows + cols)).
Matrix glorot_uniform(Eigen::Index rows, Eigen::Index cols, Rng& rng);

// ---------------------------------------------------------------------------
// Named parameter views
// ---------------------------------------------------------------------------

/// A named, shaped view over contiguous parameter storage. Matrices have
/// rank 2 (rows, cols) and are stored column-major; vectors have rank 1.
struct TensorView {
  std::string name;
  Eigen::Index rows = 0;
  Eigen::Index cols = 1;
  int rank = 2;
  std::span<double> values;
};

TensorView view(std::string name, Matrix& m);
TensorView view(std::string name, Vector& v);

std::size_t total_size(std::span<const TensorView> tensors);
double global_norm(std::span<const TensorView> tensors);
/// Rescales all tensors so their joint L2 norm is at most max_norm.
/// Returns the norm before clipping.
double clip_global_norm(std::span<const TensorView> tensors, double max_norm);
void set_zero(std::span<const TensorView> tensors);

/// Rounds every value to the nearest float32. Parameters are kept
/// float32-representable so model files capture training state exactly.
void quantize_f32(std::span<const TensorView> tensors);
void quantize_f32(Matrix& m);
/// Rounds to float32 without increasing magnitude.
double round_f32_toward_zero(double x);

// ---------------------------------------------------------------------------
// Optimization
// ---------------------------------------------------------------------------

/// Linear decay from initial_rate at epoch 0 to exactly 0 at total_epochs.
class LrSchedule {
 public:
  LrSchedule(double initial_rate, int total_epochs);

  double rate(int epoch) const;
  double initial_rate() const { return initial_; }
  int total_epochs() const { return total_; }

 private:
  double initial_;
  int total_;
};

struct RmsPropConfig {
  double decay = 0.9;
  double epsilon = 1e-8;
};

/// Per-parameter running average of squared gradients.
struct RmsPropState {
  RmsPropConfig config;
  std::vector<std::vector<double>> accumulators;

  RmsPropState() = default;
  RmsPropState(RmsPropConfig cfg, std::span<const TensorView> shapes);

  std::vector<TensorView> views(std::string_view prefix);
};

/// acc <- decay*acc + (1-decay)*g^2 ; p <- p - rate*g/(sqrt(acc)+eps).
/// Throws std::invalid_argument on any shape mismatch.
void rmsprop_step(std::span<const TensorView> params, std::span<const TensorView> grads,
                  RmsPropState& state, double rate);

void quantize_f32(RmsPropState& state);

// ---------------------------------------------------------------------------
// Finite-difference gradient checking
// ---------------------------------------------------------------------------

struct GradCheckReport {
  double max_relative_error = 0.0;
  std::string worst_tensor;
  std::size_t worst_index = 0;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
  std::size_t checked = 0;
  bool passed = true;
};

/// Compares `analytic` against central differences of `loss` (step 1e-4)
/// for every entry of `params`. `loss` is re-evaluated with params perturbed
/// in place; each entry is restored afterwards.
GradCheckReport grad_check(const std::function<double()>& loss, std::span<const TensorView> params,
                           std::span<const TensorView> analytic, double tolerance,
                           double step = 1e-4);

}  // namespace rgae
