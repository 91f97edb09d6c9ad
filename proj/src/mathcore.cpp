#include "rgae/mathcore.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace rgae {

double softplus(double x) { return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x))); }

double sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

Vector softplus(const Vector& x) { return x.unaryExpr([](double v) { return softplus(v); }); }
Vector sigmoid(const Vector& x) { return x.unaryExpr([](double v) { return sigmoid(v); }); }
Vector tanh(const Vector& x) { return x.array().tanh().matrix(); }

Vector softmax(const Vector& x) {
  Vector e = (x.array() - x.maxCoeff()).exp().matrix();
  return e / e.sum();
}

Matrix softplus(const Matrix& x) { return x.unaryExpr([](double v) { return softplus(v); }); }
Matrix sigmoid(const Matrix& x) { return x.unaryExpr([](double v) { return sigmoid(v); }); }

Matrix softmax_columns(const Matrix& x) {
  Matrix out(x.rows(), x.cols());
  for (Eigen::Index c = 0; c < x.cols(); ++c) {
    auto e = (x.col(c).array() - x.col(c).maxCoeff()).exp();
    out.col(c) = (e / e.sum()).matrix();
  }
  return out;
}

double log2_clamped(double p) { return std::log2(std::max(p, kLogFloor)); }

bool all_finite(const Matrix& m) { return m.allFinite(); }
bool all_finite(const Vector& v) { return v.allFinite(); }

// ---------------------------------------------------------------------------

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

}  // namespace

std::uint64_t hash_string(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

Rng::Rng(std::uint64_t seed) : engine_(splitmix64(seed)) {}

Rng Rng::derive(std::uint64_t seed, std::string_view tag, std::uint64_t stream) {
  return Rng(splitmix64(seed ^ splitmix64(hash_string(tag) + splitmix64(stream))));
}

double Rng::uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

double Rng::uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

std::int64_t Rng::uniform_int(std::int64_t lo, std::int64_t hi) {
  if (hi < lo) throw std::invalid_argument("uniform_int: empty range");
  const std::uint64_t range = static_cast<std::uint64_t>(hi - lo) + 1;
  if (range == 0) return static_cast<std::int64_t>(engine_());
  const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                              std::numeric_limits<std::uint64_t>::max() % range;
  std::uint64_t v = engine_();
  while (v >= limit) v = engine_();
  return lo + static_cast<std::int64_t>(v % range);
}

Matrix glorot_uniform(Eigen::Index rows, Eigen::Index cols, Rng& rng) {
  const double s = std::sqrt(6.0 / static_cast<double>(rows + cols));
  Matrix m(rows, cols);
  // Fill in row-major order so the draw sequence matches the file layout.
  for (Eigen::Index r = 0; r < rows; ++r)
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = rng.uniform(-s, s);
  return m;
}

// ---------------------------------------------------------------------------

TensorView view(std::string name, Matrix& m) {
  return TensorView{std::move(name), m.rows(), m.cols(), 2,
                    std::span<double>(m.data(), static_cast<std::size_t>(m.size()))};
}

TensorView view(std::string name, Vector& v) {
  return TensorView{std::move(name), v.size(), 1, 1,
                    std::span<double>(v.data(), static_cast<std::size_t>(v.size()))};
}

std::size_t total_size(std::span<const TensorView> tensors) {
  std::size_t n = 0;
  for (const auto& t : tensors) n += t.values.size();
  return n;
}

double global_norm(std::span<const TensorView> tensors) {
  double sq = 0.0;
  for (const auto& t : tensors)
    for (double v : t.values) sq += v * v;
  return std::sqrt(sq);
}

double clip_global_norm(std::span<const TensorView> tensors, double max_norm) {
  const double norm = global_norm(tensors);
  if (norm > max_norm && norm > 0.0) {
    const double scale = max_norm / norm;
    for (const auto& t : tensors)
      for (double& v : t.values) v *= scale;
  }
  return norm;
}

void set_zero(std::span<const TensorView> tensors) {
  for (const auto& t : tensors) std::fill(t.values.begin(), t.values.end(), 0.0);
}

void quantize_f32(std::span<const TensorView> tensors) {
  for (const auto& t : tensors)
    for (double& v : t.values) v = static_cast<double>(static_cast<float>(v));
}

void quantize_f32(Matrix& m) {
  for (Eigen::Index i = 0; i < m.size(); ++i)
    m.data()[i] = static_cast<double>(static_cast<float>(m.data()[i]));
}

double round_f32_toward_zero(double x) {
  float f = static_cast<float>(x);
  if (std::abs(static_cast<double>(f)) > std::abs(x)) f = std::nextafter(f, 0.0f);
  return static_cast<double>(f);
}

// ---------------------------------------------------------------------------

LrSchedule::LrSchedule(double initial_rate, int total_epochs)
    : initial_(initial_rate), total_(total_epochs) {
  if (!(initial_rate > 0.0)) throw std::invalid_argument("LrSchedule: initial rate must be > 0");
  if (total_epochs <= 0) throw std::invalid_argument("LrSchedule: total epochs must be > 0");
}

double LrSchedule::rate(int epoch) const {
  if (epoch >= total_) return 0.0;
  if (epoch <= 0) return initial_;
  return initial_ * (1.0 - static_cast<double>(epoch) / static_cast<double>(total_));
}

RmsPropState::RmsPropState(RmsPropConfig cfg, std::span<const TensorView> shapes) : config(cfg) {
  if (!(cfg.decay > 0.0 && cfg.decay < 1.0)) throw std::invalid_argument("RMSProp decay must be in (0,1)");
  if (!(cfg.epsilon > 0.0)) throw std::invalid_argument("RMSProp epsilon must be > 0");
  accumulators.reserve(shapes.size());
  for (const auto& t : shapes) accumulators.emplace_back(t.values.size(), 0.0);
}

std::vector<TensorView> RmsPropState::views(std::string_view prefix) {
  std::vector<TensorView> out;
  for (std::size_t i = 0; i < accumulators.size(); ++i) {
    auto& a = accumulators[i];
    out.push_back(TensorView{std::string(prefix) + std::to_string(i),
                             static_cast<Eigen::Index>(a.size()), 1, 1,
                             std::span<double>(a.data(), a.size())});
  }
  return out;
}

void rmsprop_step(std::span<const TensorView> params, std::span<const TensorView> grads,
                  RmsPropState& state, double rate) {
  if (params.size() != grads.size() || params.size() != state.accumulators.size())
    throw std::invalid_argument("rmsprop_step: tensor count mismatch");
  const double decay = state.config.decay;
  const double eps = state.config.epsilon;
  for (std::size_t t = 0; t < params.size(); ++t) {
    auto p = params[t].values;
    auto g = grads[t].values;
    auto& acc = state.accumulators[t];
    if (p.size() != g.size() || p.size() != acc.size())
      throw std::invalid_argument("rmsprop_step: shape mismatch for " + params[t].name);
    for (std::size_t i = 0; i < p.size(); ++i) {
      acc[i] = decay * acc[i] + (1.0 - decay) * g[i] * g[i];
      p[i] -= rate * g[i] / (std::sqrt(acc[i]) + eps);
    }
  }
}

void quantize_f32(RmsPropState& state) {
  for (auto& acc : state.accumulators)
    for (double& a : acc) a = static_cast<double>(static_cast<float>(a));
}

// ---------------------------------------------------------------------------

GradCheckReport grad_check(const std::function<double()>& loss, std::span<const TensorView> params,
                           std::span<const TensorView> analytic, double tolerance, double step) {
  if (params.size() != analytic.size()) throw std::invalid_argument("grad_check: tensor count mismatch");
  GradCheckReport report;
  for (std::size_t t = 0; t < params.size(); ++t) {
    auto p = params[t].values;
    auto g = analytic[t].values;
    if (p.size() != g.size()) throw std::invalid_argument("grad_check: shape mismatch for " + params[t].name);
    for (std::size_t i = 0; i < p.size(); ++i) {
      const double saved = p[i];
      p[i] = saved + step;
      const double up = loss();
      p[i] = saved - step;
      const double down = loss();
      p[i] = saved;
      const double numeric = (up - down) / (2.0 * step);
      const double denom = std::max({std::abs(g[i]), std::abs(numeric), 1e-8});
      const double rel = std::abs(g[i] - numeric) / denom;
      ++report.checked;
      if (!(rel <= report.max_relative_error)) {
        report.max_relative_error = std::isnan(rel) ? std::numeric_limits<double>::infinity() : rel;
        report.worst_tensor = params[t].name;
        report.worst_index = i;
        report.worst_analytic = g[i];
        report.worst_numeric = numeric;
      }
    }
  }
  report.passed = report.max_relative_error < tolerance;
  return report;
}

}  // namespace rgae
