#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "rgae/mathcore.hpp"

using namespace rgae;

TEST(Softplus, KnownValues) {
  EXPECT_NEAR(softplus(0.0), std::numbers::ln2, 1e-12);
  EXPECT_NEAR(softplus(1000.0), 1000.0, 1e-9);
  EXPECT_NEAR(softplus(-1.0), 0.313262, 1e-6);
  EXPECT_NEAR(softplus(-1.0), std::log(1.0 + std::exp(-1.0)), 1e-15);
  EXPECT_GE(softplus(-1000.0), 0.0);
  EXPECT_TRUE(std::isfinite(softplus(-1000.0)));
}

TEST(Softplus, VectorMatchesScalar) {
  Vector x(4);
  x << -3.0, -0.5, 0.0, 7.0;
  const Vector y = softplus(x);
  for (int i = 0; i < 4; ++i) EXPECT_DOUBLE_EQ(y(i), softplus(x(i)));
}

TEST(Sigmoid, Basics) {
  EXPECT_DOUBLE_EQ(sigmoid(0.0), 0.5);
  EXPECT_NEAR(sigmoid(800.0), 1.0, 1e-15);
  EXPECT_NEAR(sigmoid(-800.0), 0.0, 1e-15);
  EXPECT_NEAR(sigmoid(2.0) + sigmoid(-2.0), 1.0, 1e-15);
}

TEST(Softmax, UniformAndStable) {
  const Vector u = softmax(Vector::Zero(4));
  for (int i = 0; i < 4; ++i) EXPECT_DOUBLE_EQ(u(i), 0.25);
  Vector big(2);
  big << 100.0, 0.0;
  const Vector s = softmax(big);
  EXPECT_TRUE(all_finite(s));
  EXPECT_NEAR(s(0), 1.0, 1e-12);
  EXPECT_NEAR(s(1), std::exp(-100.0), 1e-50);
  Vector huge(3);
  huge << 1e308, 1e308, -1e308;
  EXPECT_TRUE(all_finite(softmax(huge)));
}

TEST(Softmax, ColumnsMatchVector) {
  Rng rng(3);
  Matrix m(5, 3);
  for (int i = 0; i < m.size(); ++i) m.data()[i] = rng.uniform(-4, 4);
  const Matrix s = softmax_columns(m);
  for (int c = 0; c < 3; ++c) EXPECT_LT((s.col(c) - softmax(Vector(m.col(c)))).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(Log2Clamped, FloorsAtTiny) {
  EXPECT_DOUBLE_EQ(log2_clamped(0.125), -3.0);
  EXPECT_DOUBLE_EQ(log2_clamped(0.0), std::log2(kLogFloor));
}

TEST(Rng, DeterministicAndDerived) {
  Rng a(42), b(42);
  for (int i = 0; i < 100; ++i) EXPECT_EQ(a.next_u64(), b.next_u64());
  Rng c = Rng::derive(42, "x", 0), d = Rng::derive(42, "x", 1), e = Rng::derive(42, "y", 0);
  const auto cv = c.next_u64();
  EXPECT_NE(cv, d.next_u64());
  EXPECT_NE(cv, e.next_u64());
  EXPECT_EQ(cv, Rng::derive(42, "x", 0).next_u64());
}

TEST(Rng, UniformIntCoversRangeInclusive) {
  Rng rng(7);
  std::vector<int> hits(7, 0);
  for (int i = 0; i < 7000; ++i) {
    const auto v = rng.uniform_int(-3, 3);
    ASSERT_GE(v, -3);
    ASSERT_LE(v, 3);
    ++hits[static_cast<std::size_t>(v + 3)];
  }
  for (int h : hits) EXPECT_GT(h, 800);
  EXPECT_EQ(rng.uniform_int(5, 5), 5);
}

TEST(Rng, ShuffleIsPermutation) {
  Rng rng(11);
  std::vector<int> v(50);
  for (int i = 0; i < 50; ++i) v[static_cast<std::size_t>(i)] = i;
  rng.shuffle(v);
  std::vector<int> sorted = v;
  std::sort(sorted.begin(), sorted.end());
  for (int i = 0; i < 50; ++i) EXPECT_EQ(sorted[static_cast<std::size_t>(i)], i);
}

TEST(GlorotUniform, Bounds) {
  Rng rng(1);
  const Matrix w = glorot_uniform(30, 10, rng);
  const double s = std::sqrt(6.0 / 40.0);
  EXPECT_LE(w.cwiseAbs().maxCoeff(), s);
  EXPECT_GT(w.cwiseAbs().maxCoeff(), 0.5 * s);
}

TEST(LrSchedule, LinearToZero) {
  const LrSchedule s(0.001, 50);
  EXPECT_DOUBLE_EQ(s.rate(0), 0.001);
  EXPECT_DOUBLE_EQ(s.rate(50), 0.0);
  EXPECT_NEAR(s.rate(25), 0.0005, 1e-18);
  EXPECT_NEAR(s.rate(49), 0.001 / 50.0, 1e-18);
  for (int e = 1; e <= 50; ++e) EXPECT_LT(s.rate(e), s.rate(e - 1));
}

TEST(RmsProp, SingleStepByHand) {
  Vector p(2), g(2);
  p << 1.0, -2.0;
  g << 0.5, 0.0;
  std::vector<TensorView> pv = {view("p", p)};
  std::vector<TensorView> gv = {view("p", g)};
  RmsPropState state(RmsPropConfig{}, pv);
  rmsprop_step(pv, gv, state, 0.01);
  const double acc = 0.1 * 0.25;
  EXPECT_DOUBLE_EQ(state.accumulators[0][0], acc);
  EXPECT_DOUBLE_EQ(p(0), 1.0 - 0.01 * 0.5 / (std::sqrt(acc) + 1e-8));
  EXPECT_DOUBLE_EQ(p(1), -2.0);
}

TEST(RmsProp, ZeroGradientLeavesParams) {
  Matrix w = Matrix::Constant(3, 2, 0.7);
  Matrix g = Matrix::Zero(3, 2);
  std::vector<TensorView> pv = {view("w", w)};
  std::vector<TensorView> gv = {view("w", g)};
  RmsPropState state(RmsPropConfig{}, pv);
  rmsprop_step(pv, gv, state, 0.1);
  EXPECT_EQ(w, Matrix::Constant(3, 2, 0.7));
}

TEST(RmsProp, RejectsMismatch) {
  Vector p = Vector::Zero(3), g = Vector::Zero(2);
  std::vector<TensorView> pv = {view("p", p)};
  std::vector<TensorView> gv = {view("p", g)};
  RmsPropState state(RmsPropConfig{}, pv);
  EXPECT_THROW(rmsprop_step(pv, gv, state, 0.1), std::invalid_argument);
}

TEST(ClipGlobalNorm, ScalesJointly) {
  Vector a(1), b(1);
  a << 3.0;
  b << 4.0;
  std::vector<TensorView> t = {view("a", a), view("b", b)};
  EXPECT_DOUBLE_EQ(clip_global_norm(t, 2.5), 5.0);
  EXPECT_NEAR(a(0), 1.5, 1e-15);
  EXPECT_NEAR(b(0), 2.0, 1e-15);
  EXPECT_DOUBLE_EQ(clip_global_norm(t, 10.0), global_norm(t));
  EXPECT_NEAR(a(0), 1.5, 1e-15);
}

TEST(Quantize, Float32AndTowardZero) {
  Rng rng(5);
  for (int i = 0; i < 1000; ++i) {
    const double x = rng.uniform(-2, 2);
    const double z = round_f32_toward_zero(x);
    EXPECT_LE(std::abs(z), std::abs(x));
    EXPECT_EQ(static_cast<double>(static_cast<float>(z)), z);
    EXPECT_LT(std::abs(z - x), 1e-6);
  }
  Matrix m = Matrix::Constant(2, 2, 0.1);
  quantize_f32(m);
  EXPECT_EQ(m(0, 0), static_cast<double>(0.1f));
}

TEST(GradCheck, QuadraticIsExact) {
  Rng rng(9);
  Matrix w(4, 3);
  for (int i = 0; i < w.size(); ++i) w.data()[i] = rng.uniform(-1, 1);
  Matrix g = 2.0 * w;
  std::vector<TensorView> pv = {view("w", w)};
  std::vector<TensorView> gv = {view("w", g)};
  const auto report = grad_check([&] { return w.squaredNorm(); }, pv, gv, 1e-6);
  EXPECT_TRUE(report.passed);
  EXPECT_LT(report.max_relative_error, 1e-6);
  EXPECT_EQ(report.checked, 12u);
}

TEST(GradCheck, CatchesWrongGradient) {
  Vector w(3);
  w << 0.3, -0.4, 0.9;
  Vector g = 2.0 * w;
  g(1) *= 1.01;
  std::vector<TensorView> pv = {view("w", w)};
  std::vector<TensorView> gv = {view("w", g)};
  const auto report = grad_check([&] { return w.squaredNorm(); }, pv, gv, 1e-4);
  EXPECT_FALSE(report.passed);
  EXPECT_EQ(report.worst_index, 1u);
  EXPECT_EQ(report.worst_tensor, "w");
}
