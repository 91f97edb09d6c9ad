#include <gtest/gtest.h>

#include <cmath>

#include "fixtures.hpp"
#include "rgae/ensemble.hpp"

using namespace rgae;

namespace {

Vector vec(std::initializer_list<double> v) {
  Vector out(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double x : v) out(i++) = x;
  return out;
}

// Direct evaluation of the weighted product, probability space.
std::vector<double> combine_oracle(const std::vector<std::vector<double>>& ps, double b) {
  const std::size_t n = ps[0].size();
  std::vector<double> out(n, 1.0);
  double wsum = 0.0;
  for (const auto& p : ps) {
    double h = 0.0;
    for (double x : p)
      if (x > 0) h -= x * std::log2(x);
    const double w = std::pow(std::max(h / std::log2(static_cast<double>(n)), 1e-6), -b);
    for (std::size_t a = 0; a < n; ++a) out[a] *= std::pow(std::max(p[a], 1e-12), w);
    wsum += w;
  }
  for (double& x : out) x = std::pow(x, 1.0 / wsum);
  double z = 0.0;
  for (double x : out) z += x;
  for (double& x : out) x /= z;
  return out;
}

Vector random_dist(int n, Rng& rng) {
  Vector p(n);
  for (int i = 0; i < n; ++i) p(i) = rng.uniform(0.01, 1.0);
  return p / p.sum();
}

}  // namespace

TEST(ShannonEntropy, Examples) {
  EXPECT_DOUBLE_EQ(shannon_entropy(Vector::Constant(4, 0.25)), 2.0);
  EXPECT_DOUBLE_EQ(shannon_entropy(vec({0, 1, 0})), 0.0);
  EXPECT_DOUBLE_EQ(shannon_entropy(vec({0.5, 0.25, 0.25})), 1.5);
  EXPECT_THROW(shannon_entropy(vec({0.5, 0.4})), std::invalid_argument);
  EXPECT_THROW(shannon_entropy(vec({1.5, -0.5})), std::invalid_argument);
}

TEST(RelativeEntropy, Examples) {
  EXPECT_NEAR(relative_entropy(Vector::Constant(8, 0.125)), 1.0, 1e-15);
  EXPECT_DOUBLE_EQ(relative_entropy(vec({0, 0, 1, 0}), 1e-6), 1e-6);
  EXPECT_NEAR(relative_entropy(vec({0.5, 0.25, 0.25, 0.0})), 0.75, 1e-15);
  EXPECT_THROW(relative_entropy(vec({1.0})), std::invalid_argument);
}

TEST(Combine, WorkedExample) {
  // w1 = 0.72193^-0.5 = 1.17694, w2 = 1; exponents w / sum(w).
  const std::vector<Vector> d = {vec({0.8, 0.2}), vec({0.5, 0.5})};
  const Vector c = combine(d);
  const double e = 1.1769365 / 2.1769365;
  const double a = std::pow(0.8, e) * std::pow(0.5, 1 - e), b = std::pow(0.2, e) * std::pow(0.5, 1 - e);
  EXPECT_NEAR(c(0), a / (a + b), 1e-6);
  EXPECT_NEAR(c(0), 0.67907, 1e-5);
  const auto ref = combine_oracle({{0.8, 0.2}, {0.5, 0.5}}, 0.5);
  EXPECT_NEAR(c(0), ref[0], 1e-12);
}

TEST(Combine, MatchesOracleOnRandomInputs) {
  Rng rng(3);
  for (int trial = 0; trial < 50; ++trial) {
    const int n = static_cast<int>(rng.uniform_int(2, 12));
    const int k = static_cast<int>(rng.uniform_int(1, 4));
    const double b = rng.uniform(0.0, 2.0);
    std::vector<Vector> d;
    std::vector<std::vector<double>> raw;
    for (int m = 0; m < k; ++m) {
      d.push_back(random_dist(n, rng));
      raw.emplace_back(d.back().data(), d.back().data() + n);
    }
    const Vector c = combine(d, WeightedCombineConfig{b});
    const auto ref = combine_oracle(raw, b);
    EXPECT_NEAR(c.sum(), 1.0, 1e-9);
    for (int a = 0; a < n; ++a) EXPECT_NEAR(c(a), ref[static_cast<std::size_t>(a)], 1e-9);
  }
}

TEST(Combine, IdempotentForAnyBias) {
  Rng rng(4);
  for (double b : {0.0, 0.5, 1.0, 3.0}) {
    const Vector p = random_dist(7, rng);
    const std::vector<Vector> d = {p, p, p};
    EXPECT_LT((combine(d, WeightedCombineConfig{b}) - p).cwiseAbs().maxCoeff(), 1e-9);
  }
}

TEST(Combine, UniformStaysUniform) {
  const std::vector<Vector> d = {Vector::Constant(5, 0.2), Vector::Constant(5, 0.2)};
  EXPECT_LT((combine(d) - Vector::Constant(5, 0.2)).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Combine, PermutationEquivariant) {
  Rng rng(5);
  const std::vector<Vector> d = {random_dist(6, rng), random_dist(6, rng)};
  std::vector<int> perm = {3, 0, 5, 1, 4, 2};
  std::vector<Vector> dp;
  for (const auto& p : d) {
    Vector q(6);
    for (int i = 0; i < 6; ++i) q(i) = p(perm[static_cast<std::size_t>(i)]);
    dp.push_back(q);
  }
  const Vector c = combine(d), cp = combine(dp);
  for (int i = 0; i < 6; ++i) EXPECT_NEAR(cp(i), c(perm[static_cast<std::size_t>(i)]), 1e-12);
}

TEST(Combine, ZeroBiasIsPlainGeometricMean) {
  const std::vector<Vector> d = {vec({0.7, 0.2, 0.1}), vec({0.1, 0.3, 0.6})};
  Vector g(3);
  for (int a = 0; a < 3; ++a) g(a) = std::sqrt(d[0](a) * d[1](a));
  g /= g.sum();
  EXPECT_LT((combine(d, WeightedCombineConfig{0.0}) - g).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Combine, ConfidentMemberDominates) {
  const Vector sharp = vec({1e-9, 1.0 - 2e-9, 1e-9, 0.0});
  const Vector flat = vec({0.4, 0.1, 0.3, 0.2});
  const std::vector<Vector> d = {flat, sharp};
  EXPECT_EQ(argmax_lowest(combine(d)), 1);
}

TEST(Combine, RejectsMismatchAndEmpty) {
  const std::vector<Vector> bad = {Vector::Constant(2, 0.5), Vector::Constant(4, 0.25)};
  EXPECT_THROW(combine(bad), std::invalid_argument);
  EXPECT_THROW(combine(std::vector<Vector>{}), std::invalid_argument);
}

TEST(EnsembleModel, PredictionsCombineMembers) {
  Rng rng(8);
  const RgaeModel a = fixtures::tiny_rgae({2, 5, 4, 3}, 3, rng);
  const BaselineModel b = fixtures::tiny_baseline(1, 5, 4, rng);
  const EnsembleModel e({&a, &b}, WeightedCombineConfig{});
  EXPECT_EQ(e.alphabet(), 5);
  EXPECT_EQ(e.min_primer(), 2);
  const FrameSequence s = fixtures::random_melody(7, 5, rng);
  const auto pa = predict_sequence(a, s), pb = predict_sequence(b, s), pe = predict_sequence(e, s);
  for (std::size_t t = 0; t < pe.size(); ++t) {
    const std::vector<Vector> d = {pa[t], pb[t]};
    EXPECT_LT((pe[t] - combine(d)).cwiseAbs().maxCoeff(), 1e-12);
  }
}

TEST(EnsembleModel, RejectsAlphabetMismatch) {
  Rng rng(9);
  const BaselineModel a = fixtures::tiny_baseline(1, 5, 4, rng);
  const BaselineModel b = fixtures::tiny_baseline(1, 6, 4, rng);
  EXPECT_THROW(EnsembleModel({&a, &b}, WeightedCombineConfig{}), std::invalid_argument);
}
