#include <gtest/gtest.h>

#include "rgae/frames.hpp"

using namespace rgae;

TEST(Shift, IdentityAndDenseExample) {
  Vector x(4);
  x << 1, 0, 0, 0;
  EXPECT_EQ(shift(x, 0), x);
  Vector expected(4);
  expected << 0, 0, 0, 1;
  EXPECT_EQ(shift(x, 1), expected);
}

TEST(Shift, SparseMatchesDense) {
  for (int delta = -9; delta <= 9; ++delta) {
    const Frame f = {0, 2, 5};
    EXPECT_EQ(dense(shift(f, delta, 7), 7), shift(dense(f, 7), delta)) << delta;
  }
}

TEST(Shift, InverseAndWrap) {
  const Frame f = {1, 30, 63};
  EXPECT_EQ(shift(shift(f, 17, 64), -17, 64), f);
  EXPECT_EQ(shift(f, 64, 64), f);
  EXPECT_EQ(shift(Frame{3}, 5, 64), Frame{62});
}

TEST(Shift, PreservesIntervals) {
  const FrameSequence seq = make_monophonic({10, 12, 17, 5}, 32);
  const FrameSequence s = shift(seq, -7);
  for (std::size_t t = 1; t < seq.size(); ++t)
    EXPECT_EQ(wrap_pitch(s.pitch(t) - s.pitch(t - 1), 32), wrap_pitch(seq.pitch(t) - seq.pitch(t - 1), 32));
}

TEST(FrameSequence, ValidateAndMonophonic) {
  FrameSequence s = make_monophonic({1, 2, 3}, 4);
  EXPECT_TRUE(s.monophonic());
  EXPECT_NO_THROW(s.validate());
  s.frames.push_back({0, 1});
  EXPECT_FALSE(s.monophonic());
  EXPECT_THROW(s.pitch(3), std::invalid_argument);
  s.frames.push_back({4});
  EXPECT_THROW(s.validate(), std::invalid_argument);
  EXPECT_THROW(make_monophonic({5}, 4), std::invalid_argument);
}

TEST(NormalizeFrame, SortsAndDedups) { EXPECT_EQ(normalize_frame({5, 1, 5, 3}), (Frame{1, 3, 5})); }

TEST(ContextWindow, ZeroPaddedBeforeStart) {
  const FrameSequence s = make_monophonic({7, 8, 9}, 16);
  const auto w = context_window(s, 1, 3);
  ASSERT_EQ(w.size(), 3u);
  EXPECT_TRUE(w[0].empty());
  EXPECT_TRUE(w[1].empty());
  EXPECT_EQ(w[2], Frame{7});
  const auto w3 = context_window(s, 3, 2);
  EXPECT_EQ(w3[0], Frame{8});
  EXPECT_EQ(w3[1], Frame{9});
}

TEST(FlattenWindow, OffsetsByPosition) {
  const std::vector<Frame> w = {{1}, {}, {0, 3}};
  const SparseColumn c = flatten_window(w, 4);
  EXPECT_EQ(c.index, (std::vector<int>{1, 8, 11}));
  for (double v : c.value) EXPECT_EQ(v, 1.0);
}
