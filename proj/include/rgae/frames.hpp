#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "rgae/mathcore.hpp"

namespace rgae {

/// Active pitch indices of one time step, sorted ascending, no duplicates.
/// An empty frame is a rest (all bits off).
using Frame = std::vector<int>;

struct FrameSequence {
  int alphabet = 0;  // M
  std::vector<Frame> frames;
  std::string source_id;
  std::optional<int> scheme_id;

  std::size_t size() const { return frames.size(); }
  bool monophonic() const;
  /// Throws std::invalid_argument if an index is outside [0, M) or a frame
  /// is not sorted/unique.
  void validate() const;
  /// Pitch of frame t; requires exactly one on-bit.
  int pitch(std::size_t t) const;
};

using Corpus = std::vector<FrameSequence>;

FrameSequence make_monophonic(const std::vector<int>& pitches, int alphabet, std::string source_id = {},
                              std::optional<int> scheme_id = std::nullopt);
Frame normalize_frame(Frame f);
Vector dense(const Frame& f, int alphabet);

/// Circular transposition of one frame: output bit i = input bit (i+delta) mod M.
/// A pitch p therefore moves to (p - delta) mod M.
Frame shift(const Frame& frame, int delta, int alphabet);
/// Dense version of the same bit permutation.
Vector shift(const Vector& x, int delta);
/// Shifts each frame of a window independently.
std::vector<Frame> shift(std::span<const Frame> window, int delta, int alphabet);
FrameSequence shift(const FrameSequence& seq, int delta);

int wrap_pitch(long long p, int alphabet);

/// One column of sparse input: (flattened index, value) pairs.
struct SparseColumn {
  std::vector<int> index;
  std::vector<double> value;

  void clear() {
    index.clear();
    value.clear();
  }
  void push(int i, double v) {
    index.push_back(i);
    value.push_back(v);
  }
  std::size_t nnz() const { return index.size(); }
};

/// Flattens n frames (oldest first) into a sparse column over n*M components.
SparseColumn flatten_window(std::span<const Frame> window, int alphabet);
SparseColumn to_sparse(const Frame& frame);

/// The n frames preceding position t (frames t-n .. t-1), with empty frames
/// standing in for positions before the start of the sequence.
std::vector<Frame> context_window(const FrameSequence& seq, std::size_t t, int n);

}  // namespace rgae
