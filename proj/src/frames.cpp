#include "rgae/frames.hpp"

#include <algorithm>
#include <stdexcept>

namespace rgae {

bool FrameSequence::monophonic() const {
  return std::all_of(frames.begin(), frames.end(), [](const Frame& f) { return f.size() == 1; });
}

void FrameSequence::validate() const {
  if (alphabet <= 0) throw std::invalid_argument("sequence alphabet must be positive");
  for (std::size_t t = 0; t < frames.size(); ++t) {
    const Frame& f = frames[t];
    for (std::size_t i = 0; i < f.size(); ++i) {
      if (f[i] < 0 || f[i] >= alphabet)
        throw std::invalid_argument("pitch " + std::to_string(f[i]) + " outside [0, " +
                                    std::to_string(alphabet) + ") at frame " + std::to_string(t));
      if (i > 0 && f[i] <= f[i - 1])
        throw std::invalid_argument("frame " + std::to_string(t) + " is not sorted/unique");
    }
  }
}

int FrameSequence::pitch(std::size_t t) const {
  const Frame& f = frames.at(t);
  if (f.size() != 1) throw std::invalid_argument("frame " + std::to_string(t) + " is not monophonic");
  return f.front();
}

FrameSequence make_monophonic(const std::vector<int>& pitches, int alphabet, std::string source_id,
                              std::optional<int> scheme_id) {
  FrameSequence seq;
  seq.alphabet = alphabet;
  seq.source_id = std::move(source_id);
  seq.scheme_id = scheme_id;
  seq.frames.reserve(pitches.size());
  for (int p : pitches) seq.frames.push_back(Frame{p});
  seq.validate();
  return seq;
}

Frame normalize_frame(Frame f) {
  std::sort(f.begin(), f.end());
  f.erase(std::unique(f.begin(), f.end()), f.end());
  return f;
}

Vector dense(const Frame& f, int alphabet) {
  Vector v = Vector::Zero(alphabet);
  for (int p : f) v(p) = 1.0;
  return v;
}

int wrap_pitch(long long p, int alphabet) {
  long long r = p % alphabet;
  if (r < 0) r += alphabet;
  return static_cast<int>(r);
}

Frame shift(const Frame& frame, int delta, int alphabet) {
  Frame out;
  out.reserve(frame.size());
  for (int p : frame) out.push_back(wrap_pitch(static_cast<long long>(p) - delta, alphabet));
  std::sort(out.begin(), out.end());
  return out;
}

Vector shift(const Vector& x, int delta) {
  const auto m = static_cast<int>(x.size());
  Vector out(m);
  for (int i = 0; i < m; ++i) out(i) = x(wrap_pitch(static_cast<long long>(i) + delta, m));
  return out;
}

std::vector<Frame> shift(std::span<const Frame> window, int delta, int alphabet) {
  std::vector<Frame> out;
  out.reserve(window.size());
  for (const Frame& f : window) out.push_back(shift(f, delta, alphabet));
  return out;
}

FrameSequence shift(const FrameSequence& seq, int delta) {
  FrameSequence out = seq;
  for (Frame& f : out.frames) f = shift(f, delta, seq.alphabet);
  return out;
}

SparseColumn flatten_window(std::span<const Frame> window, int alphabet) {
  SparseColumn col;
  for (std::size_t j = 0; j < window.size(); ++j)
    for (int p : window[j]) col.push(static_cast<int>(j) * alphabet + p, 1.0);
  return col;
}

SparseColumn to_sparse(const Frame& frame) {
  SparseColumn col;
  for (int p : frame) col.push(p, 1.0);
  return col;
}

std::vector<Frame> context_window(const FrameSequence& seq, std::size_t t, int n) {
  std::vector<Frame> window(static_cast<std::size_t>(n));
  for (int j = 0; j < n; ++j) {
    const long long src = static_cast<long long>(t) - n + j;
    if (src >= 0 && src < static_cast<long long>(seq.frames.size()))
      window[static_cast<std::size_t>(j)] = seq.frames[static_cast<std::size_t>(src)];
  }
  return window;
}

}  // namespace rgae
