#pragma once

#include <cstdint>
#include <vector>

#include "rgae/baseline.hpp"
#include "rgae/gae.hpp"
#include "rgae/mathcore.hpp"
#include "rgae/rgae.hpp"
#include "rgae/training.hpp"

namespace fixtures {

using namespace rgae;

/// Random values in [-scale, scale] so gates and products are not tiny.
inline void randomize(std::vector<TensorView> tensors, Rng& rng, double scale) {
  for (auto& t : tensors)
    for (double& v : t.values) v = rng.uniform(-scale, scale);
}

inline GaeParams tiny_gae(const GaeShape& shape, Rng& rng, double scale = 0.8) {
  GaeParams p = GaeParams::zeros(shape);
  randomize(p.tensors(), rng, scale);
  return p;
}

inline RgaeModel tiny_rgae(const GaeShape& shape, int hidden, Rng& rng, double scale = 0.8) {
  RgaeModel m(GaeParams::zeros(shape), GruParams::zeros(shape.mappings, hidden, shape.mappings));
  randomize(m.tensors(), rng, scale);
  return m;
}

inline BaselineModel tiny_baseline(int window, int alphabet, int hidden, Rng& rng, double scale = 0.8) {
  BaselineModel m(window, alphabet, GruParams::zeros(window * alphabet, hidden, alphabet));
  randomize(m.tensors(), rng, scale);
  return m;
}

inline FrameSequence random_melody(std::size_t length, int alphabet, Rng& rng) {
  std::vector<int> pitches;
  for (std::size_t i = 0; i < length; ++i) pitches.push_back(static_cast<int>(rng.uniform_int(0, alphabet - 1)));
  return make_monophonic(pitches, alphabet);
}

inline Corpus random_corpus(std::size_t count, std::size_t min_len, std::size_t max_len, int alphabet, Rng& rng) {
  Corpus c;
  for (std::size_t i = 0; i < count; ++i)
    c.push_back(random_melody(static_cast<std::size_t>(rng.uniform_int(static_cast<std::int64_t>(min_len),
                                                                       static_cast<std::int64_t>(max_len))),
                              alphabet, rng));
  return c;
}

inline std::vector<std::size_t> all_indices(const Corpus& c) {
  std::vector<std::size_t> idx(c.size());
  for (std::size_t i = 0; i < c.size(); ++i) idx[i] = i;
  return idx;
}

}  // namespace fixtures
