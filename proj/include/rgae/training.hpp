#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "rgae/frames.hpp"
#include "rgae/mathcore.hpp"

namespace rgae {

/// Settings shared by RGAE and baseline BPTT training.
struct TrainConfig {
  int epochs = 50;
  int finetune_epochs = 0;  // RGAE only: trailing epochs that also update the GAE
  double learning_rate = 0.001;
  double dropout = 0.0;     // inverted dropout on context-window inputs
  double grad_clip = 5.0;   // global L2 norm
  int batch_size = 8;
  std::uint64_t seed = 1;
  bool augment_transpose = false;
  int delta_min = -30;
  int delta_max = 30;
  RmsPropConfig rmsprop;

  void validate() const;
};

/// Per-epoch progress callback: (epoch, mean loss in bits, learning rate).
using EpochCallback = std::function<void(int, double, double)>;

/// A group of sequences processed in lockstep. Shorter sequences are padded
/// with empty frames; their padded steps carry no loss.
struct SequenceBatch {
  int alphabet = 0;
  std::size_t steps = 0;  // longest length in the batch
  std::vector<std::size_t> lengths;
  std::vector<std::vector<Frame>> frames;  // [b][t]
  std::vector<std::vector<int>> targets;   // [b][t] pitch, -1 on padding
};

/// Groups corpus indices into batches of at most `batch_size` sequences of
/// similar length: shuffle, stable sort by length, chunk, shuffle chunk order.
std::vector<std::vector<std::size_t>> make_length_batches(const Corpus& corpus, int batch_size, Rng& rng);

/// Copies the selected sequences, transposed by `delta` (Eq. shift), into a
/// padded batch. Monophonic sequences are required.
SequenceBatch make_sequence_batch(const Corpus& corpus, std::span<const std::size_t> indices, int delta);

/// windows[t][b] = flattened frames (t+offset-n) .. (t+offset-1) of sequence b,
/// for t in [0, count). Each on-bit is dropped independently with probability
/// `dropout` (survivors scaled by 1/(1-dropout)) when `rng` is non-null.
std::vector<std::vector<SparseColumn>> window_columns(const SequenceBatch& batch, int n, int offset, std::size_t count,
                                                      double dropout, Rng* rng);

/// Sum of -log2 p(correct) over the batch and the number of prediction events.
struct BatchLoss {
  double sum_bits = 0.0;
  std::size_t events = 0;
  double mean() const { return events ? sum_bits / static_cast<double>(events) : 0.0; }
};

void require_monophonic(const Corpus& corpus, int alphabet);

}  // namespace rgae
