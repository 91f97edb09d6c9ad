#include "rgae/training.hpp"

#include <algorithm>
#include <stdexcept>

namespace rgae {

void TrainConfig::validate() const {
  if (epochs <= 0) throw std::invalid_argument("epochs must be positive");
  if (finetune_epochs < 0 || finetune_epochs > epochs)
    throw std::invalid_argument("finetune_epochs must be in [0, epochs]");
  if (!(learning_rate > 0.0)) throw std::invalid_argument("learning rate must be positive");
  if (!(dropout >= 0.0 && dropout < 1.0)) throw std::invalid_argument("dropout must be in [0, 1)");
  if (!(grad_clip > 0.0)) throw std::invalid_argument("gradient clip norm must be positive");
  if (batch_size <= 0) throw std::invalid_argument("batch size must be positive");
  if (delta_min > delta_max) throw std::invalid_argument("transposition range is empty");
}

std::vector<std::vector<std::size_t>> make_length_batches(const Corpus& corpus, int batch_size, Rng& rng) {
  std::vector<std::size_t> order(corpus.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  rng.shuffle(order);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return corpus[a].size() < corpus[b].size(); });
  std::vector<std::vector<std::size_t>> batches;
  for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(batch_size)) {
    const std::size_t end = std::min(order.size(), start + static_cast<std::size_t>(batch_size));
    batches.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(start),
                         order.begin() + static_cast<std::ptrdiff_t>(end));
  }
  rng.shuffle(batches);
  return batches;
}

SequenceBatch make_sequence_batch(const Corpus& corpus, std::span<const std::size_t> indices, int delta) {
  if (indices.empty()) throw std::invalid_argument("empty sequence batch");
  SequenceBatch batch;
  batch.alphabet = corpus[indices.front()].alphabet;
  for (std::size_t idx : indices) batch.steps = std::max(batch.steps, corpus[idx].size());
  for (std::size_t idx : indices) {
    const FrameSequence& seq = corpus[idx];
    if (seq.alphabet != batch.alphabet) throw std::invalid_argument("batch mixes alphabets");
    std::vector<Frame> frames(batch.steps);
    std::vector<int> targets(batch.steps, -1);
    for (std::size_t t = 0; t < seq.size(); ++t) {
      frames[t] = shift(seq.frames[t], delta, seq.alphabet);
      targets[t] = frames[t].size() == 1 ? frames[t].front() : -1;
    }
    batch.lengths.push_back(seq.size());
    batch.frames.push_back(std::move(frames));
    batch.targets.push_back(std::move(targets));
  }
  return batch;
}

std::vector<std::vector<SparseColumn>> window_columns(const SequenceBatch& batch, int n, int offset, std::size_t count,
                                                      double dropout, Rng* rng) {
  const int m = batch.alphabet;
  const bool drop = rng != nullptr && dropout > 0.0;
  const double keep_scale = drop ? 1.0 / (1.0 - dropout) : 1.0;
  std::vector<std::vector<SparseColumn>> windows(count, std::vector<SparseColumn>(batch.frames.size()));
  for (std::size_t t = 0; t < count; ++t) {
    for (std::size_t b = 0; b < batch.frames.size(); ++b) {
      SparseColumn& col = windows[t][b];
      const auto& frames = batch.frames[b];
      for (int j = 0; j < n; ++j) {
        const long long src = static_cast<long long>(t) + offset - n + j;
        if (src < 0 || src >= static_cast<long long>(frames.size())) continue;
        for (int p : frames[static_cast<std::size_t>(src)]) {
          if (drop && rng->bernoulli(dropout)) continue;
          col.push(j * m + p, keep_scale);
        }
      }
    }
  }
  return windows;
}

void require_monophonic(const Corpus& corpus, int alphabet) {
  if (corpus.empty()) throw std::invalid_argument("training corpus is empty");
  for (const auto& seq : corpus) {
    if (seq.alphabet != alphabet) throw std::invalid_argument("corpus alphabet does not match the model");
    if (!seq.monophonic()) throw std::invalid_argument("sequence '" + seq.source_id + "' is not monophonic");
  }
}

}  // namespace rgae
