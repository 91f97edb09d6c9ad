#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "rgae/frames.hpp"
#include "rgae/mathcore.hpp"

namespace rgae {

// ---------------------------------------------------------------------------
// Frame-corpus text format
//
//   #M=64                 optional alphabet header
//   # anything            comment
//   #@ source=<id> scheme=<k>   optional metadata for the next sequence
//   60 64 67              one frame per line, space-separated pitch indices
//                         blank line(s) separate sequences
// ---------------------------------------------------------------------------

/// Parse error carrying the 1-based line number.
class CorpusFormatError : public std::runtime_error {
 public:
  CorpusFormatError(std::size_t line, const std::string& what);
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

/// Reads a corpus; `default_alphabet` applies when the file has no #M= header.
Corpus read_corpus(std::istream& in, int default_alphabet = 128);
Corpus read_corpus(const std::string& path, int default_alphabet = 128);
void write_corpus(std::ostream& out, const Corpus& corpus);
/// Writes via a temporary file and rename.
void write_corpus(const std::string& path, const Corpus& corpus);

// ---------------------------------------------------------------------------
// Copy-and-shift schemes
// ---------------------------------------------------------------------------

/// Cyclic list of signed transpositions applied between successive copies.
struct TranspositionScheme {
  std::vector<int> deltas;

  int delta(std::size_t i) const { return deltas[i % deltas.size()]; }
  std::string to_string() const;
};

/// The ten schemes of the copy-and-shift experiment.
std::vector<TranspositionScheme> default_schemes();
/// One scheme per line, comma-separated signed integers; '#' comments.
std::vector<TranspositionScheme> read_schemes(std::istream& in);
std::vector<TranspositionScheme> read_schemes(const std::string& path);

struct SchemeDatasetSpec {
  std::vector<TranspositionScheme> schemes = default_schemes();
  std::vector<int> fragment_lengths = {4, 8, 16};
  int sequences_per_cell = 26;
  int sequence_length = 512;
  int train_per_cell = 20;
  int test_per_cell = 5;
  int eval_per_cell = 1;
  int alphabet = 64;
  std::uint64_t seed = 1;

  void validate() const;
};

/// Produces monophonic fragments of a requested length.
using FragmentSource = std::function<std::vector<int>(int length, Rng& rng)>;

/// Bounded random walk: start uniform in [low, high], steps uniform in
/// [-max_step, max_step], reflected at the bounds.
FragmentSource random_walk_source(int low, int high, int max_step = 4);

/// Contiguous monophonic excerpts of a user corpus with rests (empty frames)
/// removed. Polyphonic frames contribute their lowest pitch.
FragmentSource corpus_fragment_source(Corpus corpus);

/// Fragment repeated to `length` frames; copy i+1 is copy i transposed up by
/// scheme.delta(i), pitches wrapped modulo M.
std::vector<int> realize_scheme(const std::vector<int>& fragment, const TranspositionScheme& scheme, int length,
                                int alphabet);

struct SchemeDataset {
  Corpus train;
  Corpus test;
  Corpus eval;
};

/// Builds the (scheme x fragment length) grid. Every sequence uses a distinct
/// fragment, so the splits never share a (fragment, scheme) pair.
SchemeDataset generate_scheme_dataset(const SchemeDatasetSpec& spec, const FragmentSource& source);

/// True if every copy boundary of `seq` matches the scheme for the given
/// fragment length.
bool verify_scheme(const FrameSequence& seq, const TranspositionScheme& scheme, int fragment_length);

// ---------------------------------------------------------------------------
// Splits and augmentation
// ---------------------------------------------------------------------------

struct Fold {
  std::vector<std::size_t> train;
  std::vector<std::size_t> test;
};

/// Shuffled k-fold partition; test folds differ in size by at most one.
std::vector<Fold> kfold_split(std::size_t corpus_size, int k, std::uint64_t seed);

Corpus select(const Corpus& corpus, const std::vector<std::size_t>& indices);

/// Shifts every frame of the batch by one delta drawn uniformly from
/// [delta_min, delta_max] with the given seed. Returns the delta used.
int augment_transpose(Corpus& batch, int delta_min, int delta_max, std::uint64_t seed);

/// Random-walk melodies restricted to one diatonic scale (for CV experiments).
Corpus generate_scale_melodies(int count, int length, int alphabet, std::uint64_t seed);

}  // namespace rgae
