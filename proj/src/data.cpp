#include "rgae/data.hpp"

#include <algorithm>
#include <charconv>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>

namespace rgae {

CorpusFormatError::CorpusFormatError(std::size_t line, const std::string& what)
    : std::runtime_error("line " + std::to_string(line) + ": " + what), line_(line) {}

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

bool parse_int(std::string_view token, long long& out) {
  if (!token.empty() && token.front() == '+') token.remove_prefix(1);
  if (token.empty()) return false;
  const auto* end = token.data() + token.size();
  auto [ptr, ec] = std::from_chars(token.data(), end, out);
  return ec == std::errc() && ptr == end;
}

std::vector<std::string_view> split(std::string_view s, char sep) {
  std::vector<std::string_view> parts;
  std::size_t start = 0;
  while (start <= s.size()) {
    const std::size_t pos = s.find(sep, start);
    const std::size_t end = pos == std::string_view::npos ? s.size() : pos;
    parts.push_back(s.substr(start, end - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return parts;
}

void atomic_write(const std::string& path, const std::function<void(std::ostream&)>& body) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open '" + tmp + "' for writing");
    body(out);
    out.flush();
    if (!out) throw std::runtime_error("write to '" + tmp + "' failed");
  }
  std::filesystem::rename(tmp, path);
}

}  // namespace

Corpus read_corpus(std::istream& in, int default_alphabet) {
  Corpus corpus;
  int alphabet = default_alphabet;
  bool header_allowed = true;
  FrameSequence current;

  auto finish = [&]() {
    if (current.frames.empty()) return;
    current.alphabet = alphabet;
    corpus.push_back(std::move(current));
    current = FrameSequence{};
  };

  std::string raw;
  std::size_t line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    const std::string_view line = trim(raw);
    if (line.empty()) {
      finish();
      continue;
    }
    if (line.front() == '#') {
      if (line.starts_with("#M=")) {
        long long m = 0;
        if (!header_allowed) throw CorpusFormatError(line_no, "#M= header must precede all frames");
        if (!parse_int(trim(line.substr(3)), m) || m <= 0) throw CorpusFormatError(line_no, "invalid alphabet header");
        alphabet = static_cast<int>(m);
      } else if (line.starts_with("#@")) {
        std::string source;
        std::optional<int> scheme;
        std::istringstream fields{std::string(line.substr(2))};
        std::string field;
        while (fields >> field) {
          if (field.starts_with("source=")) {
            source = field.substr(7);
          } else if (field.starts_with("scheme=")) {
            long long k = 0;
            if (!parse_int(std::string_view(field).substr(7), k)) throw CorpusFormatError(line_no, "invalid scheme id");
            scheme = static_cast<int>(k);
          }
        }
        if (current.frames.empty()) {
          current.source_id = source;
          current.scheme_id = scheme;
        }
      }
      continue;
    }
    header_allowed = false;
    Frame frame;
    for (std::string_view token : split(line, ' ')) {
      token = trim(token);
      if (token.empty()) continue;
      long long p = 0;
      if (!parse_int(token, p)) throw CorpusFormatError(line_no, "malformed pitch '" + std::string(token) + "'");
      if (p < 0 || p >= alphabet)
        throw CorpusFormatError(line_no, "pitch " + std::to_string(p) + " outside [0, " + std::to_string(alphabet) + ")");
      frame.push_back(static_cast<int>(p));
    }
    current.frames.push_back(normalize_frame(std::move(frame)));
  }
  finish();
  return corpus;
}

Corpus read_corpus(const std::string& path, int default_alphabet) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open corpus '" + path + "'");
  return read_corpus(in, default_alphabet);
}

void write_corpus(std::ostream& out, const Corpus& corpus) {
  if (corpus.empty()) return;
  const int alphabet = corpus.front().alphabet;
  out << "#M=" << alphabet << '\n';
  bool first = true;
  for (const auto& seq : corpus) {
    if (seq.alphabet != alphabet) throw std::invalid_argument("write_corpus: sequences have different alphabets");
    if (seq.frames.empty()) throw std::invalid_argument("write_corpus: empty sequences cannot be represented");
    seq.validate();
    if (!first) out << '\n';
    first = false;
    if (!seq.source_id.empty() || seq.scheme_id) {
      if (seq.source_id.find_first_of(" \t\n") != std::string::npos)
        throw std::invalid_argument("write_corpus: source id contains whitespace");
      out << "#@";
      if (!seq.source_id.empty()) out << " source=" << seq.source_id;
      if (seq.scheme_id) out << " scheme=" << *seq.scheme_id;
      out << '\n';
    }
    for (const Frame& f : seq.frames) {
      if (f.empty()) throw std::invalid_argument("write_corpus: rests (empty frames) cannot be represented");
      for (std::size_t i = 0; i < f.size(); ++i) out << (i ? " " : "") << f[i];
      out << '\n';
    }
  }
}

void write_corpus(const std::string& path, const Corpus& corpus) {
  atomic_write(path, [&](std::ostream& out) { write_corpus(out, corpus); });
}

// ---------------------------------------------------------------------------

std::string TranspositionScheme::to_string() const {
  std::string s;
  for (std::size_t i = 0; i < deltas.size(); ++i) {
    if (i) s += ',';
    if (deltas[i] > 0) s += '+';
    s += std::to_string(deltas[i]);
  }
  return s;
}

std::vector<TranspositionScheme> default_schemes() {
  return {{{+5}}, {{+7}}, {{-5}}, {{-7}}, {{+12, -12}}, {{+3, -3}}, {{+4, -4}}, {{+9, -9}}, {{+4, -8}}, {{-4, +8}}};
}

std::vector<TranspositionScheme> read_schemes(std::istream& in) {
  std::vector<TranspositionScheme> schemes;
  std::string raw;
  std::size_t line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    const std::string_view line = trim(raw);
    if (line.empty() || line.front() == '#') continue;
    TranspositionScheme scheme;
    for (std::string_view token : split(line, ',')) {
      long long d = 0;
      if (!parse_int(trim(token), d)) throw CorpusFormatError(line_no, "malformed transposition '" + std::string(token) + "'");
      scheme.deltas.push_back(static_cast<int>(d));
    }
    schemes.push_back(std::move(scheme));
  }
  return schemes;
}

std::vector<TranspositionScheme> read_schemes(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open scheme file '" + path + "'");
  return read_schemes(in);
}

void SchemeDatasetSpec::validate() const {
  if (schemes.empty()) throw std::invalid_argument("dataset spec needs at least one scheme");
  for (const auto& s : schemes)
    if (s.deltas.empty()) throw std::invalid_argument("transposition scheme must be non-empty");
  if (fragment_lengths.empty()) throw std::invalid_argument("dataset spec needs at least one fragment length");
  for (int len : fragment_lengths) {
    if (len <= 0) throw std::invalid_argument("fragment length must be positive");
    if (len > sequence_length) throw std::invalid_argument("fragment longer than the sequence");
  }
  if (alphabet <= 0) throw std::invalid_argument("alphabet must be positive");
  if (train_per_cell < 0 || test_per_cell < 0 || eval_per_cell < 0)
    throw std::invalid_argument("split counts must be non-negative");
  if (train_per_cell + test_per_cell + eval_per_cell != sequences_per_cell)
    throw std::invalid_argument("split counts must sum to sequences_per_cell");
}

FragmentSource random_walk_source(int low, int high, int max_step) {
  if (low > high) throw std::invalid_argument("random walk range is empty");
  return [=](int length, Rng& rng) {
    std::vector<int> out;
    out.reserve(static_cast<std::size_t>(length));
    long long p = rng.uniform_int(low, high);
    for (int i = 0; i < length; ++i) {
      if (i > 0) {
        p += rng.uniform_int(-max_step, max_step);
        if (p > high) p = 2LL * high - p;
        if (p < low) p = 2LL * low - p;
        p = std::clamp<long long>(p, low, high);
      }
      out.push_back(static_cast<int>(p));
    }
    return out;
  };
}

FragmentSource corpus_fragment_source(Corpus corpus) {
  std::vector<std::vector<int>> melodies;
  for (const auto& seq : corpus) {
    std::vector<int> pitches;
    for (const Frame& f : seq.frames)
      if (!f.empty()) pitches.push_back(f.front());
    if (!pitches.empty()) melodies.push_back(std::move(pitches));
  }
  if (melodies.empty()) throw std::invalid_argument("fragment corpus has no notes");
  return [melodies = std::move(melodies)](int length, Rng& rng) {
    std::vector<std::size_t> usable;
    for (std::size_t i = 0; i < melodies.size(); ++i)
      if (static_cast<int>(melodies[i].size()) >= length) usable.push_back(i);
    if (usable.empty()) throw std::invalid_argument("no corpus melody is long enough for the requested fragment");
    const auto& m = melodies[usable[static_cast<std::size_t>(rng.uniform_int(0, static_cast<long long>(usable.size()) - 1))]];
    const auto start = static_cast<std::size_t>(rng.uniform_int(0, static_cast<long long>(m.size()) - length));
    return std::vector<int>(m.begin() + static_cast<std::ptrdiff_t>(start),
                            m.begin() + static_cast<std::ptrdiff_t>(start) + length);
  };
}

std::vector<int> realize_scheme(const std::vector<int>& fragment, const TranspositionScheme& scheme, int length,
                                int alphabet) {
  if (fragment.empty()) throw std::invalid_argument("empty fragment");
  if (static_cast<int>(fragment.size()) > length) throw std::invalid_argument("fragment longer than the sequence");
  if (scheme.deltas.empty()) throw std::invalid_argument("empty transposition scheme");
  std::vector<int> out;
  out.reserve(static_cast<std::size_t>(length));
  const std::size_t frag = fragment.size();
  long long offset = 0;
  for (int t = 0; t < length; ++t) {
    const auto i = static_cast<std::size_t>(t);
    if (i > 0 && i % frag == 0) offset += scheme.delta(i / frag - 1);
    out.push_back(wrap_pitch(fragment[i % frag] + offset, alphabet));
  }
  return out;
}

SchemeDataset generate_scheme_dataset(const SchemeDatasetSpec& spec, const FragmentSource& source) {
  spec.validate();
  SchemeDataset data;
  for (std::size_t s = 0; s < spec.schemes.size(); ++s) {
    for (int len : spec.fragment_lengths) {
      Rng rng = Rng::derive(spec.seed, "scheme-cell", s * 100000 + static_cast<std::uint64_t>(len));
      std::set<std::vector<int>> used;
      for (int i = 0; i < spec.sequences_per_cell; ++i) {
        std::vector<int> fragment;
        for (int attempt = 0;; ++attempt) {
          fragment = source(len, rng);
          if (static_cast<int>(fragment.size()) != len) throw std::invalid_argument("fragment source returned wrong length");
          for (int& p : fragment) p = wrap_pitch(p, spec.alphabet);
          if (used.insert(fragment).second) break;
          if (attempt > 1000) throw std::runtime_error("fragment source cannot produce enough distinct fragments");
        }
        const char* split = i < spec.train_per_cell                       ? "train"
                            : i < spec.train_per_cell + spec.test_per_cell ? "test"
                                                                           : "eval";
        auto seq = make_monophonic(realize_scheme(fragment, spec.schemes[s], spec.sequence_length, spec.alphabet),
                                   spec.alphabet,
                                   "s" + std::to_string(s) + "-L" + std::to_string(len) + "-" + split + "-" +
                                       std::to_string(i),
                                   static_cast<int>(s));
        Corpus& dst = i < spec.train_per_cell                       ? data.train
                      : i < spec.train_per_cell + spec.test_per_cell ? data.test
                                                                     : data.eval;
        dst.push_back(std::move(seq));
      }
    }
  }
  return data;
}

bool verify_scheme(const FrameSequence& seq, const TranspositionScheme& scheme, int fragment_length) {
  if (!seq.monophonic() || fragment_length <= 0) return false;
  const auto len = static_cast<std::size_t>(fragment_length);
  for (std::size_t t = len; t < seq.size(); ++t) {
    const int expected = wrap_pitch(static_cast<long long>(seq.pitch(t - len)) + scheme.delta(t / len - 1), seq.alphabet);
    if (seq.pitch(t) != expected) return false;
  }
  return true;
}

// ---------------------------------------------------------------------------

std::vector<Fold> kfold_split(std::size_t corpus_size, int k, std::uint64_t seed) {
  if (k < 1) throw std::invalid_argument("k must be at least 1");
  if (static_cast<std::size_t>(k) > corpus_size) throw std::invalid_argument("k exceeds the corpus size");
  std::vector<std::size_t> perm(corpus_size);
  for (std::size_t i = 0; i < corpus_size; ++i) perm[i] = i;
  Rng rng = Rng::derive(seed, "kfold");
  rng.shuffle(perm);

  std::vector<Fold> folds(static_cast<std::size_t>(k));
  const std::size_t base = corpus_size / static_cast<std::size_t>(k);
  const std::size_t extra = corpus_size % static_cast<std::size_t>(k);
  std::vector<int> owner(corpus_size);
  std::size_t pos = 0;
  for (std::size_t f = 0; f < folds.size(); ++f) {
    const std::size_t size = base + (f < extra ? 1 : 0);
    for (std::size_t i = 0; i < size; ++i) owner[perm[pos++]] = static_cast<int>(f);
  }
  for (std::size_t idx = 0; idx < corpus_size; ++idx)
    for (std::size_t f = 0; f < folds.size(); ++f)
      (owner[idx] == static_cast<int>(f) ? folds[f].test : folds[f].train).push_back(idx);
  return folds;
}

Corpus select(const Corpus& corpus, const std::vector<std::size_t>& indices) {
  Corpus out;
  out.reserve(indices.size());
  for (std::size_t i : indices) out.push_back(corpus.at(i));
  return out;
}

int augment_transpose(Corpus& batch, int delta_min, int delta_max, std::uint64_t seed) {
  Rng rng = Rng::derive(seed, "augment");
  const int delta = static_cast<int>(rng.uniform_int(delta_min, delta_max));
  for (auto& seq : batch) seq = shift(seq, delta);
  return delta;
}

Corpus generate_scale_melodies(int count, int length, int alphabet, std::uint64_t seed) {
  static constexpr int kMajor[] = {0, 2, 4, 5, 7, 9, 11};
  // Scale degrees that fit in the alphabet, tonic at pitch 0 mod 12.
  std::vector<int> scale;
  for (int p = 0; p < alphabet; ++p)
    if (std::find(std::begin(kMajor), std::end(kMajor), p % 12) != std::end(kMajor)) scale.push_back(p);
  if (scale.size() < 8) throw std::invalid_argument("alphabet too small for scale melodies");
  const int top = static_cast<int>(scale.size()) - 1;
  const int lo = top / 4;
  const int hi = top - top / 4;

  Corpus corpus;
  Rng rng = Rng::derive(seed, "scale-melodies");
  for (int i = 0; i < count; ++i) {
    std::vector<int> degrees;
    int d = static_cast<int>(rng.uniform_int(lo, hi));
    while (static_cast<int>(degrees.size()) < length) {
      // Phrases of four notes; half of them repeat the previous phrase a step away.
      if (degrees.size() >= 4 && rng.bernoulli(0.5)) {
        const int step = static_cast<int>(rng.uniform_int(-2, 2));
        const std::size_t from = degrees.size() - 4;
        bool fits = true;
        for (std::size_t j = 0; j < 4; ++j) fits = fits && degrees[from + j] + step >= 0 && degrees[from + j] + step <= top;
        if (fits) {
          for (std::size_t j = 0; j < 4 && static_cast<int>(degrees.size()) < length; ++j)
            degrees.push_back(degrees[from + j] + step);
          d = degrees.back();
          continue;
        }
      }
      for (int j = 0; j < 4 && static_cast<int>(degrees.size()) < length; ++j) {
        const double u = rng.uniform();
        const int step = u < 0.35 ? -1 : u < 0.7 ? 1 : u < 0.8 ? 0 : u < 0.9 ? (rng.bernoulli(0.5) ? -2 : 2)
                                                                          : static_cast<int>(rng.uniform_int(-4, 4));
        d = std::clamp(d + step, 0, top);
        if (d < lo - 2) d = lo;
        if (d > hi + 2) d = hi;
        degrees.push_back(d);
      }
    }
    std::vector<int> pitches;
    for (int deg : degrees) pitches.push_back(scale[static_cast<std::size_t>(deg)]);
    corpus.push_back(make_monophonic(pitches, alphabet, "melody-" + std::to_string(i)));
  }
  return corpus;
}

}  // namespace rgae
