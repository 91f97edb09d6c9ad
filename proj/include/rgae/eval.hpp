#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "rgae/baseline.hpp"
#include "rgae/frames.hpp"
#include "rgae/gae.hpp"
#include "rgae/predictor.hpp"
#include "rgae/rgae.hpp"

namespace rgae {

struct CeResult {
  double mean_bits = 0.0;             // over all prediction events
  std::vector<double> per_sequence;   // mean bits of each sequence
  std::size_t events = 0;
};

/// Teacher-forced cross-entropy in bits. Sequences must be monophonic and
/// share the model's alphabet. The reduction does not depend on corpus order.
CeResult evaluate_ce(const SequenceModel& model, const Corpus& corpus);

struct ContinuationResult {
  double precision_mean = 0.0;        // in [0, 1]
  double pct_above = 0.0;             // percentage of sequences with precision > threshold
  std::vector<double> per_sequence;
};

/// Continues each sequence from its first `primer_len` frames by argmax
/// feedback and scores the generated pitches against the ground truth.
ContinuationResult evaluate_continuation(const SequenceModel& model, const Corpus& corpus, int primer_len = 64,
                                         double threshold = 0.99);

std::size_t count_parameters(const GaeParams& p);
std::size_t count_parameters(const GruParams& p);
std::size_t count_parameters(const RgaeModel& m);
std::size_t count_parameters(const BaselineModel& m);

/// Closed-form counts, for sizes too large to allocate casually.
std::size_t rgae_parameter_count(int context, int alphabet, int factors, int mappings, int hidden);
std::size_t baseline_parameter_count(int window, int alphabet, int hidden);

// ---------------------------------------------------------------------------
// Reports
//
//   # rgae-report v1
//   model_kind=<text>
//   param_count=<int>
//   config_digest=<16 hex digits>
//   sequences=<int>
//   mean_ce_bits=<%.6f>
//   precision_mean=<%.6f>        (continuation reports only)
//   pct_above_99=<%.6f>          (continuation reports only)
//   extra.<key>=<%.6f>           (zero or more, in insertion order)
//   seq <i> ce=<%.6f> [precision=<%.6f>]
// ---------------------------------------------------------------------------

struct EvalReport {
  std::string model_kind;
  std::size_t param_count = 0;
  std::string config_digest;
  double mean_ce_bits = 0.0;
  std::vector<double> per_sequence_ce;
  std::optional<double> precision_mean;
  std::optional<double> pct_above_99;
  std::vector<double> per_sequence_precision;
  std::vector<std::pair<std::string, double>> extras;

  /// Copy with every number rounded to the printed precision.
  EvalReport rounded() const;
  bool operator==(const EvalReport&) const = default;
};

/// Hex FNV-1a digest of a canonical configuration text.
std::string digest_text(std::string_view text);

void emit_report(std::ostream& out, const EvalReport& report);
/// Writes through a temporary file and rename.
void emit_report(const std::string& path, const EvalReport& report);
EvalReport parse_report(std::istream& in);
EvalReport parse_report(const std::string& path);

/// Metric lookup for threshold assertions: mean_ce_bits, precision_mean,
/// pct_above_99, param_count or extra.<key>.
std::optional<double> report_metric(const EvalReport& report, std::string_view name);

}  // namespace rgae
