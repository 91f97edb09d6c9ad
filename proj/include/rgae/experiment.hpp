#pragma once

#include <functional>
#include <map>
#include <string>
#include <vector>

#include "rgae/baseline.hpp"
#include "rgae/config.hpp"
#include "rgae/data.hpp"
#include "rgae/eval.hpp"
#include "rgae/gae.hpp"
#include "rgae/rgae.hpp"

namespace rgae {

/// Progress sink for per-epoch log lines.
using LogFn = std::function<void(const std::string&)>;

GaeParams init_gae(const RunConfig& config);
RgaeModel init_rgae(const RunConfig& config, GaeParams gae);
BaselineModel init_baseline(const RunConfig& config);

/// Builds the corpus requested by data.kind.
SchemeDataset generate_data(const RunConfig& config);
FragmentSource make_fragment_source(const RunConfig& config);

/// GAE pre-training then RGAE training on one corpus, from scratch.
RgaeModel fit_rgae(const RunConfig& config, const Corpus& train, const LogFn& log = {});
BaselineModel fit_baseline(const RunConfig& config, const Corpus& train, const LogFn& log = {});

struct CrossValidation {
  /// Per model name ("rgae", "baseline", "ensemble"): CE of every sequence,
  /// indexed like the input corpus.
  std::map<std::string, std::vector<double>> per_sequence;
  /// Event-weighted mean CE over all test folds.
  std::map<std::string, double> mean_bits;
  std::map<std::string, std::size_t> parameters;
};

/// k-fold CV: per fold, fits the requested models on the training part and
/// scores the held-out part. "ensemble" needs both "rgae" and "baseline".
CrossValidation cross_validate(const RunConfig& config, const Corpus& corpus, const LogFn& log = {});

}  // namespace rgae
