#include "rgae/experiment.hpp"

#include <chrono>
#include <cstdio>
#include <stdexcept>

#include "rgae/ensemble.hpp"

namespace rgae {

namespace {

EpochCallback epoch_logger(const LogFn& log, std::string tag) {
  if (!log) return {};
  auto start = std::chrono::steady_clock::now();
  return [log, tag = std::move(tag), start](int epoch, double loss, double rate) {
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    char buf[160];
    std::snprintf(buf, sizeof buf, "%s epoch %d loss %.6f lr %.6g time %.1fs", tag.c_str(), epoch, loss, rate, secs);
    log(buf);
  };
}

RunConfig with_seed(RunConfig c, std::uint64_t seed) {
  c.seed = seed;
  c.data.seed = seed;
  c.pretrain.seed = seed;
  c.rgae_train.seed = seed;
  c.baseline_train.seed = seed;
  return c;
}

}  // namespace

GaeParams init_gae(const RunConfig& config) {
  Rng rng = Rng::derive(config.seed, "init-gae");
  GaeParams p = GaeParams::random(config.gae_shape, rng);
  p.wm *= config.mapping_gain;
  quantize_f32(p.wm);
  apply_norm_cap(p, config.pretrain.norm_cap);
  return p;
}

RgaeModel init_rgae(const RunConfig& config, GaeParams gae) {
  Rng rng = Rng::derive(config.seed, "init-rgae");
  return RgaeModel::create(std::move(gae), config.rgae_hidden, rng);
}

BaselineModel init_baseline(const RunConfig& config) {
  Rng rng = Rng::derive(config.seed, "init-baseline");
  return BaselineModel::create(config.baseline_window, config.data.alphabet, config.baseline_hidden, rng);
}

FragmentSource make_fragment_source(const RunConfig& config) {
  if (config.fragment_source == "corpus") {
    if (config.fragment_corpus.empty()) throw ConfigError("data.fragment_source=corpus needs data.fragment_corpus");
    return corpus_fragment_source(read_corpus(config.fragment_corpus, config.data.alphabet));
  }
  return random_walk_source(config.walk_low, config.walk_high, config.walk_max_step);
}

SchemeDataset generate_data(const RunConfig& config) {
  if (config.data_kind == "melodies") {
    SchemeDataset d;
    d.train = generate_scale_melodies(config.melody_count, config.melody_length, config.data.alphabet, config.seed);
    return d;
  }
  return generate_scheme_dataset(config.data, make_fragment_source(config));
}

RgaeModel fit_rgae(const RunConfig& config, const Corpus& train, const LogFn& log) {
  GaeParams gae = init_gae(config);
  RmsPropState gae_state = make_pretrain_state(gae, config.pretrain);
  pretrain_gae(gae, train, config.pretrain, gae_state, 0, epoch_logger(log, "pretrain"));
  RgaeModel model = init_rgae(config, std::move(gae));
  RgaeOptimizer opt = make_rgae_optimizer(model, config.rgae_train);
  train_rgae(model, train, config.rgae_train, opt, 0, epoch_logger(log, "train"));
  return model;
}

BaselineModel fit_baseline(const RunConfig& config, const Corpus& train, const LogFn& log) {
  BaselineModel model = init_baseline(config);
  RmsPropState opt = make_rnn_optimizer(model, config.baseline_train);
  train_rnn(model, train, config.baseline_train, opt, 0, epoch_logger(log, "baseline"));
  return model;
}

CrossValidation cross_validate(const RunConfig& config, const Corpus& corpus, const LogFn& log) {
  if (config.folds < 2) throw ConfigError("cross-validation needs eval.folds >= 2");
  bool want_rgae = false, want_baseline = false, want_ensemble = false;
  for (const auto& m : config.cv_models) {
    want_rgae |= m == "rgae";
    want_baseline |= m == "baseline";
    want_ensemble |= m == "ensemble";
  }
  if (want_ensemble && !(want_rgae && want_baseline))
    throw ConfigError("eval.models: ensemble needs both rgae and baseline");

  CrossValidation cv;
  std::map<std::string, double> sum_bits;
  std::size_t events = 0;
  for (const auto& m : config.cv_models) cv.per_sequence[m].assign(corpus.size(), 0.0);

  const auto folds = kfold_split(corpus.size(), config.folds, config.seed);
  for (std::size_t f = 0; f < folds.size(); ++f) {
    if (log) log("fold " + std::to_string(f + 1) + "/" + std::to_string(folds.size()));
    const RunConfig fold_cfg = with_seed(config, Rng::derive(config.seed, "fold", f).next_u64() >> 2);
    const Corpus train = select(corpus, folds[f].train);
    std::unique_ptr<RgaeModel> rgae;
    std::unique_ptr<BaselineModel> baseline;
    if (want_rgae) rgae = std::make_unique<RgaeModel>(fit_rgae(fold_cfg, train, log));
    if (want_baseline) baseline = std::make_unique<BaselineModel>(fit_baseline(fold_cfg, train, log));
    if (f == 0) {
      if (rgae) cv.parameters["rgae"] = count_parameters(*rgae);
      if (baseline) cv.parameters["baseline"] = count_parameters(*baseline);
      if (want_ensemble) cv.parameters["ensemble"] = cv.parameters["rgae"] + cv.parameters["baseline"];
    }

    for (std::size_t idx : folds[f].test) {
      const FrameSequence& seq = corpus[idx];
      if (seq.size() < 2) continue;
      std::vector<Vector> pr, pb;
      if (rgae) pr = predict_sequence(*rgae, seq);
      if (baseline) pb = predict_sequence(*baseline, seq);
      std::map<std::string, double> bits;
      for (std::size_t t = 0; t + 1 < seq.size(); ++t) {
        const int target = seq.pitch(t + 1);
        if (rgae) bits["rgae"] += categorical_cross_entropy(target, pr[t]);
        if (baseline) bits["baseline"] += categorical_cross_entropy(target, pb[t]);
        if (want_ensemble) {
          const Vector both[] = {pr[t], pb[t]};
          bits["ensemble"] += categorical_cross_entropy(target, combine(both, config.ensemble));
        }
      }
      const double n = static_cast<double>(seq.size() - 1);
      for (const auto& [name, b] : bits) {
        cv.per_sequence[name][idx] = b / n;
        sum_bits[name] += b;
      }
      events += seq.size() - 1;
    }
  }
  for (const auto& m : config.cv_models) cv.mean_bits[m] = events ? sum_bits[m] / static_cast<double>(events) : 0.0;
  return cv;
}

}  // namespace rgae
