#include "rgae/cli.hpp"

#include <CLI11.hpp>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include "rgae/config.hpp"
#include "rgae/ensemble.hpp"
#include "rgae/eval.hpp"
#include "rgae/experiment.hpp"
#include "rgae/serialize.hpp"

namespace rgae {

namespace {

namespace fs = std::filesystem;

struct Options {
  std::string config;
  std::optional<long long> seed;
  std::string out;
  std::optional<double> scale;
  std::vector<std::string> asserts;
  std::vector<std::string> sets;
  bool resume = false;
  std::optional<int> stop_after;
};

/// Thrown from an epoch callback to end a run early; the checkpoint stays.
struct StopTraining {};

struct Assertion {
  std::string metric;
  bool at_most = false;
  double threshold = 0.0;
  std::string text;
};

bool lower_is_better(const std::string& metric) {
  return metric.find("ce") != std::string::npos || metric.find("loss") != std::string::npos;
}

Assertion parse_assertion(const std::string& s) {
  Assertion a;
  a.text = s;
  std::size_t pos = s.find(">=");
  std::size_t len = 2;
  if (pos != std::string::npos) {
    a.at_most = false;
  } else if ((pos = s.find("<=")) != std::string::npos) {
    a.at_most = true;
  } else if ((pos = s.find('=')) != std::string::npos) {
    len = 1;
    a.at_most = lower_is_better(s.substr(0, pos));
  } else {
    throw ConfigError("--assert expects <metric>=<threshold>, got '" + s + "'");
  }
  a.metric = s.substr(0, pos);
  const std::string value = s.substr(pos + len);
  std::size_t used = 0;
  try {
    a.threshold = std::stod(value, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (a.metric.empty() || used == 0 || used != value.size()) throw ConfigError("--assert: bad threshold in '" + s + "'");
  return a;
}

class Command {
 public:
  Command(const Options& opt, std::ostream& err) : opt_(opt), err_(err) {
    if (!opt.config.empty()) values_.load_file(opt.config);
    for (const auto& kv : opt.sets) {
      const auto eq = kv.find('=');
      if (eq == std::string::npos) throw ConfigError("--set expects key=value, got '" + kv + "'");
      values_.set(kv.substr(0, eq), kv.substr(eq + 1));
    }
    if (opt.seed) values_.set("seed", std::to_string(*opt.seed));
    if (opt.scale) apply_scale(*opt.scale);
    cfg_ = make_run_config(values_);
    for (const auto& a : opt.asserts) asserts_.push_back(parse_assertion(a));
  }

  const RunConfig& cfg() const { return cfg_; }
  const ConfigValues& values() const { return values_; }

  void log(const std::string& line) const { err_ << line << std::endl; }
  LogFn logger() const {
    return [this](const std::string& s) { log(s); };
  }

  const std::string& out() const {
    if (opt_.out.empty()) throw ConfigError("--out is required for this command");
    return opt_.out;
  }
  bool resume() const { return opt_.resume; }
  std::optional<int> stop_after() const { return opt_.stop_after; }

  static void require_file(const std::string& path, const std::string& key) {
    if (path.empty()) throw ConfigError(key + " is not set");
    if (!fs::is_regular_file(path)) throw ConfigError(key + ": file '" + path + "' does not exist");
  }

  /// Checks that every --assert names a known metric, before running.
  void check_metrics(const std::vector<std::string>& known) const {
    for (const auto& a : asserts_) {
      bool ok = a.metric.starts_with("extra.");
      for (const auto& k : known) ok |= k == a.metric;
      if (!ok) throw ConfigError("--assert: unknown metric '" + a.metric + "' for this command");
    }
  }

  int evaluate(const std::function<std::optional<double>(const std::string&)>& lookup) const {
    int code = kExitOk;
    for (const auto& a : asserts_) {
      const auto v = lookup(a.metric);
      if (!v) throw ConfigError("--assert: metric '" + a.metric + "' is not available");
      const bool pass = a.at_most ? *v <= a.threshold : *v >= a.threshold;
      char buf[256];
      std::snprintf(buf, sizeof buf, "assert %s %s %.6f: %s (value %.6f)", a.metric.c_str(), a.at_most ? "<=" : ">=",
                    a.threshold, pass ? "PASS" : "FAIL", *v);
      log(buf);
      if (!pass) code = kExitAssertion;
    }
    return code;
  }

 private:
  void apply_scale(double s) {
    if (!(s > 0.0)) throw ConfigError("--scale must be positive");
    auto scaled = [&](const std::string& key) {
      const long long v = std::stoll(values_.get(key));
      if (v == 0) return;
      values_.set(key, std::to_string(std::max(1LL, std::llround(static_cast<double>(v) * s))));
    };
    scaled("data.train_per_cell");
    scaled("data.test_per_cell");
    scaled("data.eval_per_cell");
    scaled("data.melodies");
  }

  const Options& opt_;
  std::ostream& err_;
  ConfigValues values_;
  RunConfig cfg_;
  std::vector<Assertion> asserts_;
};

void write_text_atomic(const std::string& path, const std::string& text) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open '" + tmp + "' for writing");
    out << text;
    out.flush();
    if (!out) throw std::runtime_error("write to '" + tmp + "' failed");
  }
  fs::rename(tmp, path);
}

Corpus load_corpus(const std::string& path, const RunConfig& cfg) { return read_corpus(path, cfg.data.alphabet); }

// ---------------------------------------------------------------------------
// Training commands share trace and checkpoint handling.
// ---------------------------------------------------------------------------

class TrainingRun {
 public:
  TrainingRun(const Command& cmd, int total_epochs) : cmd_(cmd), total_(total_epochs) {}

  std::string checkpoint_path() const { return cmd_.out() + ".ckpt"; }
  std::string trace_path() const { return cmd_.out() + ".trace"; }

  /// Returns the checkpoint to resume from, if --resume was given.
  std::optional<TensorFile> resume_point() {
    if (!cmd_.resume()) return std::nullopt;
    if (!fs::is_regular_file(checkpoint_path()))
      throw ConfigError("--resume: no checkpoint at '" + checkpoint_path() + "'");
    TensorFile ckpt = read_tensor_file(checkpoint_path());
    const int epoch = get_epoch(ckpt);
    std::ifstream in(trace_path());
    std::string line;
    while (static_cast<int>(trace_.size()) < epoch && std::getline(in, line)) trace_.push_back(line);
    if (static_cast<int>(trace_.size()) != epoch)
      throw ConfigError("--resume: trace '" + trace_path() + "' is shorter than the checkpoint epoch");
    cmd_.log("resuming at epoch " + std::to_string(epoch));
    return ckpt;
  }

  /// Appends the epoch to the trace and writes both files atomically.
  void record(int epoch, double loss, double rate, TensorFile checkpoint) {
    char buf[96];
    std::snprintf(buf, sizeof buf, "%d %.9f %.9g", epoch, loss, rate);
    trace_.emplace_back(buf);
    write_trace();
    set_epoch(checkpoint, epoch + 1);
    write_tensor_file(checkpoint_path(), checkpoint);
    ++ran_;
    if (cmd_.stop_after() && ran_ >= *cmd_.stop_after() && epoch + 1 < total_) {
      cmd_.log("stopping after epoch " + std::to_string(epoch) + "; continue with --resume");
      throw StopTraining{};
    }
  }

  void finish(const TensorFile& model) {
    write_trace();
    write_tensor_file(cmd_.out(), model);
  }

  std::optional<double> final_loss() const {
    if (trace_.empty()) return std::nullopt;
    std::istringstream in(trace_.back());
    int e = 0;
    double loss = 0.0;
    in >> e >> loss;
    return loss;
  }

  int epochs_recorded() const { return static_cast<int>(trace_.size()); }
  int total() const { return total_; }

 private:
  void write_trace() const {
    std::string text;
    for (const auto& l : trace_) text += l + "\n";
    write_text_atomic(trace_path(), text);
  }

  const Command& cmd_;
  int total_;
  int ran_ = 0;
  std::vector<std::string> trace_;
};

std::string format_epoch(const char* tag, int epoch, double loss, double rate, double secs) {
  char buf[160];
  std::snprintf(buf, sizeof buf, "%s epoch %d loss %.6f lr %.6g time %.1fs", tag, epoch, loss, rate, secs);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

int training_exit(const Command& cmd, const TrainingRun& run) {
  return cmd.evaluate([&](const std::string& m) -> std::optional<double> {
    if (m == "final_loss") return run.final_loss();
    if (m == "epochs") return static_cast<double>(run.epochs_recorded());
    return std::nullopt;
  });
}

int cmd_gen_data(const Command& cmd) {
  cmd.check_metrics({"train_sequences", "test_sequences", "eval_sequences"});
  const auto& cfg = cmd.cfg();
  if (cfg.fragment_source == "corpus" && cfg.data_kind == "schemes")
    Command::require_file(cfg.fragment_corpus, "data.fragment_corpus");
  const fs::path dir = cmd.out();
  fs::create_directories(dir);
  const SchemeDataset data = generate_data(cfg);
  write_corpus((dir / "train.txt").string(), data.train);
  write_corpus((dir / "test.txt").string(), data.test);
  write_corpus((dir / "eval.txt").string(), data.eval);
  std::ostringstream manifest;
  manifest << "# generated corpus manifest\n";
  manifest << "config_digest=" << cfg.digest << '\n';
  manifest << "train_sequences=" << data.train.size() << '\n';
  manifest << "test_sequences=" << data.test.size() << '\n';
  manifest << "eval_sequences=" << data.eval.size() << '\n';
  if (cfg.data_kind == "schemes") {
    for (std::size_t i = 0; i < cfg.data.schemes.size(); ++i)
      manifest << "scheme." << i << '=' << cfg.data.schemes[i].to_string() << '\n';
  }
  manifest << "# config\n" << cmd.values().canonical();
  write_text_atomic((dir / "manifest.txt").string(), manifest.str());
  cmd.log("wrote " + std::to_string(data.train.size()) + " train, " + std::to_string(data.test.size()) + " test, " +
          std::to_string(data.eval.size()) + " eval sequences to " + dir.string());
  return cmd.evaluate([&](const std::string& m) -> std::optional<double> {
    if (m == "train_sequences") return static_cast<double>(data.train.size());
    if (m == "test_sequences") return static_cast<double>(data.test.size());
    if (m == "eval_sequences") return static_cast<double>(data.eval.size());
    return std::nullopt;
  });
}

int cmd_pretrain(const Command& cmd) {
  cmd.check_metrics({"final_loss", "epochs"});
  const auto& cfg = cmd.cfg();
  Command::require_file(cfg.train_path, "path.train");
  cmd.out();
  const Corpus train = load_corpus(cfg.train_path, cfg);
  TrainingRun run(cmd, cfg.pretrain.epochs);

  GaeParams gae = init_gae(cfg);
  RmsPropState state = make_pretrain_state(gae, cfg.pretrain);
  int first = 0;
  if (auto ckpt = run.resume_point()) {
    gae = gae_from_file(*ckpt);
    auto t = gae.tensors();
    if (!restore_optimizer(*ckpt, state, t)) throw ConfigError("checkpoint holds no optimizer state");
    first = get_epoch(*ckpt);
  }
  const auto start = std::chrono::steady_clock::now();
  try {
    pretrain_gae(gae, train, cfg.pretrain, state, first, [&](int epoch, double loss, double rate) {
      cmd.log(format_epoch("pretrain", epoch, loss, rate, seconds_since(start)));
      TensorFile ckpt = to_tensor_file(gae);
      auto t = gae.tensors();
      append_optimizer(ckpt, state, t);
      run.record(epoch, loss, rate, std::move(ckpt));
    });
  } catch (const StopTraining&) {
    return kExitOk;
  }
  run.finish(to_tensor_file(gae));
  return training_exit(cmd, run);
}

int cmd_train(const Command& cmd) {
  cmd.check_metrics({"final_loss", "epochs"});
  const auto& cfg = cmd.cfg();
  Command::require_file(cfg.train_path, "path.train");
  if (cfg.gae_path.empty() && !cmd.resume())
    throw ConfigError("train needs a pre-trained GAE: run 'pretrain' and set path.gae to its model file");
  if (!cmd.resume()) Command::require_file(cfg.gae_path, "path.gae");
  cmd.out();
  const Corpus train = load_corpus(cfg.train_path, cfg);
  TrainingRun run(cmd, cfg.rgae_train.epochs);

  RgaeModel model;
  RgaeOptimizer opt;
  int first = 0;
  if (auto ckpt = run.resume_point()) {
    model = rgae_from_file(*ckpt);
    opt = make_rgae_optimizer(model, cfg.rgae_train);
    auto g = model.gru.tensors();
    if (!restore_optimizer(*ckpt, opt.gru, g)) throw ConfigError("checkpoint holds no optimizer state");
    auto q = model.gae.tensors();
    opt.gae = RmsPropState(cfg.rgae_train.rmsprop, q);
    opt.has_gae = restore_optimizer(*ckpt, opt.gae, q);
    first = get_epoch(*ckpt);
  } else {
    const LoadedModel loaded = load_model(cfg.gae_path);
    if (loaded.kind != ModelKind::kGae) throw ConfigError("path.gae must point to a GAE model file");
    if (loaded.gae->shape.alphabet != cfg.data.alphabet)
      throw ConfigError("pre-trained GAE alphabet does not match data.alphabet");
    model = init_rgae(cfg, *loaded.gae);
    opt = make_rgae_optimizer(model, cfg.rgae_train);
  }
  const auto start = std::chrono::steady_clock::now();
  try {
    train_rgae(model, train, cfg.rgae_train, opt, first, [&](int epoch, double loss, double rate) {
      cmd.log(format_epoch("train", epoch, loss, rate, seconds_since(start)));
      TensorFile ckpt = to_tensor_file(model);
      auto g = model.gru.tensors();
      append_optimizer(ckpt, opt.gru, g);
      if (opt.has_gae) {
        auto q = model.gae.tensors();
        append_optimizer(ckpt, opt.gae, q);
      }
      run.record(epoch, loss, rate, std::move(ckpt));
    });
  } catch (const StopTraining&) {
    return kExitOk;
  }
  run.finish(to_tensor_file(model));
  return training_exit(cmd, run);
}

int cmd_train_baseline(const Command& cmd) {
  cmd.check_metrics({"final_loss", "epochs"});
  const auto& cfg = cmd.cfg();
  Command::require_file(cfg.train_path, "path.train");
  cmd.out();
  const Corpus train = load_corpus(cfg.train_path, cfg);
  TrainingRun run(cmd, cfg.baseline_train.epochs);

  BaselineModel model = init_baseline(cfg);
  RmsPropState opt = make_rnn_optimizer(model, cfg.baseline_train);
  int first = 0;
  if (auto ckpt = run.resume_point()) {
    model = baseline_from_file(*ckpt);
    auto t = model.tensors();
    if (!restore_optimizer(*ckpt, opt, t)) throw ConfigError("checkpoint holds no optimizer state");
    first = get_epoch(*ckpt);
  }
  const auto start = std::chrono::steady_clock::now();
  try {
    train_rnn(model, train, cfg.baseline_train, opt, first, [&](int epoch, double loss, double rate) {
      cmd.log(format_epoch("baseline", epoch, loss, rate, seconds_since(start)));
      TensorFile ckpt = to_tensor_file(model);
      auto t = model.tensors();
      append_optimizer(ckpt, opt, t);
      run.record(epoch, loss, rate, std::move(ckpt));
    });
  } catch (const StopTraining&) {
    return kExitOk;
  }
  run.finish(to_tensor_file(model));
  return training_exit(cmd, run);
}

// ---------------------------------------------------------------------------

const std::vector<std::string> kReportMetrics = {"mean_ce_bits", "precision_mean", "pct_above_99", "param_count"};

int finish_report(const Command& cmd, const EvalReport& report) {
  emit_report(cmd.out(), report);
  char buf[160];
  std::snprintf(buf, sizeof buf, "mean_ce_bits %.6f", report.mean_ce_bits);
  cmd.log(buf);
  if (report.precision_mean) {
    std::snprintf(buf, sizeof buf, "precision_mean %.6f pct_above_99 %.6f", *report.precision_mean,
                  *report.pct_above_99);
    cmd.log(buf);
  }
  return cmd.evaluate([&](const std::string& m) { return report_metric(report, m); });
}

std::size_t model_parameters(const LoadedModel& m) {
  if (m.rgae) return count_parameters(*m.rgae);
  if (m.baseline) return count_parameters(*m.baseline);
  return count_parameters(*m.gae);
}

const SequenceModel& require_predictor(const LoadedModel& m, const std::string& path) {
  if (!m.predictor()) throw ConfigError("'" + path + "' is a bare GAE; a predictive model is required");
  return *m.predictor();
}

int cmd_eval(const Command& cmd) {
  cmd.check_metrics(kReportMetrics);
  const auto& cfg = cmd.cfg();
  cmd.out();
  EvalReport report;
  report.config_digest = cfg.digest;
  if (cfg.folds > 0) {
    Command::require_file(cfg.train_path, "path.train");
    if (cfg.cv_models.empty()) throw ConfigError("eval.models must list at least one model");
    const Corpus corpus = load_corpus(cfg.train_path, cfg);
    const CrossValidation cv = cross_validate(cfg, corpus, cmd.logger());
    const std::string primary =
        std::find(cfg.cv_models.begin(), cfg.cv_models.end(), "ensemble") != cfg.cv_models.end() ? "ensemble"
                                                                                                  : cfg.cv_models.front();
    report.model_kind = "cv-" + primary;
    report.param_count = cv.parameters.at(primary);
    report.mean_ce_bits = cv.mean_bits.at(primary);
    report.per_sequence_ce = cv.per_sequence.at(primary);
    for (const auto& m : cfg.cv_models) report.extras.emplace_back(m + "_ce", cv.mean_bits.at(m));
  } else {
    Command::require_file(cfg.model_path, "path.model");
    Command::require_file(cfg.eval_path, "path.eval");
    const LoadedModel model = load_model(cfg.model_path);
    const Corpus corpus = load_corpus(cfg.eval_path, cfg);
    const CeResult ce = evaluate_ce(require_predictor(model, cfg.model_path), corpus);
    report.model_kind = to_string(model.kind);
    report.param_count = model_parameters(model);
    report.mean_ce_bits = ce.mean_bits;
    report.per_sequence_ce = ce.per_sequence;
  }
  return finish_report(cmd, report);
}

int cmd_continue(const Command& cmd) {
  cmd.check_metrics(kReportMetrics);
  const auto& cfg = cmd.cfg();
  Command::require_file(cfg.model_path, "path.model");
  Command::require_file(cfg.eval_path, "path.eval");
  cmd.out();
  const LoadedModel loaded = load_model(cfg.model_path);
  const SequenceModel& model = require_predictor(loaded, cfg.model_path);
  const Corpus corpus = load_corpus(cfg.eval_path, cfg);
  const ContinuationResult cont = evaluate_continuation(model, corpus, cfg.primer, cfg.threshold);
  const CeResult ce = evaluate_ce(model, corpus);

  Corpus generated;
  for (const auto& seq : corpus) {
    FrameSequence primer = seq;
    primer.frames.resize(static_cast<std::size_t>(cfg.primer));
    FrameSequence g = continue_sequence(model, primer, seq.size() - primer.size());
    g.source_id = seq.source_id;
    g.scheme_id = seq.scheme_id;
    generated.push_back(std::move(g));
  }
  write_corpus(cmd.out() + ".continuations", generated);

  EvalReport report;
  report.model_kind = to_string(loaded.kind);
  report.param_count = model_parameters(loaded);
  report.config_digest = cfg.digest;
  report.mean_ce_bits = ce.mean_bits;
  report.per_sequence_ce = ce.per_sequence;
  report.precision_mean = cont.precision_mean;
  report.pct_above_99 = cont.pct_above;
  report.per_sequence_precision = cont.per_sequence;
  return finish_report(cmd, report);
}

int cmd_ensemble(const Command& cmd) {
  cmd.check_metrics(kReportMetrics);
  const auto& cfg = cmd.cfg();
  if (cfg.member_paths.size() < 2) throw ConfigError("path.members must list at least two model files");
  for (const auto& p : cfg.member_paths) Command::require_file(p, "path.members");
  Command::require_file(cfg.eval_path, "path.eval");
  cmd.out();
  std::vector<LoadedModel> loaded;
  std::vector<const SequenceModel*> members;
  for (const auto& p : cfg.member_paths) {
    loaded.push_back(load_model(p));
    members.push_back(&require_predictor(loaded.back(), p));
  }
  for (const auto* m : members)
    if (m->alphabet() != members.front()->alphabet()) throw ConfigError("ensemble members have mismatched alphabets");
  const EnsembleModel ensemble(members, cfg.ensemble);
  const Corpus corpus = load_corpus(cfg.eval_path, cfg);

  EvalReport report;
  report.model_kind = "ensemble";
  report.config_digest = cfg.digest;
  for (std::size_t i = 0; i < members.size(); ++i) {
    report.param_count += model_parameters(loaded[i]);
    report.extras.emplace_back("member" + std::to_string(i) + "_ce", evaluate_ce(*members[i], corpus).mean_bits);
  }
  const CeResult ce = evaluate_ce(ensemble, corpus);
  report.mean_ce_bits = ce.mean_bits;
  report.per_sequence_ce = ce.per_sequence;
  return finish_report(cmd, report);
}

// ---------------------------------------------------------------------------

struct Parser {
  CLI::App app{"Recurrent gated autoencoder toolkit", "rgae"};
  Options opt;
  std::vector<std::pair<CLI::App*, int (*)(const Command&)>> commands;

  Parser() {
    app.require_subcommand(1);
    app.footer(config_help_text());
    add("gen-data", "generate copy-and-shift or melody corpora into --out/", cmd_gen_data);
    add("pretrain", "pre-train a GAE on path.train, write the model to --out", cmd_pretrain);
    add("train", "train an RGAE on path.train on top of path.gae", cmd_train);
    add("train-baseline", "train the baseline GRU on path.train", cmd_train_baseline);
    add("eval", "cross-entropy of path.model on path.eval, or k-fold CV on path.train", cmd_eval);
    add("continue", "continuation precision of path.model on path.eval", cmd_continue);
    add("ensemble", "entropy-weighted ensemble of path.members on path.eval", cmd_ensemble);
  }

  void add(const char* name, const char* doc, int (*fn)(const Command&)) {
    CLI::App* sub = app.add_subcommand(name, doc);
    sub->add_option("--config", opt.config, "config file (key = value, include <preset>)");
    sub->add_option("--seed", opt.seed, "override the seed key");
    sub->add_option("--out", opt.out, "output file (directory for gen-data)");
    sub->add_option("--scale", opt.scale, "scale generated corpus sizes");
    sub->add_option("--assert", opt.asserts, "<metric>=<threshold>; exit 1 if not met")->take_all();
    sub->add_option("--set", opt.sets, "key=value config override")->take_all();
    sub->add_flag("--resume", opt.resume, "continue training from <out>.ckpt");
    sub->add_option("--stop-after", opt.stop_after, "train at most N epochs in this run, keeping the checkpoint")
        ->check(CLI::PositiveNumber);
    commands.emplace_back(sub, fn);
  }
};

}  // namespace

std::string cli_help_text() {
  Parser p;
  return p.app.help();
}

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  Parser p;
  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    p.app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << p.app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << p.app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n" << "run with --help for usage\n";
    return kExitUsage;
  }
  for (const auto& [sub, fn] : p.commands) {
    if (!sub->parsed()) continue;
    try {
      const Command cmd(p.opt, err);
      return fn(cmd);
    } catch (const ConfigError& e) {
      err << "config error: " << e.what() << "\n";
      return kExitUsage;
    } catch (const std::exception& e) {
      err << "error: " << e.what() << "\n";
      return kExitUsage;
    }
  }
  return kExitUsage;
}

}  // namespace rgae
