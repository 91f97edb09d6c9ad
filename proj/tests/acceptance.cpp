// End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
// exits non-zero if any fails.
//
//   rgae_acceptance [--work DIR] [--only 1,3,5] [--reuse]
//
// --reuse keeps trained models from an earlier run in DIR instead of starting
// from an empty directory.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>
#include <string>

#include "fixtures.hpp"
#include "oracle.hpp"
#include "rgae/cli.hpp"
#include "rgae/data.hpp"
#include "rgae/ensemble.hpp"
#include "rgae/eval.hpp"
#include "rgae/serialize.hpp"

using namespace rgae;
namespace fs = std::filesystem;

namespace {

// Tolerances and thresholds.
constexpr double kOracleTol = 1e-6;
constexpr double kGradTol = 1e-4;
constexpr int kGradSeeds = 20;
constexpr double kRgaePrecisionMin = 0.90;
constexpr double kRgaeFlawlessMin = 60.0;
constexpr double kBaselinePrecisionMax = 0.70;
constexpr double kCountTolerance = 0.10;
constexpr double kPaperRgaeCount = 600000.0;
constexpr double kPaperBaselineCount = 2300000.0;
constexpr double kCosineGapMin = 0.2;
constexpr int kCosinePairs = 1000;
constexpr double kCombineTol = 1e-9;
constexpr int kCombineCases = 100;
constexpr double kWorkedExampleTol = 1e-6;
constexpr double kEnsembleMargin = 0.05;

int failures = 0;

void report(const std::string& id, bool pass, const std::string& detail) {
  std::printf("[%s] criterion %s: %s\n", pass ? "PASS" : "FAIL", id.c_str(), detail.c_str());
  std::fflush(stdout);
  if (!pass) ++failures;
}

std::string fmt(const char* f, double a, double b = 0.0, double c = 0.0, double d = 0.0, double e = 0.0) {
  char buf[320];
  std::snprintf(buf, sizeof buf, f, a, b, c, d, e);
  return buf;
}

int cli(std::vector<std::string> args, const fs::path& log) {
  std::ostringstream out;
  std::ofstream err(log, std::ios::app);
  std::string line = "$ rgae";
  for (const auto& a : args) line += " " + a;
  err << line << std::endl;
  const int code = run_cli(args, out, err);
  err << "exit " << code << std::endl;
  return code;
}

void must(int code, const std::string& what) {
  if (code != kExitOk) throw std::runtime_error(what + " exited with " + std::to_string(code));
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

std::string preset(const std::string& name) { return std::string(RGAE_SOURCE_DIR) + "/configs/" + name + ".conf"; }

// ---------------------------------------------------------------------------

void criterion_1() {
  double worst = 0.0;
  for (std::uint64_t seed = 1; seed <= 50; ++seed) {
    Rng rng(seed);
    const int m = 2 + static_cast<int>(seed % 3), n = 1 + static_cast<int>(seed % 4);
    const int f = 1 + static_cast<int>((seed / 2) % 4), k = 1 + static_cast<int>((seed / 3) % 4);
    const int h = 1 + static_cast<int>((seed / 5) % 4);
    const RgaeModel rg = fixtures::tiny_rgae({n, m, f, k}, h, rng, 1.0);
    const FrameSequence s = fixtures::random_melody(static_cast<std::size_t>(n + 6), m, rng);
    worst = std::max(worst, oracle::max_abs_diff(oracle::rgae_forward(rg, s), rgae_forward(rg, s)));
    const BaselineModel bl = fixtures::tiny_baseline(n, m, h, rng, 1.0);
    worst = std::max(worst, oracle::max_abs_diff(oracle::rnn_forward(bl, s), rnn_forward(bl, s)));
  }
  report("1", worst < kOracleTol,
         fmt("RGAE and baseline forward vs loop oracle, 50 instances with dims <= 4: max abs diff %.3g (< %.0e)",
             worst, kOracleTol));
}

void criterion_2() {
  double worst = 0.0;
  bool all = true;
  auto note = [&](const GradCheckReport& r) {
    worst = std::max(worst, r.max_relative_error);
    all = all && r.passed;
  };
  for (std::uint64_t seed = 1; seed <= kGradSeeds; ++seed) {
    {
      Rng rng(seed);
      const GaeShape shape{2, 4, 3, 3};
      GaeParams p = fixtures::tiny_gae(shape, rng);
      const Corpus c = fixtures::random_corpus(2, 4, 6, 4, rng);
      const auto pairs = collect_pairs(c, 2);
      const auto batch = prepare_pretrain_batch(pairs, 4, static_cast<int>(rng.uniform_int(-3, 3)), 0.3, rng);
      const GaeRegularization reg{0.05, 0.1, 0.01};
      GaeParams g = GaeParams::zeros(shape);
      pretrain_loss(p, batch, reg, &g);
      auto pv = p.tensors();
      auto gv = g.tensors();
      note(grad_check([&] { return pretrain_loss(p, batch, reg).total(); }, pv, gv, kGradTol));
    }
    for (TrainMode mode : {TrainMode::kFrozenGae, TrainMode::kFinetune}) {
      Rng rng(seed);
      const GaeShape shape{2, 3, 3, 2};
      RgaeModel model = fixtures::tiny_rgae(shape, 3, rng, 0.7);
      const Corpus c = fixtures::random_corpus(2, 6, 7, 3, rng);
      const auto idx = fixtures::all_indices(c);
      const SequenceBatch batch = make_sequence_batch(c, idx, 0);
      const auto windows = window_columns(batch, 2, 0, batch.steps, 0.25, &rng);
      RgaeModel g(GaeParams::zeros(shape), GruParams::zeros(2, 3, 2));
      rgae_batch_loss(model, batch, windows, mode, &g);
      std::vector<TensorView> pv = model.gru.tensors(), gv = g.gru.tensors();
      if (mode == TrainMode::kFinetune) {
        for (auto& t : model.gae.tensors()) pv.push_back(t);
        for (auto& t : g.gae.tensors()) gv.push_back(t);
      }
      note(grad_check([&] { return rgae_batch_loss(model, batch, windows, mode, nullptr).mean(); }, pv, gv,
                      kGradTol));
    }
    {
      Rng rng(seed);
      BaselineModel model = fixtures::tiny_baseline(2, 3, 3, rng, 0.7);
      const Corpus c = fixtures::random_corpus(2, 5, 7, 3, rng);
      const auto idx = fixtures::all_indices(c);
      const SequenceBatch batch = make_sequence_batch(c, idx, 0);
      const auto inputs = window_columns(batch, 2, 1, batch.steps - 1, 0.25, &rng);
      GruParams g = GruParams::zeros(6, 3, 3);
      rnn_batch_loss(model, batch, inputs, &g);
      auto pv = model.tensors();
      auto gv = g.tensors();
      note(grad_check([&] { return rnn_batch_loss(model, batch, inputs, nullptr).mean(); }, pv, gv, kGradTol));
    }
  }
  report("2", all,
         fmt("pretrain (sparsity+norm), RGAE frozen/fine-tune (>= 5 steps), baseline; %.0f seeds each: max rel err "
             "%.3g (< %.0e)",
             kGradSeeds, worst, kGradTol));
}

struct DeskRun {
  fs::path dir;
  bool ok = false;
};

DeskRun run_desk(const fs::path& work) {
  DeskRun r;
  r.dir = work / "exp2-desk";
  fs::create_directories(r.dir);
  const fs::path log = r.dir / "log.txt";
  const std::string conf = preset("exp2-desk");
  const std::string d = (r.dir / "data").string();
  const std::string train = "path.train=" + d + "/train.txt";
  const std::string test = "path.eval=" + d + "/test.txt";
  const std::string gae = (r.dir / "gae.bin").string(), rg = (r.dir / "rgae.bin").string(),
                    bl = (r.dir / "baseline.bin").string();
  auto fresh = [](const std::string& p) { return !fs::exists(p); };
  if (fresh(d + "/train.txt")) must(cli({"gen-data", "--config", conf, "--out", d}, log), "gen-data");
  if (fresh(gae)) must(cli({"pretrain", "--config", conf, "--set", train, "--out", gae}, log), "pretrain");
  if (fresh(rg)) must(cli({"train", "--config", conf, "--set", train, "path.gae=" + gae, "--out", rg}, log), "train");
  if (fresh(bl)) must(cli({"train-baseline", "--config", conf, "--set", train, "--out", bl}, log), "train-baseline");
  must(cli({"continue", "--config", conf, "--set", "path.model=" + rg, test, "--out", (r.dir / "rgae.report").string()},
           log),
       "continue rgae");
  must(cli({"continue", "--config", conf, "--set", "path.model=" + bl, test, "--out",
            (r.dir / "baseline.report").string()},
           log),
       "continue baseline");
  r.ok = true;
  return r;
}

void criterion_3(const DeskRun& run) {
  const EvalReport rg = parse_report((run.dir / "rgae.report").string());
  const EvalReport bl = parse_report((run.dir / "baseline.report").string());
  report("3a", *rg.precision_mean >= kRgaePrecisionMin,
         fmt("RGAE mean continuation precision %.4f (>= %.2f)", *rg.precision_mean, kRgaePrecisionMin));
  report("3b", *rg.pct_above_99 >= kRgaeFlawlessMin,
         fmt("RGAE flawless continuations %.2f%% (>= %.0f%%)", *rg.pct_above_99, kRgaeFlawlessMin));
  report("3c", *bl.precision_mean <= kBaselinePrecisionMax,
         fmt("baseline mean continuation precision %.4f (<= %.2f)", *bl.precision_mean, kBaselinePrecisionMax));
  report("3d", rg.mean_ce_bits < bl.mean_ce_bits,
         fmt("RGAE mean CE %.4f bits < baseline mean CE %.4f bits", rg.mean_ce_bits, bl.mean_ce_bits));
}

void criterion_4(const DeskRun* run) {
  const double rg = static_cast<double>(rgae_parameter_count(16, 64, 512, 64, 64));
  const double bl = static_cast<double>(baseline_parameter_count(16, 64, 512));
  bool ok = std::abs(rg - kPaperRgaeCount) <= kCountTolerance * kPaperRgaeCount &&
            std::abs(bl - kPaperBaselineCount) <= kCountTolerance * kPaperBaselineCount;
  std::string extra;
  if (run) {
    const auto a = load_model((run->dir / "rgae.bin").string());
    const auto b = load_model((run->dir / "baseline.bin").string());
    ok = ok && count_parameters(*a.rgae) == static_cast<std::size_t>(rg) &&
         count_parameters(*b.baseline) == static_cast<std::size_t>(bl);
    extra = ", trained desk models agree";
  }
  report("4", ok,
         fmt("RGAE %.0f params (~600k +-10%%), baseline %.0f params (~2.3M +-10%%)", rg, bl) + extra);
}

void criterion_5(const DeskRun& run) {
  const GaeParams gae = gae_from_file(read_tensor_file((run.dir / "gae.bin").string()));
  const Corpus test = read_corpus((run.dir / "data" / "test.txt").string(), 64);
  const auto pairs = collect_pairs(test, gae.shape.context);
  Rng rng = Rng::derive(1, "acceptance-cosine");
  auto pick = [&] { return static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(pairs.size()) - 1)); };
  auto mapping = [&](const GaePair& p, int delta) {
    std::vector<Frame> ctx;
    for (const auto& f : p.context) ctx.push_back(shift(f, delta, gae.shape.alphabet));
    return infer_mapping(gae, ctx, shift(p.target, delta, gae.shape.alphabet));
  };
  double related = 0.0, unrelated = 0.0;
  for (int i = 0; i < kCosinePairs; ++i) {
    const GaePair& p = pairs[pick()];
    int delta = 0;
    while (delta == 0) delta = static_cast<int>(rng.uniform_int(-12, 12));
    related += cosine_similarity(mapping(p, 0), mapping(p, delta));
    const GaePair& a = pairs[pick()];
    const GaePair& b = pairs[pick()];
    unrelated += cosine_similarity(mapping(a, 0), mapping(b, 0));
  }
  related /= kCosinePairs;
  unrelated /= kCosinePairs;
  report("5", related - unrelated >= kCosineGapMin,
         fmt("mapping cosine under transposition %.4f vs unrelated pairs %.4f: gap %.4f (>= %.1f)", related,
             unrelated, related - unrelated, kCosineGapMin));
}

void criterion_6() {
  Rng rng = Rng::derive(1, "acceptance-combine");
  auto dist = [&](int n) {
    Vector p(n);
    for (int i = 0; i < n; ++i) p(i) = rng.uniform(0.001, 1.0);
    return Vector(p / p.sum());
  };
  double idem = 0.0, unif = 0.0, perm = 0.0, geo = 0.0;
  for (int c = 0; c < kCombineCases; ++c) {
    const int n = static_cast<int>(rng.uniform_int(2, 64));
    const double b = rng.uniform(0.0, 3.0);
    const Vector p = dist(n);
    const std::vector<Vector> copies(static_cast<std::size_t>(rng.uniform_int(1, 4)), p);
    idem = std::max(idem, (combine(copies, WeightedCombineConfig{b}) - p).cwiseAbs().maxCoeff());

    const std::vector<Vector> uniforms(2, Vector::Constant(n, 1.0 / n));
    unif = std::max(unif, (combine(uniforms, WeightedCombineConfig{b}) - uniforms[0]).cwiseAbs().maxCoeff());

    const std::vector<Vector> d = {dist(n), dist(n), dist(n)};
    std::vector<int> order(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) order[static_cast<std::size_t>(i)] = i;
    rng.shuffle(order);
    std::vector<Vector> dp;
    for (const auto& x : d) {
      Vector y(n);
      for (int i = 0; i < n; ++i) y(i) = x(order[static_cast<std::size_t>(i)]);
      dp.push_back(y);
    }
    const Vector cd = combine(d, WeightedCombineConfig{b}), cp = combine(dp, WeightedCombineConfig{b});
    for (int i = 0; i < n; ++i) perm = std::max(perm, std::abs(cp(i) - cd(order[static_cast<std::size_t>(i)])));

    Vector g(n);
    for (int i = 0; i < n; ++i) g(i) = std::cbrt(d[0](i) * d[1](i) * d[2](i));
    g /= g.sum();
    geo = std::max(geo, (combine(d, WeightedCombineConfig{0.0}) - g).cwiseAbs().maxCoeff());
  }
  const double worst = std::max({idem, unif, perm, geo});
  report("6a", worst < kCombineTol,
         fmt("combine over %.0f random cases: idempotence %.2g, uniform %.2g, permutation %.2g, b=0 geometric mean "
             "%.2g (< 1e-9)",
             kCombineCases, idem, unif, perm, geo));

  const std::vector<Vector> ex = {(Vector(2) << 0.8, 0.2).finished(), (Vector(2) << 0.5, 0.5).finished()};
  const Vector c = combine(ex);
  const double expected = 0.86955;
  report("6b", std::abs(c(0) - expected) <= kWorkedExampleTol,
         fmt("worked example [0.8,0.2] + [0.5,0.5], b=0.5: got [%.5f, %.5f], reference [%.5f, %.5f]", c(0), c(1),
             expected, 1.0 - expected));
}

void criterion_7(const fs::path& work, const DeskRun* desk) {
  const fs::path dir = work / "determinism";
  fs::remove_all(dir);
  fs::create_directories(dir);
  const fs::path log = dir / "log.txt";
  const std::string conf = (dir / "tiny.conf").string();
  std::ofstream(conf) << "include " << preset("exp2-desk") << "\n"
                      << "data.fragment_lengths = 4,8\n"
                         "data.train_per_cell = 2\n"
                         "data.test_per_cell = 1\n"
                         "data.sequence_length = 48\n"
                         "gae.context = 8\n"
                         "gae.factors = 32\n"
                         "gae.mappings = 8\n"
                         "rgae.hidden = 8\n"
                         "pretrain.epochs = 2\n"
                         "train.epochs = 3\n"
                         "train.finetune_epochs = 1\n"
                         "train.dropout = 0.2\n"
                         "baseline.window = 4\n"
                         "baseline.hidden = 16\n"
                         "baseline.epochs = 2\n"
                         "eval.primer = 16\n";
  bool same = true;
  std::vector<std::string> differing;
  // Both runs use the same paths (they enter the config digest), then move aside.
  for (const char* tag : {"a", "b"}) {
    const std::string d = (dir / "run").string();
    const std::string train = "path.train=" + d + "/data/train.txt";
    must(cli({"gen-data", "--config", conf, "--out", d + "/data"}, log), "gen-data");
    must(cli({"pretrain", "--config", conf, "--set", train, "--out", d + "/gae.bin"}, log), "pretrain");
    must(cli({"train", "--config", conf, "--set", train, "path.gae=" + d + "/gae.bin", "--out", d + "/rgae.bin"}, log),
         "train");
    must(cli({"train-baseline", "--config", conf, "--set", train, "--out", d + "/base.bin"}, log), "train-baseline");
    must(cli({"continue", "--config", conf, "--set", "path.model=" + d + "/rgae.bin",
              "path.eval=" + d + "/data/test.txt", "--out", d + "/rgae.report"},
             log),
         "continue");
    must(cli({"ensemble", "--config", conf, "--set", "path.members=" + d + "/rgae.bin," + d + "/base.bin",
              "path.eval=" + d + "/data/test.txt", "--out", d + "/ens.report"},
             log),
         "ensemble");
    fs::rename(d, dir / tag);
  }
  for (const char* f : {"data/train.txt", "data/test.txt", "gae.bin", "gae.bin.trace", "rgae.bin", "rgae.bin.trace",
                        "base.bin", "rgae.report", "ens.report"}) {
    if (slurp(dir / "a" / f) != slurp(dir / "b" / f) || slurp(dir / "a" / f).empty()) {
      same = false;
      differing.emplace_back(f);
    }
  }

  // Model round trip through the tensor format.
  bool models = true;
  for (const char* f : {"gae.bin", "rgae.bin", "base.bin"}) {
    const TensorFile tf = read_tensor_file((dir / "a" / f).string());
    std::ostringstream os;
    write_tensor_file(os, tf);
    models = models && os.str() == slurp(dir / "a" / f);
  }
  if (desk) {
    auto m = load_model((desk->dir / "rgae.bin").string());
    std::ostringstream os;
    write_tensor_file(os, to_tensor_file(*m.rgae));
    models = models && os.str() == slurp(desk->dir / "rgae.bin");
  }

  // Corpus round trip.
  bool corpora = true;
  for (const char* f : {"data/train.txt", "data/test.txt"}) {
    const Corpus c = read_corpus((dir / "a" / f).string(), 64);
    std::ostringstream os;
    write_corpus(os, c);
    corpora = corpora && os.str() == slurp(dir / "a" / f);
  }
  std::string detail = "rerun bit-identical (data, models, traces, reports)";
  if (!same) {
    detail += "; differs:";
    for (const auto& f : differing) detail += " " + f;
  }
  detail += models ? "; model files round-trip bit-exactly" : "; model round-trip MISMATCH";
  detail += corpora ? "; corpora round-trip losslessly" : "; corpus round-trip MISMATCH";
  report("7", same && models && corpora, detail);
}

void criterion_8(const fs::path& work) {
  const fs::path dir = work / "melodies-cv";
  fs::create_directories(dir);
  const fs::path log = dir / "log.txt";
  const std::string conf = preset("melodies-cv");
  const std::string d = (dir / "data").string();
  if (!fs::exists(d + "/train.txt")) must(cli({"gen-data", "--config", conf, "--out", d}, log), "gen-data");
  const std::string rep = (dir / "cv.report").string();
  if (!fs::exists(rep))
    must(cli({"eval", "--config", conf, "--set", "path.train=" + d + "/train.txt", "--out", rep}, log), "eval");
  const EvalReport r = parse_report(rep);
  const double rg = *report_metric(r, "extra.rgae_ce");
  const double bl = *report_metric(r, "extra.baseline_ce");
  const double en = *report_metric(r, "extra.ensemble_ce");
  report("8", en <= std::min(rg, bl) + kEnsembleMargin,
         fmt("10-fold CV on scale melodies: ensemble %.4f bits vs RGAE %.4f, baseline %.4f (<= min + %.2f)", en, rg,
             bl, kEnsembleMargin));
}

std::set<int> parse_only(const std::string& s) {
  std::set<int> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) out.insert(std::stoi(item));
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  fs::path work = fs::current_path() / "acceptance_work";
  std::set<int> only;
  bool reuse = false;
  for (int i = 1; i < argc; ++i) {
    const std::string a = argv[i];
    if (a == "--work" && i + 1 < argc) work = argv[++i];
    else if (a == "--only" && i + 1 < argc) only = parse_only(argv[++i]);
    else if (a == "--reuse") reuse = true;
    else {
      std::cerr << "usage: rgae_acceptance [--work DIR] [--only 1,2,...] [--reuse]\n";
      return 2;
    }
  }
  auto want = [&](int c) { return only.empty() || only.count(c) > 0; };
  if (!reuse) fs::remove_all(work);
  fs::create_directories(work);
  std::printf("acceptance work directory: %s\n", work.string().c_str());

  auto guarded = [&](const std::string& id, const std::function<void()>& fn) {
    try {
      fn();
    } catch (const std::exception& e) {
      report(id, false, std::string("aborted: ") + e.what());
    }
  };

  if (want(1)) guarded("1", criterion_1);
  if (want(2)) guarded("2", criterion_2);
  std::optional<DeskRun> desk;
  if (want(3) || want(5)) {
    try {
      desk = run_desk(work);
    } catch (const std::exception& e) {
      report("3", false, std::string("desk-scale run aborted: ") + e.what());
    }
  }
  if (want(3) && desk) guarded("3", [&] { criterion_3(*desk); });
  if (want(4)) guarded("4", [&] { criterion_4(desk ? &*desk : nullptr); });
  if (want(5) && desk) guarded("5", [&] { criterion_5(*desk); });
  if (want(6)) guarded("6", criterion_6);
  if (want(7)) guarded("7", [&] { criterion_7(work, desk ? &*desk : nullptr); });
  if (want(8)) guarded("8", [&] { criterion_8(work); });

  std::printf("%s: %d failing criteria\n", failures ? "ACCEPTANCE FAILED" : "ACCEPTANCE PASSED", failures);
  return failures ? 1 : 0;
}
