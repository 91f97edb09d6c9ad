#include "rgae/config.hpp"

#include <charconv>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "rgae/eval.hpp"

#ifndef RGAE_PRESET_DIR
#define RGAE_PRESET_DIR "configs"
#endif

namespace rgae {

const std::vector<ConfigKey>& config_keys() {
  static const std::vector<ConfigKey> keys = {
      {"seed", "1", "global seed; every random stream is derived from it"},

      {"data.kind", "schemes", "gen-data output: schemes (copy-and-shift grid) or melodies (scale random walks)"},
      {"data.alphabet", "64", "pitch alphabet size M"},
      {"data.schemes", "default", "scheme file (one comma-separated scheme per line) or 'default'"},
      {"data.fragment_lengths", "4,8,16", "fragment lengths of the scheme grid"},
      {"data.train_per_cell", "20", "training sequences per (scheme, length) cell"},
      {"data.test_per_cell", "5", "test sequences per cell"},
      {"data.eval_per_cell", "1", "evaluation sequences per cell"},
      {"data.sequence_length", "512", "frames per generated sequence"},
      {"data.fragment_source", "random-walk", "random-walk or corpus"},
      {"data.fragment_corpus", "", "corpus file sampled when data.fragment_source=corpus"},
      {"data.walk_low", "20", "lowest pitch of random-walk fragments"},
      {"data.walk_high", "44", "highest pitch of random-walk fragments"},
      {"data.walk_max_step", "4", "largest random-walk step"},
      {"data.melodies", "120", "number of melodies when data.kind=melodies"},
      {"data.melody_length", "64", "frames per melody when data.kind=melodies"},

      {"gae.context", "16", "look-back window n"},
      {"gae.factors", "512", "factor units F"},
      {"gae.mappings", "64", "mapping units K"},
      {"gae.mapping_gain", "1", "multiplier on the initial mapping weights W_m"},

      {"pretrain.epochs", "50", "GAE pre-training epochs"},
      {"pretrain.batch_size", "64", "pairs per pre-training batch"},
      {"pretrain.delta_min", "-30", "smallest transposition drawn per batch"},
      {"pretrain.delta_max", "30", "largest transposition drawn per batch"},
      {"pretrain.dropout", "0", "input dropout on the context window"},
      {"pretrain.sparsity_target", "0.05", "target mean mapping activation"},
      {"pretrain.sparsity_weight", "0.1", "weight of the sparsity penalty"},
      {"pretrain.norm_weight", "0.01", "weight of the column-norm deviation penalty"},
      {"pretrain.norm_cap", "1", "maximum column norm of Q and V"},
      {"pretrain.learning_rate", "0.001", "initial rate, decays linearly to 0"},

      {"rgae.hidden", "64", "GRU units of the RGAE"},
      {"train.epochs", "50", "RGAE training epochs"},
      {"train.finetune_epochs", "0", "trailing epochs that also update the GAE"},
      {"train.learning_rate", "0.001", "initial rate, decays linearly to 0"},
      {"train.dropout", "0", "input dropout on the context window"},
      {"train.grad_clip", "5", "global gradient norm limit"},
      {"train.batch_size", "8", "sequences per batch"},
      {"train.augment", "true", "random transposition per batch"},
      {"train.delta_min", "-30", "smallest augmentation transposition"},
      {"train.delta_max", "30", "largest augmentation transposition"},

      {"baseline.window", "16", "frames concatenated into each baseline input"},
      {"baseline.hidden", "512", "GRU units of the baseline"},
      {"baseline.epochs", "60", "baseline training epochs"},
      {"baseline.learning_rate", "0.001", "initial rate, decays linearly to 0"},
      {"baseline.dropout", "0", "input dropout"},
      {"baseline.grad_clip", "5", "global gradient norm limit"},
      {"baseline.batch_size", "8", "sequences per batch"},
      {"baseline.augment", "true", "random transposition per batch"},
      {"baseline.delta_min", "-30", "smallest augmentation transposition"},
      {"baseline.delta_max", "30", "largest augmentation transposition"},

      {"rmsprop.decay", "0.9", "RMSProp running-average decay"},
      {"rmsprop.epsilon", "1e-08", "RMSProp denominator offset"},

      {"ensemble.bias", "0.5", "entropy-weight exponent b"},
      {"ensemble.entropy_floor", "1e-06", "lower clamp of the relative entropy"},
      {"ensemble.probability_floor", "1e-12", "lower clamp of member probabilities"},

      {"eval.primer", "64", "primer length for continuation"},
      {"eval.threshold", "0.99", "precision above which a continuation counts as flawless"},
      {"eval.folds", "0", "k for cross-validated eval (0 = evaluate path.model)"},
      {"eval.models", "rgae,baseline,ensemble", "models trained per fold when eval.folds > 0"},

      {"path.train", "", "training corpus"},
      {"path.eval", "", "corpus for eval, continue and ensemble"},
      {"path.gae", "", "pre-trained GAE model file (train)"},
      {"path.model", "", "model file (eval, continue)"},
      {"path.members", "", "comma-separated model files (ensemble)"},
  };
  return keys;
}

std::string config_help_text() {
  std::ostringstream out;
  out << "Config keys (key = default):\n";
  for (const auto& k : config_keys()) {
    std::string lhs = "  " + k.name + " = " + k.default_value;
    if (lhs.size() < 40) lhs.resize(40, ' ');
    out << lhs << ' ' << k.doc << '\n';
  }
  return out.str();
}

ConfigValues::ConfigValues() {
  for (const auto& k : config_keys()) values_[k.name] = k.default_value;
}

void ConfigValues::set(const std::string& key, const std::string& value) {
  auto it = values_.find(key);
  if (it == values_.end()) throw ConfigError("unknown config key '" + key + "'");
  it->second = value;
}

const std::string& ConfigValues::get(const std::string& key) const {
  auto it = values_.find(key);
  if (it == values_.end()) throw ConfigError("unknown config key '" + key + "'");
  return it->second;
}

std::string ConfigValues::canonical() const {
  std::string out;
  for (const auto& [k, v] : values_) out += k + "=" + v + "\n";
  return out;
}

std::string ConfigValues::preset_dir() {
  if (const char* env = std::getenv("RGAE_PRESET_DIR")) return env;
  return RGAE_PRESET_DIR;
}

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::string resolve_include(const std::filesystem::path& from, const std::string& name) {
  namespace fs = std::filesystem;
  const fs::path candidates[] = {
      from.parent_path() / name,
      from.parent_path() / (name + ".conf"),
      fs::path(ConfigValues::preset_dir()) / name,
      fs::path(ConfigValues::preset_dir()) / (name + ".conf"),
  };
  for (const auto& c : candidates)
    if (fs::is_regular_file(c)) return c.string();
  throw ConfigError("include '" + name + "' not found (searched next to " + from.string() + " and in " +
                    ConfigValues::preset_dir() + ")");
}

}  // namespace

void ConfigValues::load_file(const std::string& path, int depth) {
  if (depth > 16) throw ConfigError("include depth exceeded at '" + path + "'");
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  std::string raw;
  std::size_t line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    const std::string line = trim(raw.substr(0, raw.find('#')));
    if (line.empty()) continue;
    if (line.starts_with("include ") || line.starts_with("include\t")) {
      load_file(resolve_include(path, trim(line.substr(8))), depth + 1);
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError(path + ":" + std::to_string(line_no) + ": expected key = value");
    try {
      set(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
    } catch (const ConfigError& e) {
      throw ConfigError(path + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
}

// ---------------------------------------------------------------------------

namespace {

class Reader {
 public:
  explicit Reader(const ConfigValues& v) : v_(v) {}

  long long integer(const std::string& key, long long lo, long long hi) const {
    const std::string& s = v_.get(key);
    long long x = 0;
    const char* b = s.data();
    if (!s.empty() && s.front() == '+') ++b;
    auto [p, ec] = std::from_chars(b, s.data() + s.size(), x);
    if (s.empty() || ec != std::errc() || p != s.data() + s.size()) fail(key, "expected an integer");
    if (x < lo || x > hi) fail(key, "must be in [" + std::to_string(lo) + ", " + std::to_string(hi) + "]");
    return x;
  }

  int i(const std::string& key, long long lo = 0, long long hi = 1LL << 30) const {
    return static_cast<int>(integer(key, lo, hi));
  }

  double real(const std::string& key, double lo, double hi) const {
    const std::string& s = v_.get(key);
    std::size_t used = 0;
    double x = 0.0;
    try {
      x = std::stod(s, &used);
    } catch (const std::exception&) {
      fail(key, "expected a number");
    }
    if (used != s.size()) fail(key, "expected a number");
    if (!(x >= lo && x <= hi)) fail(key, "out of range");
    return x;
  }

  bool boolean(const std::string& key) const {
    const std::string& s = v_.get(key);
    if (s == "true" || s == "1" || s == "yes") return true;
    if (s == "false" || s == "0" || s == "no") return false;
    fail(key, "expected true or false");
  }

  std::string choice(const std::string& key, std::initializer_list<const char*> options) const {
    const std::string& s = v_.get(key);
    for (const char* o : options)
      if (s == o) return s;
    fail(key, "unsupported value '" + s + "'");
  }

  std::vector<std::string> list(const std::string& key) const {
    std::vector<std::string> out;
    std::stringstream ss(v_.get(key));
    std::string item;
    while (std::getline(ss, item, ',')) {
      item = trim(item);
      if (!item.empty()) out.push_back(item);
    }
    return out;
  }

  std::vector<int> int_list(const std::string& key) const {
    std::vector<int> out;
    for (const auto& s : list(key)) {
      int x = 0;
      auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), x);
      if (ec != std::errc() || p != s.data() + s.size() || x <= 0) fail(key, "expected positive integers");
      out.push_back(x);
    }
    if (out.empty()) fail(key, "must not be empty");
    return out;
  }

  const std::string& str(const std::string& key) const { return v_.get(key); }

  [[noreturn]] static void fail(const std::string& key, const std::string& what) {
    throw ConfigError("config key '" + key + "': " + what);
  }

 private:
  const ConfigValues& v_;
};

TrainConfig read_train(const Reader& r, const std::string& p, std::uint64_t seed, RmsPropConfig rms) {
  TrainConfig t;
  t.epochs = r.i(p + ".epochs");
  t.learning_rate = r.real(p + ".learning_rate", 0.0, 10.0);
  t.dropout = r.real(p + ".dropout", 0.0, 0.99);
  t.grad_clip = r.real(p + ".grad_clip", 1e-12, 1e12);
  t.batch_size = r.i(p + ".batch_size", 1);
  t.augment_transpose = r.boolean(p + ".augment");
  t.delta_min = r.i(p + ".delta_min", -1000000, 1000000);
  t.delta_max = r.i(p + ".delta_max", -1000000, 1000000);
  t.seed = seed;
  t.rmsprop = rms;
  return t;
}

}  // namespace

RunConfig make_run_config(const ConfigValues& values) {
  const Reader r(values);
  RunConfig c;
  c.seed = static_cast<std::uint64_t>(r.integer("seed", 0, std::numeric_limits<long long>::max()));

  c.data_kind = r.choice("data.kind", {"schemes", "melodies"});
  const std::string schemes = r.str("data.schemes");
  if (schemes == "default") {
    c.data.schemes = default_schemes();
  } else {
    try {
      c.data.schemes = read_schemes(schemes);
    } catch (const std::exception& e) {
      throw ConfigError(std::string("data.schemes: ") + e.what());
    }
  }
  c.data.fragment_lengths = r.int_list("data.fragment_lengths");
  c.data.train_per_cell = r.i("data.train_per_cell");
  c.data.test_per_cell = r.i("data.test_per_cell");
  c.data.eval_per_cell = r.i("data.eval_per_cell");
  c.data.sequences_per_cell = c.data.train_per_cell + c.data.test_per_cell + c.data.eval_per_cell;
  c.data.sequence_length = r.i("data.sequence_length", 1);
  c.data.alphabet = r.i("data.alphabet", 2, 100000);
  c.data.seed = c.seed;
  c.fragment_source = r.choice("data.fragment_source", {"random-walk", "corpus"});
  c.fragment_corpus = r.str("data.fragment_corpus");
  c.walk_low = r.i("data.walk_low", 0, c.data.alphabet - 1);
  c.walk_high = r.i("data.walk_high", 0, c.data.alphabet - 1);
  if (c.walk_low > c.walk_high) Reader::fail("data.walk_high", "must not be below data.walk_low");
  c.walk_max_step = r.i("data.walk_max_step", 0, 1000);
  c.melody_count = r.i("data.melodies", 1);
  c.melody_length = r.i("data.melody_length", 1);

  c.gae_shape.context = r.i("gae.context", 1);
  c.gae_shape.alphabet = c.data.alphabet;
  c.gae_shape.factors = r.i("gae.factors", 1);
  c.gae_shape.mappings = r.i("gae.mappings", 1);
  c.mapping_gain = r.real("gae.mapping_gain", 1e-6, 1e6);
  if (c.data_kind == "schemes")
    for (int len : c.data.fragment_lengths)
      if (len > c.gae_shape.context)
        Reader::fail("data.fragment_lengths", "fragment length " + std::to_string(len) + " exceeds gae.context");

  RmsPropConfig rms;
  rms.decay = r.real("rmsprop.decay", 0.0, 1.0);
  rms.epsilon = r.real("rmsprop.epsilon", 0.0, 1.0);

  c.pretrain.epochs = r.i("pretrain.epochs");
  c.pretrain.batch_size = r.i("pretrain.batch_size", 1);
  c.pretrain.delta_min = r.i("pretrain.delta_min", -1000000, 1000000);
  c.pretrain.delta_max = r.i("pretrain.delta_max", -1000000, 1000000);
  c.pretrain.dropout = r.real("pretrain.dropout", 0.0, 0.99);
  c.pretrain.regularization.sparsity_target = r.real("pretrain.sparsity_target", 0.0, 1e6);
  c.pretrain.regularization.sparsity_weight = r.real("pretrain.sparsity_weight", 0.0, 1e6);
  c.pretrain.regularization.norm_deviation_weight = r.real("pretrain.norm_weight", 0.0, 1e6);
  c.pretrain.norm_cap = r.real("pretrain.norm_cap", 1e-12, 1e12);
  c.pretrain.learning_rate = r.real("pretrain.learning_rate", 0.0, 10.0);
  c.pretrain.rmsprop = rms;
  c.pretrain.seed = c.seed;

  c.rgae_hidden = r.i("rgae.hidden", 1);
  c.rgae_train = read_train(r, "train", c.seed, rms);
  c.rgae_train.finetune_epochs = r.i("train.finetune_epochs");

  c.baseline_window = r.i("baseline.window", 1);
  c.baseline_hidden = r.i("baseline.hidden", 1);
  c.baseline_train = read_train(r, "baseline", c.seed, rms);

  c.ensemble.bias = r.real("ensemble.bias", 0.0, 1e6);
  c.ensemble.entropy_floor = r.real("ensemble.entropy_floor", 1e-300, 1.0);
  c.ensemble.probability_floor = r.real("ensemble.probability_floor", 1e-300, 1.0);

  c.primer = r.i("eval.primer", 1);
  c.threshold = r.real("eval.threshold", 0.0, 1.0);
  c.folds = r.i("eval.folds", 0, 1000000);
  c.cv_models = r.list("eval.models");
  for (const auto& m : c.cv_models)
    if (m != "rgae" && m != "baseline" && m != "ensemble") Reader::fail("eval.models", "unknown model '" + m + "'");

  c.train_path = r.str("path.train");
  c.eval_path = r.str("path.eval");
  c.gae_path = r.str("path.gae");
  c.model_path = r.str("path.model");
  c.member_paths = r.list("path.members");

  try {
    c.data.validate();
    c.pretrain.validate();
    c.rgae_train.validate();
    c.baseline_train.validate();
    c.ensemble.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  c.digest = digest_text(values.canonical());
  return c;
}

}  // namespace rgae
