#pragma once

#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "rgae/data.hpp"
#include "rgae/ensemble.hpp"
#include "rgae/gae.hpp"
#include "rgae/training.hpp"

namespace rgae {

/// Bad key, bad value, missing file: anything that makes a run unusable
/// before it starts.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct ConfigKey {
  std::string name;
  std::string default_value;
  std::string doc;
};

/// Every accepted key, in documentation order.
const std::vector<ConfigKey>& config_keys();
/// One line per key: "  name = default   doc".
std::string config_help_text();

/// Flat key -> value map with every key present (defaults filled in).
class ConfigValues {
 public:
  ConfigValues();

  /// Rejects unknown keys.
  void set(const std::string& key, const std::string& value);
  const std::string& get(const std::string& key) const;
  /// Sorted "key=value" lines, the input to the config digest.
  std::string canonical() const;

  /// Reads `key = value` lines, `include <preset-or-path>` and '#' comments.
  /// Includes resolve relative to the including file, then the preset directory.
  void load_file(const std::string& path, int depth = 0);

  static std::string preset_dir();

 private:
  std::map<std::string, std::string> values_;
};

/// Typed view of a complete configuration.
struct RunConfig {
  std::uint64_t seed = 1;

  std::string data_kind;  // "schemes" or "melodies"
  SchemeDatasetSpec data;
  std::string fragment_source;  // "random-walk" or "corpus"
  std::string fragment_corpus;
  int walk_low = 0;
  int walk_high = 0;
  int walk_max_step = 4;
  int melody_count = 0;
  int melody_length = 0;

  GaeShape gae_shape;
  double mapping_gain = 1.0;
  GaePretrainConfig pretrain;
  int rgae_hidden = 0;
  TrainConfig rgae_train;

  int baseline_window = 1;
  int baseline_hidden = 0;
  TrainConfig baseline_train;

  WeightedCombineConfig ensemble;

  int primer = 64;
  double threshold = 0.99;
  int folds = 0;
  std::vector<std::string> cv_models;

  std::string train_path;
  std::string eval_path;
  std::string gae_path;
  std::string model_path;
  std::vector<std::string> member_paths;

  std::string digest;
};

/// Converts and validates every value. Throws ConfigError.
RunConfig make_run_config(const ConfigValues& values);

}  // namespace rgae
