#pragma once

#include <cstdint>
#include <iosfwd>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "rgae/baseline.hpp"
#include "rgae/gae.hpp"
#include "rgae/rgae.hpp"

namespace rgae {

// Binary tensor file:
//   "RGAE" | u32 version | tensors until EOF
//   tensor = u32 name_len | name (UTF-8) | u32 rank | u32 dims[rank] | f32 values (row-major)
// All integers and floats little-endian.

inline constexpr std::uint32_t kTensorFormatVersion = 1;

struct NamedTensor {
  std::string name;
  std::vector<std::uint32_t> dims;
  std::vector<float> values;  // row-major

  std::size_t size() const;
};

struct TensorFile {
  std::uint32_t version = kTensorFormatVersion;
  std::vector<NamedTensor> tensors;

  const NamedTensor* find(std::string_view name) const;
  const NamedTensor& at(std::string_view name) const;
  bool has_prefix(std::string_view prefix) const;
  /// Number of float values stored across all tensors.
  std::size_t value_count() const;
};

void write_tensor_file(std::ostream& out, const TensorFile& file);
/// Writes through a temporary file and rename.
void write_tensor_file(const std::string& path, const TensorFile& file);
TensorFile read_tensor_file(std::istream& in);
TensorFile read_tensor_file(const std::string& path);

/// Column-major double view -> row-major float32 tensor. Throws if a value
/// is not exactly representable as float32.
NamedTensor export_tensor(const TensorView& view);
/// Copies into the view; dims must match.
void import_tensor(const NamedTensor& tensor, const TensorView& view);

void append_tensors(TensorFile& file, std::span<const TensorView> views);
void import_tensors(const TensorFile& file, std::span<const TensorView> views);

// ---------------------------------------------------------------------------
// Models
// ---------------------------------------------------------------------------

enum class ModelKind { kGae, kRgae, kBaseline };
const char* to_string(ModelKind kind);

TensorFile to_tensor_file(GaeParams& params);
TensorFile to_tensor_file(RgaeModel& model);
TensorFile to_tensor_file(BaselineModel& model);

ModelKind detect_kind(const TensorFile& file);
GaeParams gae_from_file(const TensorFile& file);
RgaeModel rgae_from_file(const TensorFile& file);
BaselineModel baseline_from_file(const TensorFile& file);

/// A model file of any kind. GAE files have no predictor.
struct LoadedModel {
  ModelKind kind = ModelKind::kGae;
  std::unique_ptr<GaeParams> gae;
  std::unique_ptr<RgaeModel> rgae;
  std::unique_ptr<BaselineModel> baseline;

  /// Predictor interface, or nullptr for a bare GAE.
  const SequenceModel* predictor() const;
};

LoadedModel load_model(const std::string& path);

// ---------------------------------------------------------------------------
// Training checkpoints: model tensors + "opt/<name>" accumulators + "meta/epoch"
// ---------------------------------------------------------------------------

void append_optimizer(TensorFile& file, RmsPropState& state, std::span<const TensorView> params);
/// Restores accumulators saved for `params`; returns false if none were saved.
bool restore_optimizer(const TensorFile& file, RmsPropState& state, std::span<const TensorView> params);

void set_epoch(TensorFile& file, int next_epoch);
int get_epoch(const TensorFile& file);

}  // namespace rgae
