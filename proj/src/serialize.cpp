#include "rgae/serialize.hpp"

#include <bit>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <istream>
#include <ostream>
#include <stdexcept>

namespace rgae {

namespace {

constexpr char kMagic[4] = {'R', 'G', 'A', 'E'};
constexpr std::uint32_t kMaxNameLength = 4096;
constexpr std::uint32_t kMaxRank = 8;

void put_u32(std::ostream& out, std::uint32_t v) {
  const char bytes[4] = {static_cast<char>(v & 0xff), static_cast<char>((v >> 8) & 0xff),
                         static_cast<char>((v >> 16) & 0xff), static_cast<char>((v >> 24) & 0xff)};
  out.write(bytes, 4);
}

bool get_u32(std::istream& in, std::uint32_t& v) {
  unsigned char bytes[4];
  if (!in.read(reinterpret_cast<char*>(bytes), 4)) return false;
  v = static_cast<std::uint32_t>(bytes[0]) | (static_cast<std::uint32_t>(bytes[1]) << 8) |
      (static_cast<std::uint32_t>(bytes[2]) << 16) | (static_cast<std::uint32_t>(bytes[3]) << 24);
  return true;
}

std::uint32_t require_u32(std::istream& in, const char* what) {
  std::uint32_t v = 0;
  if (!get_u32(in, v)) throw std::runtime_error(std::string("tensor file truncated while reading ") + what);
  return v;
}

}  // namespace

std::size_t NamedTensor::size() const {
  std::size_t n = 1;
  for (auto d : dims) n *= d;
  return n;
}

const NamedTensor* TensorFile::find(std::string_view name) const {
  for (const auto& t : tensors)
    if (t.name == name) return &t;
  return nullptr;
}

const NamedTensor& TensorFile::at(std::string_view name) const {
  const NamedTensor* t = find(name);
  if (!t) throw std::runtime_error("tensor '" + std::string(name) + "' missing from model file");
  return *t;
}

bool TensorFile::has_prefix(std::string_view prefix) const {
  for (const auto& t : tensors)
    if (t.name.starts_with(prefix)) return true;
  return false;
}

std::size_t TensorFile::value_count() const {
  std::size_t n = 0;
  for (const auto& t : tensors) n += t.values.size();
  return n;
}

void write_tensor_file(std::ostream& out, const TensorFile& file) {
  out.write(kMagic, 4);
  put_u32(out, file.version);
  for (const auto& t : file.tensors) {
    if (t.values.size() != t.size()) throw std::invalid_argument("tensor '" + t.name + "' has inconsistent dims");
    put_u32(out, static_cast<std::uint32_t>(t.name.size()));
    out.write(t.name.data(), static_cast<std::streamsize>(t.name.size()));
    put_u32(out, static_cast<std::uint32_t>(t.dims.size()));
    for (auto d : t.dims) put_u32(out, d);
    for (float f : t.values) put_u32(out, std::bit_cast<std::uint32_t>(f));
  }
}

void write_tensor_file(const std::string& path, const TensorFile& file) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open '" + tmp + "' for writing");
    write_tensor_file(out, file);
    out.flush();
    if (!out) throw std::runtime_error("write to '" + tmp + "' failed");
  }
  std::filesystem::rename(tmp, path);
}

TensorFile read_tensor_file(std::istream& in) {
  char magic[4];
  if (!in.read(magic, 4) || std::memcmp(magic, kMagic, 4) != 0) throw std::runtime_error("not an RGAE tensor file");
  TensorFile file;
  file.version = require_u32(in, "version");
  if (file.version != kTensorFormatVersion)
    throw std::runtime_error("unsupported tensor format version " + std::to_string(file.version));
  std::uint32_t name_len = 0;
  while (get_u32(in, name_len)) {
    if (name_len > kMaxNameLength) throw std::runtime_error("tensor name too long");
    NamedTensor t;
    t.name.resize(name_len);
    if (!in.read(t.name.data(), name_len)) throw std::runtime_error("tensor file truncated in name");
    const std::uint32_t rank = require_u32(in, "rank");
    if (rank > kMaxRank) throw std::runtime_error("tensor '" + t.name + "' has unsupported rank");
    for (std::uint32_t i = 0; i < rank; ++i) t.dims.push_back(require_u32(in, "dims"));
    const std::size_t n = t.size();
    t.values.resize(n);
    for (std::size_t i = 0; i < n; ++i) t.values[i] = std::bit_cast<float>(require_u32(in, "values"));
    if (file.find(t.name)) throw std::runtime_error("duplicate tensor '" + t.name + "'");
    file.tensors.push_back(std::move(t));
  }
  if (!in.eof()) throw std::runtime_error("tensor file read error");
  return file;
}

TensorFile read_tensor_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open model file '" + path + "'");
  return read_tensor_file(in);
}

NamedTensor export_tensor(const TensorView& view) {
  NamedTensor t;
  t.name = view.name;
  if (view.rank == 1) {
    t.dims = {static_cast<std::uint32_t>(view.rows)};
  } else {
    t.dims = {static_cast<std::uint32_t>(view.rows), static_cast<std::uint32_t>(view.cols)};
  }
  t.values.resize(view.values.size());
  const auto rows = static_cast<std::size_t>(view.rows);
  const auto cols = static_cast<std::size_t>(view.cols);
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = 0; c < cols; ++c) {
      const double x = view.values[c * rows + r];
      const auto f = static_cast<float>(x);
      if (static_cast<double>(f) != x && !std::isnan(x))
        throw std::invalid_argument("tensor '" + view.name + "' holds values that are not float32-representable");
      t.values[r * cols + c] = f;
    }
  return t;
}

void import_tensor(const NamedTensor& tensor, const TensorView& view) {
  const bool ok = view.rank == 1 ? tensor.dims.size() == 1 && tensor.dims[0] == static_cast<std::uint32_t>(view.rows)
                                 : tensor.dims.size() == 2 && tensor.dims[0] == static_cast<std::uint32_t>(view.rows) &&
                                       tensor.dims[1] == static_cast<std::uint32_t>(view.cols);
  if (!ok) throw std::runtime_error("tensor '" + tensor.name + "' has unexpected shape");
  const auto rows = static_cast<std::size_t>(view.rows);
  const auto cols = static_cast<std::size_t>(view.cols);
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = 0; c < cols; ++c) view.values[c * rows + r] = tensor.values[r * cols + c];
}

void append_tensors(TensorFile& file, std::span<const TensorView> views) {
  for (const auto& v : views) file.tensors.push_back(export_tensor(v));
}

void import_tensors(const TensorFile& file, std::span<const TensorView> views) {
  for (const auto& v : views) import_tensor(file.at(v.name), v);
}

// ---------------------------------------------------------------------------

const char* to_string(ModelKind kind) {
  switch (kind) {
    case ModelKind::kGae: return "gae";
    case ModelKind::kRgae: return "rgae";
    case ModelKind::kBaseline: return "baseline";
  }
  return "?";
}

TensorFile to_tensor_file(GaeParams& params) {
  TensorFile f;
  auto t = params.tensors("gae/");
  append_tensors(f, t);
  return f;
}

TensorFile to_tensor_file(RgaeModel& model) {
  TensorFile f;
  auto t = model.tensors();
  append_tensors(f, t);
  return f;
}

TensorFile to_tensor_file(BaselineModel& model) {
  TensorFile f;
  auto t = model.tensors();
  append_tensors(f, t);
  return f;
}

ModelKind detect_kind(const TensorFile& file) {
  const bool gae = file.find("gae/Q") != nullptr;
  const bool gru = file.find("gru/Wz") != nullptr;
  if (gae && gru) return ModelKind::kRgae;
  if (gae) return ModelKind::kGae;
  if (gru) return ModelKind::kBaseline;
  throw std::runtime_error("model file holds neither GAE nor GRU tensors");
}

namespace {

std::uint32_t dim(const NamedTensor& t, std::size_t i) {
  if (i >= t.dims.size()) throw std::runtime_error("tensor '" + t.name + "' has too few dims");
  return t.dims[i];
}

GruParams gru_from_file(const TensorFile& file) {
  const auto& wz = file.at("gru/Wz");
  const auto& uo = file.at("gru/Uo");
  GruParams p = GruParams::zeros(static_cast<int>(dim(wz, 1)), static_cast<int>(dim(wz, 0)),
                                 static_cast<int>(dim(uo, 0)));
  auto t = p.tensors("gru/");
  import_tensors(file, t);
  return p;
}

}  // namespace

GaeParams gae_from_file(const TensorFile& file) {
  const auto& q = file.at("gae/Q");
  const auto& v = file.at("gae/V");
  const auto& wm = file.at("gae/Wm");
  GaeShape shape;
  shape.factors = static_cast<int>(dim(q, 0));
  shape.alphabet = static_cast<int>(dim(v, 1));
  shape.mappings = static_cast<int>(dim(wm, 0));
  if (shape.alphabet == 0 || dim(q, 1) % dim(v, 1) != 0)
    throw std::runtime_error("gae/Q width is not a multiple of the alphabet size");
  shape.context = static_cast<int>(dim(q, 1) / dim(v, 1));
  GaeParams p = GaeParams::zeros(shape);
  auto t = p.tensors("gae/");
  import_tensors(file, t);
  p.validate();
  return p;
}

RgaeModel rgae_from_file(const TensorFile& file) {
  if (detect_kind(file) != ModelKind::kRgae) throw std::runtime_error("model file is not an RGAE");
  return RgaeModel(gae_from_file(file), gru_from_file(file));
}

BaselineModel baseline_from_file(const TensorFile& file) {
  if (detect_kind(file) != ModelKind::kBaseline) throw std::runtime_error("model file is not a baseline RNN");
  GruParams gru = gru_from_file(file);
  const int alphabet = gru.output_size;
  if (alphabet == 0 || gru.input_size % alphabet != 0)
    throw std::runtime_error("baseline input size is not a multiple of the alphabet size");
  return BaselineModel(gru.input_size / alphabet, alphabet, std::move(gru));
}

const SequenceModel* LoadedModel::predictor() const {
  if (rgae) return rgae.get();
  if (baseline) return baseline.get();
  return nullptr;
}

LoadedModel load_model(const std::string& path) {
  const TensorFile file = read_tensor_file(path);
  LoadedModel m;
  m.kind = detect_kind(file);
  switch (m.kind) {
    case ModelKind::kGae: m.gae = std::make_unique<GaeParams>(gae_from_file(file)); break;
    case ModelKind::kRgae: m.rgae = std::make_unique<RgaeModel>(rgae_from_file(file)); break;
    case ModelKind::kBaseline: m.baseline = std::make_unique<BaselineModel>(baseline_from_file(file)); break;
  }
  return m;
}

// ---------------------------------------------------------------------------

void append_optimizer(TensorFile& file, RmsPropState& state, std::span<const TensorView> params) {
  if (state.accumulators.size() != params.size()) throw std::invalid_argument("optimizer/parameter count mismatch");
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto& acc = state.accumulators[i];
    TensorView v{"opt/" + params[i].name, params[i].rows, params[i].cols, params[i].rank,
                 std::span<double>(acc.data(), acc.size())};
    file.tensors.push_back(export_tensor(v));
  }
}

bool restore_optimizer(const TensorFile& file, RmsPropState& state, std::span<const TensorView> params) {
  if (params.empty() || !file.find("opt/" + params.front().name)) return false;
  state.accumulators.assign(params.size(), {});
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto& acc = state.accumulators[i];
    acc.assign(params[i].values.size(), 0.0);
    TensorView v{"opt/" + params[i].name, params[i].rows, params[i].cols, params[i].rank,
                 std::span<double>(acc.data(), acc.size())};
    import_tensor(file.at(v.name), v);
  }
  return true;
}

void set_epoch(TensorFile& file, int next_epoch) {
  std::erase_if(file.tensors, [](const NamedTensor& t) { return t.name == "meta/epoch"; });
  file.tensors.push_back(NamedTensor{"meta/epoch", {1}, {static_cast<float>(next_epoch)}});
}

int get_epoch(const TensorFile& file) {
  const auto& t = file.at("meta/epoch");
  if (t.values.size() != 1) throw std::runtime_error("meta/epoch must hold one value");
  return static_cast<int>(t.values[0]);
}

}  // namespace rgae
