#include "rgae/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace rgae {

namespace {

// Order-independent sum: sort, then add.
double sorted_sum(std::vector<double> values) {
  std::sort(values.begin(), values.end());
  double s = 0.0;
  for (double v : values) s += v;
  return s;
}

void check_corpus(const SequenceModel& model, const Corpus& corpus) {
  for (const auto& seq : corpus) {
    if (seq.alphabet != model.alphabet())
      throw std::invalid_argument("corpus alphabet " + std::to_string(seq.alphabet) + " does not match model alphabet " +
                                  std::to_string(model.alphabet()));
    if (!seq.monophonic()) throw std::invalid_argument("evaluation requires monophonic sequences");
  }
}

}  // namespace

CeResult evaluate_ce(const SequenceModel& model, const Corpus& corpus) {
  check_corpus(model, corpus);
  CeResult result;
  std::vector<double> sums;
  for (const auto& seq : corpus) {
    if (seq.size() < 2) {
      result.per_sequence.push_back(0.0);
      continue;
    }
    const auto dists = predict_sequence(model, seq);
    double s = 0.0;
    for (std::size_t t = 0; t < dists.size(); ++t) s += categorical_cross_entropy(seq.pitch(t + 1), dists[t]);
    sums.push_back(s);
    result.per_sequence.push_back(s / static_cast<double>(dists.size()));
    result.events += dists.size();
  }
  if (result.events > 0) result.mean_bits = sorted_sum(sums) / static_cast<double>(result.events);
  return result;
}

ContinuationResult evaluate_continuation(const SequenceModel& model, const Corpus& corpus, int primer_len,
                                         double threshold) {
  check_corpus(model, corpus);
  if (primer_len <= 0) throw std::invalid_argument("primer length must be positive");
  ContinuationResult result;
  if (corpus.empty()) return result;
  std::size_t above = 0;
  for (const auto& seq : corpus) {
    if (seq.size() <= static_cast<std::size_t>(primer_len))
      throw std::invalid_argument("sequence '" + seq.source_id + "' is not longer than the primer");
    FrameSequence primer = seq;
    primer.frames.resize(static_cast<std::size_t>(primer_len));
    const std::size_t steps = seq.size() - static_cast<std::size_t>(primer_len);
    const FrameSequence generated = continue_sequence(model, primer, steps);
    std::size_t correct = 0;
    for (std::size_t i = 0; i < steps; ++i)
      if (generated.frames[i] == seq.frames[static_cast<std::size_t>(primer_len) + i]) ++correct;
    const double precision = static_cast<double>(correct) / static_cast<double>(steps);
    result.per_sequence.push_back(precision);
    if (precision > threshold) ++above;
  }
  const auto n = static_cast<double>(corpus.size());
  result.precision_mean = sorted_sum(result.per_sequence) / n;
  result.pct_above = 100.0 * static_cast<double>(above) / n;
  return result;
}

std::size_t count_parameters(const GaeParams& p) {
  return static_cast<std::size_t>(p.q.size() + p.v.size() + p.wm.size());
}

std::size_t count_parameters(const GruParams& p) {
  return static_cast<std::size_t>(p.wz.size() + p.wr.size() + p.wh.size() + p.uz.size() + p.ur.size() +
                                  p.uh.size() + p.bz.size() + p.br.size() + p.bh.size() + p.uo.size());
}

std::size_t count_parameters(const RgaeModel& m) { return count_parameters(m.gae) + count_parameters(m.gru); }

std::size_t count_parameters(const BaselineModel& m) { return count_parameters(m.gru); }

std::size_t rgae_parameter_count(int context, int alphabet, int factors, int mappings, int hidden) {
  const std::size_t n = static_cast<std::size_t>(context), m = static_cast<std::size_t>(alphabet),
                    f = static_cast<std::size_t>(factors), k = static_cast<std::size_t>(mappings),
                    h = static_cast<std::size_t>(hidden);
  const std::size_t gae = f * n * m + f * m + k * f;
  const std::size_t gru = 3 * (h * k + h * h + h) + k * h;
  return gae + gru;
}

std::size_t baseline_parameter_count(int window, int alphabet, int hidden) {
  const std::size_t d = static_cast<std::size_t>(window) * static_cast<std::size_t>(alphabet);
  const std::size_t m = static_cast<std::size_t>(alphabet), h = static_cast<std::size_t>(hidden);
  return 3 * (h * d + h * h + h) + m * h;
}

// ---------------------------------------------------------------------------

namespace {

std::string fmt6(double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", x);
  return buf;
}

double round6(double x) { return std::stod(fmt6(x)); }

double parse_double(const std::string& s, std::size_t line) {
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(s, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used != s.size() || s.empty()) throw std::runtime_error("report line " + std::to_string(line) + ": bad number '" + s + "'");
  return v;
}

}  // namespace

EvalReport EvalReport::rounded() const {
  EvalReport r = *this;
  r.mean_ce_bits = round6(r.mean_ce_bits);
  for (double& v : r.per_sequence_ce) v = round6(v);
  if (r.precision_mean) r.precision_mean = round6(*r.precision_mean);
  if (r.pct_above_99) r.pct_above_99 = round6(*r.pct_above_99);
  for (double& v : r.per_sequence_precision) v = round6(v);
  for (auto& [k, v] : r.extras) v = round6(v);
  return r;
}

std::string digest_text(std::string_view text) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(hash_string(text)));
  return buf;
}

void emit_report(std::ostream& out, const EvalReport& r) {
  const bool with_precision = r.precision_mean.has_value();
  if (with_precision && r.per_sequence_precision.size() != r.per_sequence_ce.size())
    throw std::invalid_argument("report: per-sequence precision and CE rows differ in length");
  out << "# rgae-report v1\n";
  out << "model_kind=" << r.model_kind << '\n';
  out << "param_count=" << r.param_count << '\n';
  out << "config_digest=" << r.config_digest << '\n';
  out << "sequences=" << r.per_sequence_ce.size() << '\n';
  out << "mean_ce_bits=" << fmt6(r.mean_ce_bits) << '\n';
  if (with_precision) out << "precision_mean=" << fmt6(*r.precision_mean) << '\n';
  if (r.pct_above_99) out << "pct_above_99=" << fmt6(*r.pct_above_99) << '\n';
  for (const auto& [k, v] : r.extras) out << "extra." << k << '=' << fmt6(v) << '\n';
  for (std::size_t i = 0; i < r.per_sequence_ce.size(); ++i) {
    out << "seq " << i << " ce=" << fmt6(r.per_sequence_ce[i]);
    if (with_precision) out << " precision=" << fmt6(r.per_sequence_precision[i]);
    out << '\n';
  }
}

void emit_report(const std::string& path, const EvalReport& report) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open '" + tmp + "' for writing");
    emit_report(out, report);
    out.flush();
    if (!out) throw std::runtime_error("write to '" + tmp + "' failed");
  }
  std::filesystem::rename(tmp, path);
}

EvalReport parse_report(std::istream& in) {
  EvalReport r;
  std::string line;
  std::size_t line_no = 0;
  std::size_t sequences = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line.front() == '#') continue;
    if (line.starts_with("seq ")) {
      std::istringstream fields(line.substr(4));
      std::size_t index = 0;
      std::string field;
      fields >> index;
      if (index != r.per_sequence_ce.size())
        throw std::runtime_error("report line " + std::to_string(line_no) + ": sequence rows out of order");
      while (fields >> field) {
        if (field.starts_with("ce=")) r.per_sequence_ce.push_back(parse_double(field.substr(3), line_no));
        else if (field.starts_with("precision="))
          r.per_sequence_precision.push_back(parse_double(field.substr(10), line_no));
        else throw std::runtime_error("report line " + std::to_string(line_no) + ": unknown field '" + field + "'");
      }
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw std::runtime_error("report line " + std::to_string(line_no) + ": expected key=value");
    const std::string key = line.substr(0, eq);
    const std::string value = line.substr(eq + 1);
    if (key == "model_kind") r.model_kind = value;
    else if (key == "param_count") r.param_count = static_cast<std::size_t>(std::stoull(value));
    else if (key == "config_digest") r.config_digest = value;
    else if (key == "sequences") sequences = static_cast<std::size_t>(std::stoull(value));
    else if (key == "mean_ce_bits") r.mean_ce_bits = parse_double(value, line_no);
    else if (key == "precision_mean") r.precision_mean = parse_double(value, line_no);
    else if (key == "pct_above_99") r.pct_above_99 = parse_double(value, line_no);
    else if (key.starts_with("extra.")) r.extras.emplace_back(key.substr(6), parse_double(value, line_no));
    else throw std::runtime_error("report line " + std::to_string(line_no) + ": unknown key '" + key + "'");
  }
  if (sequences != r.per_sequence_ce.size()) throw std::runtime_error("report: sequence count does not match rows");
  return r;
}

EvalReport parse_report(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open report '" + path + "'");
  return parse_report(in);
}

std::optional<double> report_metric(const EvalReport& report, std::string_view name) {
  if (name == "mean_ce_bits") return report.mean_ce_bits;
  if (name == "precision_mean") return report.precision_mean;
  if (name == "pct_above_99") return report.pct_above_99;
  if (name == "param_count") return static_cast<double>(report.param_count);
  if (name.starts_with("extra.")) {
    for (const auto& [k, v] : report.extras)
      if (k == name.substr(6)) return v;
  }
  return std::nullopt;
}

}  // namespace rgae
