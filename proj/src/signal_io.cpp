#include "qrs/signal_io.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>

#include "json.hpp"
#include "qrs/rng.hpp"

namespace qrs {

namespace {

bool has_suffix(const std::string& s, const std::string& suffix) {
  return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

std::string sidecar_path(const std::string& f32_path) {
  const auto dot = f32_path.rfind('.');
  return f32_path.substr(0, dot) + ".json";
}

std::vector<float> parse_csv_samples(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(Err::IoFailure, "cannot open " + path);
  std::vector<float> samples;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    char* end = nullptr;
    const double v = std::strtod(line.c_str(), &end);
    if (end == line.c_str() || *end != '\0')
      fail(Err::ParseFailure, path + ":" + std::to_string(line_no) + ": unparsable value '" + line + "'");
    if (!std::isfinite(v))
      fail(Err::NonFiniteValue, path + ":" + std::to_string(line_no) + ": non-finite value");
    samples.push_back(static_cast<float>(v));
  }
  return samples;
}

std::vector<float> parse_f32_samples(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(Err::IoFailure, "cannot open " + path);
  std::vector<char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (bytes.empty()) fail(Err::EmptyRecord, path + ": empty record");
  if (bytes.size() % 4 != 0)
    fail(Err::MalformedBinary, path + ": size " + std::to_string(bytes.size()) + " not a multiple of 4");
  std::vector<float> samples(bytes.size() / 4);
  for (std::size_t i = 0; i < samples.size(); ++i) {
    std::uint32_t u = static_cast<std::uint8_t>(bytes[4 * i]) |
                      (static_cast<std::uint32_t>(static_cast<std::uint8_t>(bytes[4 * i + 1])) << 8) |
                      (static_cast<std::uint32_t>(static_cast<std::uint8_t>(bytes[4 * i + 2])) << 16) |
                      (static_cast<std::uint32_t>(static_cast<std::uint8_t>(bytes[4 * i + 3])) << 24);
    float f;
    std::memcpy(&f, &u, 4);
    if (!std::isfinite(f))
      fail(Err::NonFiniteValue, path + ": non-finite value at sample " + std::to_string(i));
    samples[i] = f;
  }
  return samples;
}

}  // namespace

EcgRecord load_record(const std::string& path, int fs, const std::string& record_id,
                      const std::string& subject_id) {
  if (fs <= 0) fail(Err::InvalidParams, "fs must be positive");
  EcgRecord rec;
  rec.record_id = record_id;
  rec.subject_id = subject_id;
  rec.fs = fs;
  rec.samples = has_suffix(path, ".f32") ? parse_f32_samples(path) : parse_csv_samples(path);
  if (rec.samples.empty()) fail(Err::EmptyRecord, path + ": empty record");
  return rec;
}

EcgRecord load_record_with_sidecar(const std::string& path) {
  const std::string meta_path = sidecar_path(path);
  std::ifstream in(meta_path);
  if (!in) fail(Err::IoFailure, "cannot open sidecar " + meta_path);
  nlohmann::json meta;
  try {
    in >> meta;
  } catch (const nlohmann::json::exception& e) {
    fail(Err::ParseFailure, meta_path + ": " + e.what());
  }
  EcgRecord rec = load_record(path, meta.at("fs").get<int>(), meta.at("record_id").get<std::string>(),
                              meta.at("subject_id").get<std::string>());
  const auto n = meta.at("n_samples").get<std::size_t>();
  if (n != rec.samples.size())
    fail(Err::ShapeMismatch, path + ": sidecar says " + std::to_string(n) + " samples, file has " +
                                 std::to_string(rec.samples.size()));
  return rec;
}

void save_record(const EcgRecord& record, const std::string& path) {
  if (record.samples.empty()) fail(Err::EmptyRecord, "refusing to save empty record");
  if (has_suffix(path, ".f32")) {
    std::ofstream out(path, std::ios::binary);
    if (!out) fail(Err::IoFailure, "cannot write " + path);
    for (float f : record.samples) {
      std::uint32_t u;
      std::memcpy(&u, &f, 4);
      const char bytes[4] = {static_cast<char>(u & 0xff), static_cast<char>((u >> 8) & 0xff),
                             static_cast<char>((u >> 16) & 0xff), static_cast<char>((u >> 24) & 0xff)};
      out.write(bytes, 4);
    }
    if (!out) fail(Err::IoFailure, "write failed for " + path);
    nlohmann::json meta = {{"record_id", record.record_id},
                           {"subject_id", record.subject_id},
                           {"fs", record.fs},
                           {"n_samples", record.samples.size()}};
    std::ofstream mout(sidecar_path(path));
    if (!mout) fail(Err::IoFailure, "cannot write sidecar for " + path);
    mout << meta.dump(2) << "\n";
  } else {
    std::ofstream out(path);
    if (!out) fail(Err::IoFailure, "cannot write " + path);
    char buf[40];
    for (float f : record.samples) {
      std::snprintf(buf, sizeof(buf), "%.6e\n", static_cast<double>(f));
      out << buf;
    }
    if (!out) fail(Err::IoFailure, "write failed for " + path);
  }
}

LoadedAnnotations load_annotations(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(Err::IoFailure, "cannot open " + path);
  std::vector<std::int64_t> peaks;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    char* end = nullptr;
    const long long v = std::strtoll(line.c_str(), &end, 10);
    if (end == line.c_str() || *end != '\0')
      fail(Err::ParseFailure, path + ":" + std::to_string(line_no) + ": unparsable index '" + line + "'");
    if (v < 0) fail(Err::NegativeIndex, path + ":" + std::to_string(line_no) + ": negative index");
    peaks.push_back(v);
  }
  LoadedAnnotations out;
  out.was_unsorted = !std::is_sorted(peaks.begin(), peaks.end());
  std::sort(peaks.begin(), peaks.end());
  peaks.erase(std::unique(peaks.begin(), peaks.end()), peaks.end());
  out.ann.peaks = std::move(peaks);
  return out;
}

void save_annotations(const AnnotationSet& ann, const std::string& path) {
  std::ofstream out(path);
  if (!out) fail(Err::IoFailure, "cannot write " + path);
  for (auto p : ann.peaks) out << p << "\n";
  if (!out) fail(Err::IoFailure, "write failed for " + path);
}

std::pair<EcgRecord, AnnotationSet> synth_ecg(const SynthParams& params, const std::string& record_id,
                                              const std::string& subject_id) {
  if (params.duration_s <= 0) fail(Err::InvalidParams, "duration_s must be positive");
  if (params.fs < 100) fail(Err::InvalidParams, "fs must be >= 100");
  if (params.mean_hr_bpm < 30 || params.mean_hr_bpm > 220)
    fail(Err::InvalidParams, "mean_hr_bpm must be in [30, 220]");
  if (params.hr_jitter_pct < 0 || params.hr_jitter_pct >= 1)
    fail(Err::InvalidParams, "hr_jitter_pct must be in [0, 1)");
  if (params.qrs_width_ms <= 0) fail(Err::InvalidParams, "qrs_width_ms must be positive");

  const auto n = static_cast<std::int64_t>(std::llround(params.duration_s * params.fs));
  Rng rng(params.seed);

  // Beat schedule: first beat at 0.5 s, then RR intervals with uniform jitter.
  const double rr_base = 60.0 / params.mean_hr_bpm;
  std::vector<std::int64_t> centers;
  double t = 0.5;
  for (;;) {
    const std::int64_t idx = std::llround(t * params.fs);
    if (idx >= n) break;
    centers.push_back(idx);
    const double u = rng.uniform(-params.hr_jitter_pct, params.hr_jitter_pct);
    t += rr_base * (1.0 + u);
  }

  // Clean signal: Gaussian bump per beat, centered exactly on the annotated
  // sample so argmax of a clean beat recovers the annotation.
  std::vector<double> clean(static_cast<std::size_t>(n), 0.0);
  const double sigma_s = (params.qrs_width_ms / 1000.0) / (2.0 * std::sqrt(2.0 * std::log(2.0)));
  const auto support = static_cast<std::int64_t>(std::ceil(5.0 * sigma_s * params.fs));
  for (const auto c : centers) {
    const double tc = static_cast<double>(c) / params.fs;
    const std::int64_t lo = std::max<std::int64_t>(0, c - support);
    const std::int64_t hi = std::min<std::int64_t>(n - 1, c + support);
    for (std::int64_t i = lo; i <= hi; ++i) {
      const double dt = static_cast<double>(i) / params.fs - tc;
      clean[static_cast<std::size_t>(i)] +=
          params.qrs_amplitude * std::exp(-dt * dt / (2.0 * sigma_s * sigma_s));
    }
  }
  if (params.baseline_wander_amplitude != 0.0) {
    for (std::int64_t i = 0; i < n; ++i) {
      const double ti = static_cast<double>(i) / params.fs;
      clean[static_cast<std::size_t>(i)] +=
          params.baseline_wander_amplitude * std::sin(2.0 * 3.14159265358979323846 * 0.3 * ti);
    }
  }

  double noise_std = 0.0;
  if (std::isfinite(params.noise_snr_db)) {
    double power = 0.0;
    for (double v : clean) power += v * v;
    power /= static_cast<double>(n);
    noise_std = std::sqrt(power / std::pow(10.0, params.noise_snr_db / 10.0));
  }

  EcgRecord rec;
  rec.record_id = record_id;
  rec.subject_id = subject_id;
  rec.fs = params.fs;
  rec.samples.resize(static_cast<std::size_t>(n));
  for (std::int64_t i = 0; i < n; ++i) {
    double v = clean[static_cast<std::size_t>(i)];
    if (noise_std > 0.0) v += noise_std * rng.gaussian();
    rec.samples[static_cast<std::size_t>(i)] = static_cast<float>(v);
  }

  AnnotationSet ann;
  ann.record_id = record_id;
  ann.peaks = std::move(centers);
  return {std::move(rec), std::move(ann)};
}

}  // namespace qrs
