#include "qrs/preprocess.hpp"

#include <algorithm>
#include <cmath>

namespace qrs {

namespace {

constexpr int kFirTaps = 51;

std::vector<double> lowpass_taps(double cutoff_hz, double fs_in) {
  const double nu = cutoff_hz / fs_in;  // cycles per input sample
  const int m = kFirTaps - 1;
  std::vector<double> h(kFirTaps);
  double sum = 0.0;
  for (int i = 0; i < kFirTaps; ++i) {
    const double x = i - m / 2.0;
    const double arg = 2.0 * nu * x;
    const double sinc = arg == 0.0 ? 1.0 : std::sin(3.14159265358979323846 * arg) / (3.14159265358979323846 * arg);
    const double window = 0.54 - 0.46 * std::cos(2.0 * 3.14159265358979323846 * i / m);
    h[i] = 2.0 * nu * sinc * window;
    sum += h[i];
  }
  for (auto& v : h) v /= sum;  // unit DC gain
  return h;
}

std::vector<double> filter_causal(const std::vector<double>& x, const std::vector<double>& h) {
  const std::size_t n = x.size();
  std::vector<double> y(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    double acc = 0.0;
    const std::size_t jmax = std::min<std::size_t>(h.size() - 1, i);
    for (std::size_t j = 0; j <= jmax; ++j) acc += h[j] * x[i - j];
    y[i] = acc;
  }
  return y;
}

// Forward-backward FIR pass (zero phase). Edges are extended by odd
// reflection so transients do not leak into the kept region.
std::vector<double> filtfilt(const std::vector<double>& x, const std::vector<double>& h) {
  const std::size_t n = x.size();
  const std::size_t pad = std::min<std::size_t>(3 * (h.size() - 1), n - 1);
  std::vector<double> ext;
  ext.reserve(n + 2 * pad);
  for (std::size_t i = pad; i >= 1; --i) ext.push_back(2.0 * x[0] - x[i]);
  ext.insert(ext.end(), x.begin(), x.end());
  for (std::size_t i = 1; i <= pad; ++i) ext.push_back(2.0 * x[n - 1] - x[n - 1 - i]);

  std::vector<double> y = filter_causal(ext, h);
  std::reverse(y.begin(), y.end());
  y = filter_causal(y, h);
  std::reverse(y.begin(), y.end());
  return {y.begin() + static_cast<std::ptrdiff_t>(pad), y.begin() + static_cast<std::ptrdiff_t>(pad + n)};
}

std::vector<float> linear_interp(const std::vector<double>& x, std::int64_t n_out, double step) {
  const auto n_in = static_cast<std::int64_t>(x.size());
  std::vector<float> out(static_cast<std::size_t>(n_out));
  for (std::int64_t j = 0; j < n_out; ++j) {
    const double p = j * step;
    auto i0 = static_cast<std::int64_t>(std::floor(p));
    if (i0 >= n_in - 1) {
      out[static_cast<std::size_t>(j)] = static_cast<float>(x[static_cast<std::size_t>(n_in - 1)]);
      continue;
    }
    const double frac = p - static_cast<double>(i0);
    const double v = x[static_cast<std::size_t>(i0)] * (1.0 - frac) + x[static_cast<std::size_t>(i0 + 1)] * frac;
    out[static_cast<std::size_t>(j)] = static_cast<float>(v);
  }
  return out;
}

std::vector<double> normalize_span(const float* data, std::size_t n) {
  double mean = 0.0;
  for (std::size_t i = 0; i < n; ++i) mean += data[i];
  mean /= static_cast<double>(n);
  double var = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double d = data[i] - mean;
    var += d * d;
  }
  const double std_dev = std::sqrt(var / static_cast<double>(n));
  std::vector<double> out(n);
  if (std_dev < 1e-8) {
    std::fill(out.begin(), out.end(), 0.0);
    return out;
  }
  for (std::size_t i = 0; i < n; ++i) out[i] = (data[i] - mean) / std_dev;
  return out;
}

}  // namespace

std::vector<double> normalize(const std::vector<double>& signal) {
  if (signal.empty()) fail(Err::EmptyRecord, "normalize: empty input");
  const std::size_t n = signal.size();
  double mean = 0.0;
  for (double v : signal) mean += v;
  mean /= static_cast<double>(n);
  double var = 0.0;
  for (double v : signal) {
    const double d = v - mean;
    var += d * d;
  }
  const double std_dev = std::sqrt(var / static_cast<double>(n));
  std::vector<double> out(n, 0.0);
  if (std_dev < 1e-8) return out;
  for (std::size_t i = 0; i < n; ++i) out[i] = (signal[i] - mean) / std_dev;
  return out;
}

EcgRecord resample(const EcgRecord& record, int target_fs) {
  if (target_fs <= 0) fail(Err::InvalidParams, "target_fs must be positive");
  if (record.samples.empty()) fail(Err::EmptyRecord, "resample: empty record");

  EcgRecord out;
  out.record_id = record.record_id;
  out.subject_id = record.subject_id;
  out.fs = target_fs;

  if (target_fs == record.fs) {
    out.samples = record.samples;
    return out;
  }

  const auto n_in = static_cast<std::int64_t>(record.samples.size());
  const auto n_out =
      static_cast<std::int64_t>(std::llround(static_cast<double>(n_in) * target_fs / record.fs));
  const double step = static_cast<double>(record.fs) / target_fs;

  std::vector<double> x(record.samples.begin(), record.samples.end());
  if (target_fs < record.fs) {
    const auto taps = lowpass_taps(0.45 * target_fs, record.fs);
    x = filtfilt(x, taps);
  }
  out.samples = linear_interp(x, n_out, step);
  return out;
}

AnnotationSet rescale_annotations(const AnnotationSet& ann, int fs_in, int fs_out,
                                  std::int64_t new_length) {
  if (fs_in <= 0 || fs_out <= 0) fail(Err::InvalidParams, "sampling rates must be positive");
  AnnotationSet out;
  out.record_id = ann.record_id;
  out.peaks.reserve(ann.peaks.size());
  for (const auto i : ann.peaks) {
    auto j = static_cast<std::int64_t>(std::llround(static_cast<double>(i) * fs_out / fs_in));
    j = std::min(j, new_length - 1);
    if (out.peaks.empty() || out.peaks.back() != j) out.peaks.push_back(j);
  }
  return out;
}

BinaryMask make_mask(const AnnotationSet& ann, std::int64_t length, int fs, double half_width_ms) {
  BinaryMask mask(static_cast<std::size_t>(length), 0);
  const auto h = static_cast<std::int64_t>(std::llround(half_width_ms / 1000.0 * fs));
  for (const auto r : ann.peaks) {
    if (r >= length) fail(Err::InvalidParams, "annotation index beyond record length");
    const std::int64_t lo = std::max<std::int64_t>(0, r - h);
    const std::int64_t hi = std::min<std::int64_t>(length - 1, r + h);
    for (std::int64_t i = lo; i <= hi; ++i) mask[static_cast<std::size_t>(i)] = 1;
  }
  return mask;
}

std::vector<Segment> segment_train(const EcgRecord& record, const BinaryMask& mask,
                                   double window_s, double hop_s) {
  if (mask.size() != record.samples.size())
    fail(Err::ShapeMismatch, "mask length does not match record length");
  const auto window = static_cast<std::int64_t>(std::llround(window_s * record.fs));
  const auto hop = static_cast<std::int64_t>(std::llround(hop_s * record.fs));
  const auto n = static_cast<std::int64_t>(record.samples.size());

  std::vector<Segment> segments;
  for (std::int64_t start = 0; start + window <= n; start += hop) {
    Segment seg;
    seg.record_id = record.record_id;
    seg.start = start;
    seg.valid_len = static_cast<int>(window);
    seg.signal = normalize_span(record.samples.data() + start, static_cast<std::size_t>(window));
    seg.mask.assign(mask.begin() + start, mask.begin() + start + window);
    segments.push_back(std::move(seg));
  }
  return segments;
}

std::vector<Segment> segment_test(const EcgRecord& record, double window_s) {
  const auto window = static_cast<std::int64_t>(std::llround(window_s * record.fs));
  const auto n = static_cast<std::int64_t>(record.samples.size());

  std::vector<Segment> segments;
  for (std::int64_t start = 0; start < n; start += window) {
    const std::int64_t valid = std::min(window, n - start);
    Segment seg;
    seg.record_id = record.record_id;
    seg.start = start;
    seg.valid_len = static_cast<int>(valid);
    seg.signal = normalize_span(record.samples.data() + start, static_cast<std::size_t>(valid));
    seg.signal.resize(static_cast<std::size_t>(window), 0.0);  // pad at post-normalization scale
    segments.push_back(std::move(seg));
  }
  return segments;
}

}  // namespace qrs
