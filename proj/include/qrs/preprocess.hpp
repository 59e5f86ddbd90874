#pragma once

#include <cstdint>
#include <vector>

#include "qrs/signal_io.hpp"

namespace qrs {

// Per-sample 0/1 labeling, same length as the signal it is paired with.
using BinaryMask = std::vector<std::uint8_t>;

// One windowed slice of a record. `signal` is segment-level standard-score
// normalized; `mask` is populated for training segments only. valid_len marks
// how many leading samples are real data (test segments zero-pad the tail).
struct Segment {
  std::string record_id;
  std::int64_t start = 0;
  int valid_len = 0;
  std::vector<double> signal;
  BinaryMask mask;
};

// Standard-score over the whole sequence (population std). A near-constant
// input (std < 1e-8) maps to all zeros.
std::vector<double> normalize(const std::vector<double>& signal);

// Resamples to target_fs. Output length = round(n * target_fs / fs).
// Downsampling applies a 51-tap Hamming-windowed sinc FIR (cutoff
// 0.45 * target_fs) forward and backward for zero phase, then linear
// interpolation; upsampling is pure linear interpolation; equal rates copy.
EcgRecord resample(const EcgRecord& record, int target_fs);

// Maps indices i -> round(i * fs_out / fs_in), clipped to new_length - 1,
// deduplicated preserving order.
AnnotationSet rescale_annotations(const AnnotationSet& ann, int fs_in, int fs_out,
                                  std::int64_t new_length);

// Ones over [r - h, r + h] per peak, h = round(half_width_ms/1000 * fs)
// (+-5 samples at 100 Hz), clipped to the record bounds.
BinaryMask make_mask(const AnnotationSet& ann, std::int64_t length, int fs,
                     double half_width_ms = 50.0);

// Overlapping training windows: window_s seconds long with hop_s hop
// (3 s / 1 s -> 300 samples, hop 100 at 100 Hz). Windows that would overrun
// the record end are dropped. Signals normalized, masks sliced raw.
std::vector<Segment> segment_train(const EcgRecord& record, const BinaryMask& mask,
                                   double window_s = 3.0, double hop_s = 1.0);

// Non-overlapping test windows; the final partial window is normalized over
// its valid samples then zero-padded to the full window length.
std::vector<Segment> segment_test(const EcgRecord& record, double window_s = 3.0);

}  // namespace qrs
