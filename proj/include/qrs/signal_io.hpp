#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "qrs/error.hpp"

namespace qrs {

// Single-channel ECG record. Samples are stored as float32 so the `.f32`
// binary format round-trips bit-exactly.
struct EcgRecord {
  std::string record_id;
  std::string subject_id;
  int fs = 0;  // samples per second
  std::vector<float> samples;
};

// Sorted reference R-peak sample indices for one record.
struct AnnotationSet {
  std::string record_id;
  std::vector<std::int64_t> peaks;
};

struct SynthParams {
  double duration_s = 60.0;
  int fs = 100;
  double mean_hr_bpm = 80.0;
  double hr_jitter_pct = 0.1;        // fractional RR perturbation, uniform +-pct
  double qrs_width_ms = 80.0;        // bump width at half maximum
  double qrs_amplitude = 1.0;        // mV
  double noise_snr_db = 10.0;        // +inf means noiseless
  double baseline_wander_amplitude = 0.0;  // mV, 0.3 Hz sinusoid
  std::uint64_t seed = 1;
};

struct LoadedAnnotations {
  AnnotationSet ann;
  bool was_unsorted = false;  // input needed sorting; warning, not an error
};

// Loads a `.csv` (one float per line) or `.f32` (raw little-endian binary32)
// signal file. fs/record_id/subject_id come from the caller (or a sidecar,
// see load_record_with_sidecar).
EcgRecord load_record(const std::string& path, int fs, const std::string& record_id,
                      const std::string& subject_id);

// Loads a `.f32` file using its `<name>.json` sidecar header
// ({record_id, subject_id, fs, n_samples}).
EcgRecord load_record_with_sidecar(const std::string& path);

// Writes `.csv` (7 significant digits) or `.f32` plus its JSON sidecar,
// selected by extension.
void save_record(const EcgRecord& record, const std::string& path);

// One non-negative integer index per line; output sorted and deduplicated.
LoadedAnnotations load_annotations(const std::string& path);

void save_annotations(const AnnotationSet& ann, const std::string& path);

// Seeded synthetic ECG: one Gaussian QRS bump per beat plus 0.3 Hz baseline
// wander plus white Gaussian noise at noise_snr_db relative to the clean
// (pre-noise) signal power. Beat times start at 0.5 s and advance by
// 60/mean_hr_bpm seconds, each interval perturbed uniformly by +-hr_jitter_pct.
// Annotations carry the integer sample index of each bump center.
std::pair<EcgRecord, AnnotationSet> synth_ecg(const SynthParams& params,
                                              const std::string& record_id = "synthetic",
                                              const std::string& subject_id = "synthetic");

}  // namespace qrs
