#pragma once

#include <string>
#include <vector>

#include "e2/common.hpp"

namespace e2 {

// Multi-channel recording in source units (microvolts by default).
struct RawRecording {
  Matrix data;  // [channels x samples]
  double fs = 0.0;
  std::vector<std::string> channel_names;
  std::string subject_id;
  Emotion emotion = Emotion::neutral;
  std::string recording_id;

  void validate() const;
  double duration_s() const { return static_cast<double>(data.cols) / fs; }
};

// Fixed-shape training window in millivolts, average-referenced.
struct Window {
  Matrix data;  // [channels x samples]
  double fs = 256.0;
  Emotion emotion = Emotion::neutral;
  std::string window_id;
  std::string source_segment_id;
  int64_t crop_offset = 0;  // sample offset of this crop within its segment
};

struct PreprocessConfig {
  double band_low_hz = 0.1;
  double band_high_hz = 70.0;
  double notch_hz = 50.0;
  double fs_target = 256.0;
  double segment_seconds = 10.0;
  double window_seconds = 4.0;
  std::vector<std::string> channel_subset;  // empty = keep all, in source order
  double scale_to_mv = 1e-3;                // source unit -> mV (default assumes uV)
  int crops_per_segment = 1;

  void validate() const;
  int64_t window_samples() const {
    return static_cast<int64_t>(window_seconds * fs_target + 0.5);
  }
  int64_t segment_samples() const {
    return static_cast<int64_t>(segment_seconds * fs_target + 0.5);
  }
};

// Zero-phase 4th-order Butterworth band edges (high-pass + low-pass biquad
// cascades, applied forward-backward).
std::vector<double> bandpass_filter(const std::vector<double>& x, double low_hz, double high_hz,
                                    double fs);
// Zero-phase biquad notch, quality factor 30.
std::vector<double> notch_filter(const std::vector<double>& x, double f0_hz, double fs);
// Windowed-sinc resampler (Kaiser beta=8.6, 64-tap kernel). Output length is
// round(len * fs_out / fs_in).
std::vector<double> resample(const std::vector<double>& x, double fs_in, double fs_out);

RawRecording select_channels(const RawRecording& r, const std::vector<std::string>& subset);
// Subtract the cross-channel mean at every time sample.
Matrix average_reference(const Matrix& w);
// One random 4 s crop per 10 s segment (crops_per_segment to draw more).
std::vector<Window> segment_and_crop(const RawRecording& r, const PreprocessConfig& cfg,
                                     uint64_t rng_seed);
// Full conditioning chain: bandpass -> notch -> channel select -> resample ->
// mV scale -> average reference -> segment+crop.
std::vector<Window> preprocess(const RawRecording& r, const PreprocessConfig& cfg, uint64_t seed);

// Synthetic fixture recording: 1/f background plus an emotion-indexed
// narrowband oscillation (class k centered at 4+3k Hz with a class-specific
// per-channel gain pattern), so classes are separable by a learned encoder.
RawRecording synth_recording(Emotion emotion, double duration_s, int64_t channels, double fs,
                             uint64_t seed, const std::string& recording_id = "");

}  // namespace e2
