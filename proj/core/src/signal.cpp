#include "e2/signal.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <numeric>
#include <map>

namespace e2 {

void RawRecording::validate() const {
  E2_CHECK(fs > 0, "RawRecording '" + recording_id + "': fs must be positive");
  E2_CHECK(data.rows == static_cast<int64_t>(channel_names.size()),
           "RawRecording '" + recording_id + "': " + std::to_string(data.rows) +
               " data rows but " + std::to_string(channel_names.size()) + " channel names");
  E2_CHECK(data.finite(), "RawRecording '" + recording_id + "': non-finite samples");
}

void PreprocessConfig::validate() const {
  E2_CHECK(band_low_hz > 0 && band_low_hz < band_high_hz,
           "preprocess config: need 0 < band_low < band_high");
  E2_CHECK(band_high_hz < fs_target / 2.0,
           "preprocess config: band_high must be below fs_target/2");
  E2_CHECK(notch_hz > band_low_hz && notch_hz < band_high_hz,
           "preprocess config: notch must lie inside the passband");
  E2_CHECK(segment_seconds >= window_seconds, "preprocess config: segment shorter than window");
  E2_CHECK(crops_per_segment >= 1, "preprocess config: crops_per_segment must be >= 1");
}

// ---------------------------------------------------------------- filters

namespace {

struct Biquad {
  double b0, b1, b2, a1, a2;  // normalized (a0 == 1)
};

// RBJ cookbook sections.
Biquad design_lowpass(double f, double fs, double q) {
  double w = 2.0 * M_PI * f / fs;
  double cw = std::cos(w), al = std::sin(w) / (2.0 * q);
  double a0 = 1.0 + al;
  return {(1.0 - cw) / 2.0 / a0, (1.0 - cw) / a0, (1.0 - cw) / 2.0 / a0, -2.0 * cw / a0,
          (1.0 - al) / a0};
}

Biquad design_highpass(double f, double fs, double q) {
  double w = 2.0 * M_PI * f / fs;
  double cw = std::cos(w), al = std::sin(w) / (2.0 * q);
  double a0 = 1.0 + al;
  return {(1.0 + cw) / 2.0 / a0, -(1.0 + cw) / a0, (1.0 + cw) / 2.0 / a0, -2.0 * cw / a0,
          (1.0 - al) / a0};
}

Biquad design_notch(double f, double fs, double q) {
  double w = 2.0 * M_PI * f / fs;
  double cw = std::cos(w), al = std::sin(w) / (2.0 * q);
  double a0 = 1.0 + al;
  return {1.0 / a0, -2.0 * cw / a0, 1.0 / a0, -2.0 * cw / a0, (1.0 - al) / a0};
}

void apply_biquad(std::vector<double>& x, const Biquad& f) {
  // direct form II transposed, zero initial state
  double s1 = 0.0, s2 = 0.0;
  for (auto& v : x) {
    double y = f.b0 * v + s1;
    s1 = f.b1 * v - f.a1 * y + s2;
    s2 = f.b2 * v - f.a2 * y;
    v = y;
  }
}

// forward-backward pass for zero phase
void filtfilt(std::vector<double>& x, const std::vector<Biquad>& cascade) {
  for (const auto& f : cascade) apply_biquad(x, f);
  std::reverse(x.begin(), x.end());
  for (const auto& f : cascade) apply_biquad(x, f);
  std::reverse(x.begin(), x.end());
}

void check_finite(const std::vector<double>& x, const char* what) {
  for (double v : x) E2_CHECK(std::isfinite(v), std::string(what) + ": non-finite input sample");
}

// 4th-order Butterworth = two cascaded biquads with these section Qs.
constexpr double kButterQ1 = 0.54119610014619690;  // 1/(2 cos(pi/8))
constexpr double kButterQ2 = 1.30656296487637652;  // 1/(2 cos(3 pi/8))

}  // namespace

std::vector<double> bandpass_filter(const std::vector<double>& x, double low_hz, double high_hz,
                                    double fs) {
  E2_CHECK(high_hz < fs / 2.0, "bandpass_filter: high edge " + std::to_string(high_hz) +
                                   " Hz >= Nyquist for fs " + std::to_string(fs));
  E2_CHECK(low_hz > 0 && low_hz < high_hz, "bandpass_filter: bad band edges");
  check_finite(x, "bandpass_filter");
  std::vector<double> y = x;
  std::vector<Biquad> cascade = {
      design_highpass(low_hz, fs, kButterQ1),
      design_highpass(low_hz, fs, kButterQ2),
      design_lowpass(high_hz, fs, kButterQ1),
      design_lowpass(high_hz, fs, kButterQ2),
  };
  filtfilt(y, cascade);
  return y;
}

std::vector<double> notch_filter(const std::vector<double>& x, double f0_hz, double fs) {
  E2_CHECK(f0_hz > 0 && f0_hz < fs / 2.0,
           "notch_filter: f0 " + std::to_string(f0_hz) + " Hz outside (0, fs/2)");
  check_finite(x, "notch_filter");
  std::vector<double> y = x;
  std::vector<Biquad> cascade = {design_notch(f0_hz, fs, 30.0)};
  filtfilt(y, cascade);
  return y;
}

// ---------------------------------------------------------------- resample

namespace {

double bessel_i0(double x) {
  // power series; converges fast for the arguments we use
  double sum = 1.0, term = 1.0;
  double half = x / 2.0;
  for (int k = 1; k < 64; ++k) {
    term *= (half / k) * (half / k);
    sum += term;
    if (term < 1e-16 * sum) break;
  }
  return sum;
}

constexpr int kResampleHalfWidth = 32;  // 64-tap kernel
constexpr double kKaiserBeta = 8.6;

}  // namespace

namespace {

double kernel_at(double u, double c, double i0b) {
  double t = u / kResampleHalfWidth;
  double win = bessel_i0(kKaiserBeta * std::sqrt(std::max(0.0, 1.0 - t * t))) / i0b;
  double arg = M_PI * c * u;
  double sinc = (std::fabs(arg) < 1e-12) ? 1.0 : std::sin(arg) / arg;
  return c * sinc * win;
}

}  // namespace

std::vector<double> resample(const std::vector<double>& x, double fs_in, double fs_out) {
  E2_CHECK(fs_in > 0 && fs_out > 0, "resample: sample rates must be positive");
  E2_CHECK(!x.empty(), "resample: empty input");
  if (fs_in == fs_out) return x;

  int64_t n_in = static_cast<int64_t>(x.size());
  int64_t n_out = static_cast<int64_t>(std::llround(static_cast<double>(n_in) * fs_out / fs_in));
  double ratio = fs_in / fs_out;
  // cutoff relative to input Nyquist; <1 when decimating (anti-alias)
  double c = std::min(1.0, fs_out / fs_in);
  double i0b = bessel_i0(kKaiserBeta);
  constexpr int64_t half = kResampleHalfWidth;  // 64 input taps per output sample
  constexpr int64_t taps = 2 * half + 1;

  // integral rates repeat their fractional phase with a short period, so the
  // tap weights can be tabulated once per phase
  int64_t period = 0;
  if (fs_in == std::floor(fs_in) && fs_out == std::floor(fs_out)) {
    int64_t q = static_cast<int64_t>(fs_out);
    int64_t p = static_cast<int64_t>(fs_in);
    int64_t g = std::gcd(p, q);
    period = q / g;
    if (period > 8192) period = 0;
  }

  std::vector<double> table;  // period x taps normalized weights
  std::vector<int64_t> first_tap(static_cast<size_t>(std::max<int64_t>(period, 0)));
  if (period > 0) {
    table.resize(static_cast<size_t>(period * taps));
    for (int64_t ph = 0; ph < period; ++ph) {
      double p = static_cast<double>(ph) * ratio;
      int64_t m0 = static_cast<int64_t>(std::ceil(p - half));
      first_tap[static_cast<size_t>(ph)] = m0;  // relative to floor(p) == offset below
      double wsum = 0.0;
      for (int64_t t = 0; t < taps; ++t) {
        double k = kernel_at(p - static_cast<double>(m0 + t), c, i0b);
        table[static_cast<size_t>(ph * taps + t)] = k;
        wsum += k;
      }
      for (int64_t t = 0; t < taps; ++t) table[static_cast<size_t>(ph * taps + t)] /= wsum;
    }
  }

  std::vector<double> y(static_cast<size_t>(n_out), 0.0);
  for (int64_t n = 0; n < n_out; ++n) {
    double acc = 0.0;
    if (period > 0) {
      int64_t cycle = n / period, ph = n % period;
      // p(n) = p(ph) + cycle * period * ratio, and period*ratio is integral
      int64_t base = cycle * static_cast<int64_t>(std::llround(static_cast<double>(period) * ratio));
      int64_t m0 = base + first_tap[static_cast<size_t>(ph)];
      const double* w = table.data() + ph * taps;
      int64_t t0 = std::max<int64_t>(0, -m0);
      int64_t t1 = std::min<int64_t>(taps, n_in - m0);
      for (int64_t t = t0; t < t1; ++t) acc += x[static_cast<size_t>(m0 + t)] * w[t];
      y[static_cast<size_t>(n)] = acc;
      continue;
    }
    double p = static_cast<double>(n) * ratio;
    int64_t m0 = static_cast<int64_t>(std::ceil(p - half));
    int64_t m1 = static_cast<int64_t>(std::floor(p + half));
    double wsum = 0.0;
    for (int64_t m = m0; m <= m1; ++m) {
      double k = kernel_at(p - static_cast<double>(m), c, i0b);
      wsum += k;
      if (m >= 0 && m < n_in) acc += x[static_cast<size_t>(m)] * k;
    }
    y[static_cast<size_t>(n)] = (wsum != 0.0) ? acc / wsum : acc;
  }
  return y;
}

// ---------------------------------------------------------------- reref/select

RawRecording select_channels(const RawRecording& r, const std::vector<std::string>& subset) {
  std::map<std::string, int64_t> index;
  for (size_t i = 0; i < r.channel_names.size(); ++i)
    index[r.channel_names[i]] = static_cast<int64_t>(i);
  RawRecording out;
  out.fs = r.fs;
  out.subject_id = r.subject_id;
  out.emotion = r.emotion;
  out.recording_id = r.recording_id;
  out.channel_names = subset;
  out.data = Matrix(static_cast<int64_t>(subset.size()), r.data.cols);
  for (size_t i = 0; i < subset.size(); ++i) {
    auto it = index.find(subset[i]);
    E2_CHECK(it != index.end(), "select_channels: recording '" + r.recording_id +
                                    "' has no channel named '" + subset[i] + "'");
    for (int64_t t = 0; t < r.data.cols; ++t)
      out.data.at(static_cast<int64_t>(i), t) = r.data.at(it->second, t);
  }
  return out;
}

Matrix average_reference(const Matrix& w) {
  E2_CHECK(w.rows >= 2, "average_reference: need at least 2 channels, got " +
                            std::to_string(w.rows));
  Matrix out = w;
  for (int64_t t = 0; t < w.cols; ++t) {
    double mean = 0.0;
    for (int64_t c = 0; c < w.rows; ++c) mean += w.at(c, t);
    mean /= static_cast<double>(w.rows);
    for (int64_t c = 0; c < w.rows; ++c) out.at(c, t) -= mean;
  }
  return out;
}

std::vector<Window> segment_and_crop(const RawRecording& r, const PreprocessConfig& cfg,
                                     uint64_t rng_seed) {
  int64_t seg_len = cfg.segment_samples();
  int64_t win_len = cfg.window_samples();
  int64_t n_segments = r.data.cols / seg_len;
  std::vector<Window> out;
  if (n_segments == 0) return out;

  Rng rng(rng_seed);
  int64_t max_offset = seg_len - win_len;
  for (int64_t s = 0; s < n_segments; ++s) {
    std::string segment_id = r.recording_id + "_s" + std::to_string(s);
    for (int c = 0; c < cfg.crops_per_segment; ++c) {
      int64_t offset = rng.randint(0, max_offset);
      Window w;
      w.fs = r.fs;
      w.crop_offset = offset;
      w.emotion = r.emotion;
      w.source_segment_id = segment_id;
      w.window_id = segment_id + "_c" + std::to_string(c);
      w.data = Matrix(r.data.rows, win_len);
      int64_t start = s * seg_len + offset;
      for (int64_t ch = 0; ch < r.data.rows; ++ch)
        for (int64_t t = 0; t < win_len; ++t) w.data.at(ch, t) = r.data.at(ch, start + t);
      out.push_back(std::move(w));
    }
  }
  return out;
}

std::vector<Window> preprocess(const RawRecording& r, const PreprocessConfig& cfg, uint64_t seed) {
  cfg.validate();
  r.validate();
  E2_CHECK(r.fs > 2.0 * cfg.band_high_hz,
           "preprocess: recording fs too low for the configured passband");

  RawRecording work = r;
  for (int64_t ch = 0; ch < work.data.rows; ++ch) {
    std::vector<double> row(work.data.v.begin() + ch * work.data.cols,
                            work.data.v.begin() + (ch + 1) * work.data.cols);
    row = bandpass_filter(row, cfg.band_low_hz, cfg.band_high_hz, work.fs);
    row = notch_filter(row, cfg.notch_hz, work.fs);
    std::copy(row.begin(), row.end(), work.data.v.begin() + ch * work.data.cols);
  }

  if (!cfg.channel_subset.empty()) work = select_channels(work, cfg.channel_subset);

  // resample every channel, then rebuild the data matrix at the new rate
  int64_t n_out = static_cast<int64_t>(
      std::llround(static_cast<double>(work.data.cols) * cfg.fs_target / work.fs));
  Matrix resampled(work.data.rows, n_out);
  for (int64_t ch = 0; ch < work.data.rows; ++ch) {
    std::vector<double> row(work.data.v.begin() + ch * work.data.cols,
                            work.data.v.begin() + (ch + 1) * work.data.cols);
    row = resample(row, work.fs, cfg.fs_target);
    E2_CHECK(static_cast<int64_t>(row.size()) == n_out, "preprocess: resample length drifted");
    std::copy(row.begin(), row.end(), resampled.v.begin() + ch * n_out);
  }
  work.data = std::move(resampled);
  work.fs = cfg.fs_target;

  for (auto& v : work.data.v) v *= cfg.scale_to_mv;
  work.data = average_reference(work.data);

  return segment_and_crop(work, cfg, derive_seed(seed, r.recording_id));
}

// ---------------------------------------------------------------- fixtures

RawRecording synth_recording(Emotion emotion, double duration_s, int64_t channels, double fs,
                             uint64_t seed, const std::string& recording_id) {
  E2_CHECK(duration_s > 0, "synth_recording: duration must be positive");
  E2_CHECK(channels >= 1 && fs > 0, "synth_recording: bad channel count or fs");

  int64_t n = static_cast<int64_t>(duration_s * fs);
  RawRecording r;
  r.fs = fs;
  r.emotion = emotion;
  r.subject_id = "synth";
  r.recording_id = recording_id.empty()
                       ? "syn-" + to_string(emotion) + "-" + hex64(seed).substr(8)
                       : recording_id;
  r.channel_names.reserve(static_cast<size_t>(channels));
  for (int64_t c = 0; c < channels; ++c) {
    char buf[8];
    std::snprintf(buf, sizeof(buf), "CH%02d", static_cast<int>(c));
    r.channel_names.push_back(buf);
  }
  r.data = Matrix(channels, n);

  int cls = static_cast<int>(emotion);
  double f_emotion = 4.0 + 3.0 * cls;  // class-indexed narrowband center

  // class-specific per-channel gain pattern, stable across recordings
  std::vector<double> gain(static_cast<size_t>(channels));
  {
    Rng class_rng(derive_seed(0xE2C1A55, "class-gain-" + to_string(emotion)));
    for (auto& g : gain) g = class_rng.uniform(0.3, 1.5);
  }

  Rng rng(seed);
  // background: 24 log-spaced components, 0.5..80 Hz, 1/f amplitudes
  constexpr int kComponents = 24;
  std::vector<double> freqs(kComponents);
  for (int i = 0; i < kComponents; ++i)
    freqs[static_cast<size_t>(i)] = 0.5 * std::pow(80.0 / 0.5, i / double(kComponents - 1));

  // every sinusoid advances by complex rotation instead of per-sample sin()
  for (int64_t c = 0; c < channels; ++c) {
    std::vector<std::complex<double>> state(kComponents + 1), step(kComponents + 1);
    for (int i = 0; i < kComponents; ++i) {
      double ph = rng.uniform(0.0, 2.0 * M_PI);
      state[static_cast<size_t>(i)] = std::polar(12.0 / freqs[static_cast<size_t>(i)], ph);
      step[static_cast<size_t>(i)] = std::polar(1.0, 2.0 * M_PI * freqs[static_cast<size_t>(i)] / fs);
    }
    state[kComponents] = std::polar(18.0 * gain[static_cast<size_t>(c)], rng.uniform(0.0, 2.0 * M_PI));
    step[kComponents] = std::polar(1.0, 2.0 * M_PI * f_emotion / fs);
    for (int64_t t = 0; t < n; ++t) {
      double v = 2.0 * rng.normal();
      for (size_t i = 0; i <= kComponents; ++i) {
        v += state[i].imag();
        state[i] *= step[i];
      }
      r.data.at(c, t) = v;  // microvolt scale
    }
  }
  return r;
}

}  // namespace e2
