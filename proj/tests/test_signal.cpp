#include <doctest.h>

#include <cmath>

#include "e2/signal.hpp"
#include "testutil.hpp"

using namespace e2;
using namespace e2::testutil;

TEST_CASE("bandpass keeps the passband and kills the stopband") {
  double fs = 1000.0;
  auto in_band = make_tone(10.0, fs, 10.0);
  auto out = bandpass_filter(in_band, 0.1, 70.0, fs);
  CHECK(out.size() == in_band.size());
  auto kept = trim_edges(out, 1.0, fs);
  CHECK(tone_amplitude(kept, 10.0, fs) == doctest::Approx(1.0).epsilon(0.05));

  auto stop = make_tone(200.0, fs, 10.0);
  auto squashed = trim_edges(bandpass_filter(stop, 0.1, 70.0, fs), 1.0, fs);
  // >= 20 dB attenuation
  CHECK(tone_amplitude(squashed, 200.0, fs) < 0.1);

  std::vector<double> zeros(5000, 0.0);
  auto z = bandpass_filter(zeros, 0.1, 70.0, fs);
  for (double v : z) CHECK(v == 0.0);

  CHECK_THROWS(bandpass_filter(in_band, 0.1, 600.0, fs));  // aliasing edge
  std::vector<double> bad = {1.0, std::nan("")};
  CHECK_THROWS(bandpass_filter(bad, 0.1, 70.0, fs));
}

TEST_CASE("notch nulls 50 Hz and spares neighbors") {
  double fs = 1000.0;
  auto hum = make_tone(50.0, fs, 10.0);
  auto out = trim_edges(notch_filter(hum, 50.0, fs), 1.0, fs);
  CHECK(tone_amplitude(out, 50.0, fs) < 0.1);

  auto near = make_tone(40.0, fs, 10.0);
  auto kept = trim_edges(notch_filter(near, 50.0, fs), 1.0, fs);
  CHECK(tone_amplitude(kept, 40.0, fs) == doctest::Approx(1.0).epsilon(0.10));

  std::vector<double> zeros(2000, 0.0);
  for (double v : notch_filter(zeros, 50.0, fs)) CHECK(v == 0.0);

  CHECK_THROWS(notch_filter(hum, 500.0, fs));
}

TEST_CASE("filters are linear") {
  Rng rng(3);
  std::vector<double> x(4000), y(4000);
  for (auto& v : x) v = rng.normal();
  for (auto& v : y) v = rng.normal();
  double a = 1.7, b = -0.6;
  std::vector<double> combo(4000);
  for (size_t i = 0; i < combo.size(); ++i) combo[i] = a * x[i] + b * y[i];

  auto fc = bandpass_filter(combo, 0.1, 70.0, 1000.0);
  auto fx = bandpass_filter(x, 0.1, 70.0, 1000.0);
  auto fy = bandpass_filter(y, 0.1, 70.0, 1000.0);
  double num = 0, den = 0;
  for (size_t i = 0; i < fc.size(); ++i) {
    double lin = a * fx[i] + b * fy[i];
    num += (fc[i] - lin) * (fc[i] - lin);
    den += fc[i] * fc[i];
  }
  CHECK(std::sqrt(num / den) < 1e-6);
}

TEST_CASE("resample length, identity and content") {
  auto x = make_tone(5.0, 1000.0, 10.0);
  auto y = resample(x, 1000.0, 256.0);
  CHECK(y.size() == 2560);
  CHECK(dominant_frequency(y, 256.0, 100.0) == doctest::Approx(5.0).epsilon(0.01));

  auto same = resample(x, 1000.0, 1000.0);
  CHECK(same == x);

  CHECK_THROWS(resample({}, 1000.0, 256.0));
}

TEST_CASE("select_channels") {
  Rng rng(5);
  RawRecording r;
  r.fs = 100;
  r.channel_names = {"C1", "C2", "C3", "C4"};
  r.recording_id = "rec";
  r.data = Matrix(4, 50);
  for (auto& v : r.data.v) v = rng.normal();

  auto sel = select_channels(r, {"C3", "C1"});
  CHECK(sel.data.rows == 2);
  CHECK(sel.channel_names == std::vector<std::string>{"C3", "C1"});
  for (int64_t t = 0; t < 50; ++t) {
    CHECK(sel.data.at(0, t) == r.data.at(2, t));
    CHECK(sel.data.at(1, t) == r.data.at(0, t));
  }

  auto same = select_channels(r, r.channel_names);
  CHECK(same.data.v == r.data.v);

  CHECK_THROWS_WITH_AS(select_channels(r, {"C1", "XX"}), doctest::Contains("XX"),
                       std::runtime_error);
}

TEST_CASE("average reference") {
  Matrix constant(3, 4);
  for (auto& v : constant.v) v = 3.0;
  auto zeroed = average_reference(constant);
  for (double v : zeroed.v) CHECK(v == doctest::Approx(0.0));

  Matrix two(2, 2);
  two.v = {1, 1, 3, 3};
  auto ref = average_reference(two);
  CHECK(ref.v == std::vector<double>{-1, -1, 1, 1});

  Rng rng(8);
  Matrix rnd(6, 100);
  for (auto& v : rnd.v) v = rng.normal() * 10;
  auto r1 = average_reference(rnd);
  for (int64_t t = 0; t < r1.cols; ++t) {
    double mean = 0;
    for (int64_t c = 0; c < r1.rows; ++c) mean += r1.at(c, t);
    CHECK(std::fabs(mean / r1.rows) < 1e-6);
  }
  // idempotence
  auto r2 = average_reference(r1);
  for (size_t i = 0; i < r1.v.size(); ++i) CHECK(std::fabs(r1.v[i] - r2.v[i]) < 1e-9);

  Matrix single(1, 4);
  CHECK_THROWS(average_reference(single));
}

TEST_CASE("segment and crop") {
  PreprocessConfig cfg;
  Rng rng(13);
  RawRecording r;
  r.fs = 256.0;
  r.recording_id = "rec35";
  r.channel_names = {"A", "B"};
  r.data = Matrix(2, static_cast<int64_t>(35.0 * 256.0));
  for (auto& v : r.data.v) v = rng.normal();

  auto windows = segment_and_crop(r, cfg, 42);
  CHECK(windows.size() == 3);  // floor(35/10)
  for (const auto& w : windows) {
    CHECK(w.data.cols == 1024);  // 4 s * 256 Hz
    CHECK(w.data.rows == 2);
    CHECK(w.crop_offset >= 0);
    CHECK(w.crop_offset <= (10 - 4) * 256);
  }

  // crop containment: window equals segment[:, o : o+T]
  int64_t seg_len = cfg.segment_samples();
  for (size_t s = 0; s < windows.size(); ++s) {
    const auto& w = windows[s];
    for (int64_t c = 0; c < 2; ++c)
      for (int64_t t = 0; t < w.data.cols; ++t)
        CHECK(w.data.at(c, t) ==
              r.data.at(c, static_cast<int64_t>(s) * seg_len + w.crop_offset + t));
  }

  // determinism, byte for byte
  auto again = segment_and_crop(r, cfg, 42);
  for (size_t i = 0; i < windows.size(); ++i) CHECK(windows[i].data.v == again[i].data.v);

  // shorter than one segment -> empty, not an error
  RawRecording brief = r;
  brief.data = Matrix(2, static_cast<int64_t>(9.9 * 256.0));
  brief.channel_names = {"A", "B"};
  CHECK(segment_and_crop(brief, cfg, 1).empty());
}

TEST_CASE("preprocess chain on a synthetic recording") {
  PreprocessConfig cfg;
  cfg.channel_subset = {"CH01", "CH03", "CH05", "CH07", "CH02", "CH00"};
  auto rec = synth_recording(Emotion::fear, 35.0, 8, 1000.0, 77, "fix");

  auto windows = preprocess(rec, cfg, 99);
  CHECK(windows.size() == 3);
  for (const auto& w : windows) {
    CHECK(w.data.rows == 6);
    CHECK(w.data.cols == 1024);
    CHECK(w.emotion == Emotion::fear);
    for (int64_t t = 0; t < w.data.cols; ++t) {
      double mean = 0;
      for (int64_t c = 0; c < w.data.rows; ++c) mean += w.data.at(c, t);
      CHECK(std::fabs(mean / w.data.rows) < 1e-6);
    }
  }

  // pipeline determinism
  auto again = preprocess(rec, cfg, 99);
  REQUIRE(again.size() == windows.size());
  for (size_t i = 0; i < windows.size(); ++i) {
    CHECK(windows[i].data.v == again[i].data.v);
    CHECK(windows[i].window_id == again[i].window_id);
  }

  // zero input stays zero through the linear chain
  RawRecording silent = rec;
  std::fill(silent.data.v.begin(), silent.data.v.end(), 0.0);
  for (const auto& w : preprocess(silent, cfg, 1))
    for (double v : w.data.v) CHECK(v == doctest::Approx(0.0));
}

TEST_CASE("window counting oracle over a recording mix") {
  PreprocessConfig cfg;
  std::vector<double> durations = {25.0, 31.5, 47.0, 10.0, 9.0, 62.0};
  int64_t expected = 0;
  std::vector<Window> all;
  for (size_t i = 0; i < durations.size(); ++i) {
    expected += static_cast<int64_t>(durations[i] / cfg.segment_seconds);
    auto rec = synth_recording(static_cast<Emotion>(i % kNumEmotions), durations[i], 4, 1000.0,
                               1000 + i, "mix" + std::to_string(i));
    auto w = preprocess(rec, cfg, 5);
    all.insert(all.end(), w.begin(), w.end());
  }
  CHECK(static_cast<int64_t>(all.size()) == expected);
}

TEST_CASE("synthetic recordings are deterministic and class-separable") {
  auto a = synth_recording(Emotion::happy, 20.0, 4, 1000.0, 7);
  auto b = synth_recording(Emotion::happy, 20.0, 4, 1000.0, 7);
  CHECK(a.data.v == b.data.v);
  CHECK(a.recording_id == b.recording_id);

  auto c = synth_recording(Emotion::anger, 20.0, 4, 1000.0, 7);
  std::vector<double> row_a(a.data.v.begin(), a.data.v.begin() + a.data.cols);
  std::vector<double> row_c(c.data.v.begin(), c.data.v.begin() + c.data.cols);
  // class centers: happy=4 Hz, anger=22 Hz; measure each tone in both signals
  CHECK(tone_amplitude(row_a, 4.0, 1000.0) > 3.0 * tone_amplitude(row_a, 22.0, 1000.0));
  CHECK(tone_amplitude(row_c, 22.0, 1000.0) > 3.0 * tone_amplitude(row_c, 4.0, 1000.0));

  auto brief = synth_recording(Emotion::sad, 0.5, 4, 1000.0, 9);
  PreprocessConfig cfg;
  CHECK(preprocess(brief, cfg, 3).empty());
  CHECK_THROWS(synth_recording(Emotion::sad, 0.0, 4, 1000.0, 9));
}
