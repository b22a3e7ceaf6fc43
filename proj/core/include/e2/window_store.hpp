#pragma once

#include <string>
#include <vector>

#include "e2/signal.hpp"

namespace e2 {

// Binary window store, one file per split. Layout, little-endian:
//   magic "E2WD", u16 version=1, u32 count,
//   per window: u16 channels, u32 samples, f32 sample_rate, u8 emotion code,
//   u16 id length + UTF-8 id, f32 data channel-major.
// A JSON-lines sidecar (<path>.idx.jsonl) lists {"id", "offset", "emotion"}
// per window, offset being the byte position of the window record.
void save_windows(const std::string& path, const std::vector<Window>& windows);
std::vector<Window> load_windows(const std::string& path);

// Ingestion adapter for external recordings: a directory of <stem>.json
// metadata files ({"recording_id","subject_id","emotion","fs",
// "channel_names"}) next to <stem>.f32 raw channel-major float32 samples.
void save_raw_recording(const std::string& dir, const RawRecording& r);
std::vector<RawRecording> load_raw_recordings(const std::string& dir);

}  // namespace e2
