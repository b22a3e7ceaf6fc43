#include "e2/window_store.hpp"

#include <algorithm>
#include <cstring>
#include <filesystem>
#include <fstream>

#include <json.hpp>

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

namespace e2 {

namespace {

template <typename T>
void put_le(std::ostream& os, T v) {
  unsigned char buf[sizeof(T)];
  uint64_t u = 0;
  std::memcpy(&u, &v, sizeof(T));
  for (size_t i = 0; i < sizeof(T); ++i) buf[i] = static_cast<unsigned char>((u >> (8 * i)) & 0xff);
  os.write(reinterpret_cast<const char*>(buf), sizeof(T));
}

void put_f32(std::ostream& os, float v) {
  uint32_t u;
  std::memcpy(&u, &v, 4);
  put_le<uint32_t>(os, u);
}

template <typename T>
T get_le(std::istream& is, const std::string& what) {
  unsigned char buf[sizeof(T)];
  is.read(reinterpret_cast<char*>(buf), sizeof(T));
  E2_CHECK(static_cast<size_t>(is.gcount()) == sizeof(T),
           "window store: truncated while reading " + what);
  uint64_t u = 0;
  for (size_t i = 0; i < sizeof(T); ++i) u |= static_cast<uint64_t>(buf[i]) << (8 * i);
  T v;
  std::memcpy(&v, &u, sizeof(T));
  return v;
}

float get_f32(std::istream& is, const std::string& what) {
  uint32_t u = get_le<uint32_t>(is, what);
  float v;
  std::memcpy(&v, &u, 4);
  return v;
}

constexpr char kMagic[4] = {'E', '2', 'W', 'D'};
constexpr uint16_t kVersion = 1;

}  // namespace

void save_windows(const std::string& path, const std::vector<Window>& windows) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  E2_CHECK(os.good(), "window store: cannot open '" + path + "' for writing");
  os.write(kMagic, 4);
  put_le<uint16_t>(os, kVersion);
  put_le<uint32_t>(os, static_cast<uint32_t>(windows.size()));

  std::ofstream idx(path + ".idx.jsonl", std::ios::trunc);
  E2_CHECK(idx.good(), "window store: cannot open index sidecar for '" + path + "'");

  for (const auto& w : windows) {
    E2_CHECK(w.data.rows > 0 && w.data.cols > 0, "window store: empty window '" + w.window_id + "'");
    int64_t offset = os.tellp();
    json line;
    line["id"] = w.window_id;
    line["offset"] = offset;
    line["emotion"] = to_string(w.emotion);
    idx << line.dump() << "\n";

    put_le<uint16_t>(os, static_cast<uint16_t>(w.data.rows));
    put_le<uint32_t>(os, static_cast<uint32_t>(w.data.cols));
    put_f32(os, static_cast<float>(w.fs));
    unsigned char code = static_cast<unsigned char>(w.emotion);
    os.write(reinterpret_cast<const char*>(&code), 1);
    E2_CHECK(w.window_id.size() < 65536, "window store: id too long");
    put_le<uint16_t>(os, static_cast<uint16_t>(w.window_id.size()));
    os.write(w.window_id.data(), static_cast<std::streamsize>(w.window_id.size()));
    for (double v : w.data.v) put_f32(os, static_cast<float>(v));
  }
  E2_CHECK(os.good() && idx.good(), "window store: write failed for '" + path + "'");
}

std::vector<Window> load_windows(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  E2_CHECK(is.good(), "window store: cannot open '" + path + "'");
  char magic[4];
  is.read(magic, 4);
  E2_CHECK(is.gcount() == 4 && std::memcmp(magic, kMagic, 4) == 0,
           "window store: bad magic in '" + path + "'");
  uint16_t version = get_le<uint16_t>(is, "version");
  E2_CHECK(version == kVersion, "window store: unsupported version in '" + path + "'");
  uint32_t count = get_le<uint32_t>(is, "count");
  std::vector<Window> out;
  out.reserve(count);
  for (uint32_t i = 0; i < count; ++i) {
    Window w;
    uint16_t channels = get_le<uint16_t>(is, "channel count");
    uint32_t samples = get_le<uint32_t>(is, "sample count");
    w.fs = get_f32(is, "sample rate");
    unsigned char code;
    is.read(reinterpret_cast<char*>(&code), 1);
    E2_CHECK(is.gcount() == 1 && code < kNumEmotions, "window store: bad emotion code");
    w.emotion = static_cast<Emotion>(code);
    uint16_t id_len = get_le<uint16_t>(is, "id length");
    w.window_id.resize(id_len);
    is.read(w.window_id.data(), id_len);
    E2_CHECK(is.gcount() == id_len, "window store: truncated id");
    // segment id recovered from the id convention "<segment>_c<k>"
    size_t pos = w.window_id.rfind("_c");
    if (pos != std::string::npos &&
        w.window_id.find_first_not_of("0123456789", pos + 2) == std::string::npos)
      w.source_segment_id = w.window_id.substr(0, pos);
    w.data = Matrix(channels, samples);
    for (auto& v : w.data.v) v = static_cast<double>(get_f32(is, "sample"));
    out.push_back(std::move(w));
  }
  return out;
}

void save_raw_recording(const std::string& dir, const RawRecording& r) {
  r.validate();
  fs::create_directories(dir);
  std::string stem = (fs::path(dir) / r.recording_id).string();
  json meta;
  meta["recording_id"] = r.recording_id;
  meta["subject_id"] = r.subject_id;
  meta["emotion"] = to_string(r.emotion);
  meta["fs"] = r.fs;
  meta["channel_names"] = r.channel_names;
  meta["samples"] = r.data.cols;
  std::ofstream mo(stem + ".json", std::ios::trunc);
  E2_CHECK(mo.good(), "cannot write " + stem + ".json");
  mo << meta.dump(2) << "\n";

  std::ofstream bo(stem + ".f32", std::ios::binary | std::ios::trunc);
  E2_CHECK(bo.good(), "cannot write " + stem + ".f32");
  for (double v : r.data.v) put_f32(bo, static_cast<float>(v));
}

std::vector<RawRecording> load_raw_recordings(const std::string& dir) {
  E2_CHECK(fs::is_directory(dir), "recording directory '" + dir + "' does not exist");
  std::vector<std::string> stems;
  for (const auto& entry : fs::directory_iterator(dir))
    if (entry.path().extension() == ".json") stems.push_back(entry.path().stem().string());
  std::sort(stems.begin(), stems.end());

  std::vector<RawRecording> out;
  for (const auto& stem : stems) {
    std::string base = (fs::path(dir) / stem).string();
    std::ifstream mi(base + ".json");
    E2_CHECK(mi.good(), "cannot read " + base + ".json");
    json meta = json::parse(mi);
    RawRecording r;
    r.recording_id = meta.at("recording_id").get<std::string>();
    r.subject_id = meta.value("subject_id", "");
    r.emotion = parse_emotion(meta.at("emotion").get<std::string>());
    r.fs = meta.at("fs").get<double>();
    r.channel_names = meta.at("channel_names").get<std::vector<std::string>>();
    int64_t samples = meta.at("samples").get<int64_t>();
    int64_t channels = static_cast<int64_t>(r.channel_names.size());

    std::ifstream bi(base + ".f32", std::ios::binary);
    E2_CHECK(bi.good(), "cannot read " + base + ".f32");
    r.data = Matrix(channels, samples);
    for (auto& v : r.data.v) v = static_cast<double>(get_f32(bi, base + ".f32"));
    r.validate();
    out.push_back(std::move(r));
  }
  return out;
}

}  // namespace e2
