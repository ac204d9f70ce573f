#include "resonant/audio_io.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <set>

#include <json.hpp>

#include "resonant/errors.hpp"

namespace resonant {

namespace fs = std::filesystem;

namespace {

constexpr std::uint16_t kFormatPcm = 1;
constexpr std::uint16_t kFormatFloat = 3;
constexpr std::uint16_t kFormatExtensible = 0xFFFE;

std::uint16_t read_u16(const std::uint8_t* p) {
  return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
}

std::uint32_t read_u32(const std::uint8_t* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

void put_u16(std::vector<std::uint8_t>& out, std::uint16_t v) {
  out.push_back(static_cast<std::uint8_t>(v & 0xFF));
  out.push_back(static_cast<std::uint8_t>(v >> 8));
}

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>((v >> (8 * i)) & 0xFF));
}

void put_tag(std::vector<std::uint8_t>& out, const char* tag) {
  out.insert(out.end(), tag, tag + 4);
}

}  // namespace

AudioClip decode_wav(const std::vector<std::uint8_t>& bytes) {
  if (bytes.size() < 12 || std::memcmp(bytes.data(), "RIFF", 4) != 0 ||
      std::memcmp(bytes.data() + 8, "WAVE", 4) != 0) {
    throw FormatError("not a RIFF/WAVE file");
  }

  bool have_fmt = false;
  std::uint16_t format = 0, channels = 0, bits = 0, block_align = 0;
  std::uint32_t sample_rate = 0;
  const std::uint8_t* data = nullptr;
  std::size_t data_size = 0;

  std::size_t pos = 12;
  while (pos + 8 <= bytes.size()) {
    const std::uint8_t* chunk = bytes.data() + pos;
    const std::uint32_t size = read_u32(chunk + 4);
    const std::size_t body = pos + 8;
    if (std::memcmp(chunk, "fmt ", 4) == 0) {
      if (size < 16 || body + size > bytes.size()) throw FormatError("truncated fmt chunk");
      format = read_u16(bytes.data() + body);
      channels = read_u16(bytes.data() + body + 2);
      sample_rate = read_u32(bytes.data() + body + 4);
      block_align = read_u16(bytes.data() + body + 12);
      bits = read_u16(bytes.data() + body + 14);
      if (format == kFormatExtensible) {
        if (size < 26) throw FormatError("truncated extensible fmt chunk");
        format = read_u16(bytes.data() + body + 24);
      }
      have_fmt = true;
    } else if (std::memcmp(chunk, "data", 4) == 0) {
      if (!have_fmt) throw FormatError("data chunk precedes fmt chunk");
      if (body + size > bytes.size()) throw FormatError("truncated data chunk");
      data = bytes.data() + body;
      data_size = size;
      break;
    }
    pos = body + size + (size & 1u);
  }

  if (!have_fmt) throw FormatError("missing fmt chunk");
  if (data == nullptr) throw FormatError("missing data chunk");
  if (channels != 1 && channels != 2) {
    throw UnsupportedError("unsupported channel count " + std::to_string(channels));
  }
  const bool pcm16 = format == kFormatPcm && bits == 16;
  const bool float32 = format == kFormatFloat && bits == 32;
  if (!pcm16 && !float32) {
    throw UnsupportedError("unsupported encoding (format " + std::to_string(format) + ", " +
                           std::to_string(bits) + " bits)");
  }
  if (sample_rate == 0) throw FormatError("sample rate is zero");
  const std::size_t frame_bytes = static_cast<std::size_t>(channels) * (bits / 8);
  if (block_align != frame_bytes) throw FormatError("inconsistent block alignment");
  if (data_size % frame_bytes != 0) throw FormatError("data chunk is not a whole number of frames");

  const std::size_t frames = data_size / frame_bytes;
  if (frames == 0) throw EmptyError("WAV file contains no samples");

  AudioClip clip;
  clip.sample_rate = static_cast<int>(sample_rate);
  clip.samples.resize(frames);
  for (std::size_t f = 0; f < frames; ++f) {
    double acc = 0.0;
    for (std::size_t c = 0; c < channels; ++c) {
      const std::uint8_t* p = data + f * frame_bytes + c * (bits / 8);
      double v;
      if (pcm16) {
        v = static_cast<std::int16_t>(read_u16(p)) / 32768.0;
      } else {
        v = std::bit_cast<float>(read_u32(p));
        if (!std::isfinite(v)) throw FormatError("non-finite float sample");
      }
      acc += v;
    }
    clip.samples[f] = acc / channels;
  }
  return clip;
}

AudioClip load_wav(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  try {
    return decode_wav(bytes);
  } catch (const FormatError& e) {
    throw FormatError(path.string() + ": " + e.what());
  } catch (const UnsupportedError& e) {
    throw UnsupportedError(path.string() + ": " + e.what());
  } catch (const EmptyError& e) {
    throw EmptyError(path.string() + ": " + e.what());
  }
}

std::vector<std::uint8_t> encode_wav(const AudioClip& clip) {
  if (clip.samples.empty()) throw EmptyError("cannot write an empty clip");
  if (clip.sample_rate <= 0) throw ArgumentError("sample rate must be positive");
  const std::uint32_t data_size = static_cast<std::uint32_t>(clip.samples.size() * 2);
  std::vector<std::uint8_t> out;
  out.reserve(44 + data_size);
  put_tag(out, "RIFF");
  put_u32(out, 36 + data_size);
  put_tag(out, "WAVE");
  put_tag(out, "fmt ");
  put_u32(out, 16);
  put_u16(out, kFormatPcm);
  put_u16(out, 1);
  put_u32(out, static_cast<std::uint32_t>(clip.sample_rate));
  put_u32(out, static_cast<std::uint32_t>(clip.sample_rate) * 2);
  put_u16(out, 2);
  put_u16(out, 16);
  put_tag(out, "data");
  put_u32(out, data_size);
  for (double s : clip.samples) {
    const double q = std::clamp(std::round(s * 32768.0), -32768.0, 32767.0);
    put_u16(out, static_cast<std::uint16_t>(static_cast<std::int16_t>(q)));
  }
  return out;
}

void save_wav(const AudioClip& clip, const fs::path& path) {
  const auto bytes = encode_wav(clip);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("write failed: " + path.string());
}

std::string role_name(Role role) {
  switch (role) {
    case Role::kTrain: return "train";
    case Role::kTest: return "test";
    case Role::kCounterfeit: return "counterfeit";
    case Role::kUnknown: return "unknown";
    case Role::kUnspecified: return "";
  }
  return "";
}

Role parse_role(const std::string& name) {
  if (name == "train") return Role::kTrain;
  if (name == "test") return Role::kTest;
  if (name == "counterfeit") return Role::kCounterfeit;
  if (name == "unknown") return Role::kUnknown;
  if (name.empty()) return Role::kUnspecified;
  throw ManifestError("unknown role '" + name + "'");
}

DatasetManifest load_manifest(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open manifest " + path.string());
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw ManifestError(path.string() + ": " + e.what());
  }

  const fs::path base = path.parent_path();
  DatasetManifest manifest;
  try {
    if (!doc.is_object()) throw ManifestError("top level must be an object");
    for (const auto& [key, _] : doc.items()) {
      if (key != "labels" && key != "seed" && key != "files") {
        throw ManifestError("unknown key '" + key + "'");
      }
    }
    if (!doc.contains("files") || !doc["files"].is_array()) {
      throw ManifestError("'files' must be an array");
    }
    manifest.seed = doc.value("seed", std::uint64_t{0});
    if (doc.contains("labels")) {
      manifest.labels = doc["labels"].get<std::vector<std::string>>();
    }
    const bool declared = !manifest.labels.empty();
    std::set<std::string> label_set(manifest.labels.begin(), manifest.labels.end());
    if (label_set.size() != manifest.labels.size()) throw ManifestError("duplicate declared label");

    std::set<fs::path> seen;
    for (const auto& item : doc["files"]) {
      if (!item.is_object() || !item.contains("path") || !item.contains("label")) {
        throw ManifestError("each file needs 'path' and 'label'");
      }
      for (const auto& [key, _] : item.items()) {
        if (key != "path" && key != "label" && key != "genuine" && key != "role") {
          throw ManifestError("unknown file key '" + key + "'");
        }
      }
      ManifestEntry entry;
      const fs::path raw = item["path"].get<std::string>();
      entry.path = raw.is_absolute() ? raw : base / raw;
      entry.label = item["label"].get<std::string>();
      entry.genuine = item.value("genuine", true);
      entry.role = parse_role(item.value("role", std::string{}));
      const fs::path key = entry.path.lexically_normal();
      if (!seen.insert(key).second) throw ManifestError("duplicate path " + raw.string());
      if (declared && !label_set.count(entry.label)) {
        throw ManifestError("label '" + entry.label + "' is not declared");
      }
      if (!declared && !label_set.count(entry.label)) {
        label_set.insert(entry.label);
        manifest.labels.push_back(entry.label);
      }
      manifest.entries.push_back(std::move(entry));
    }
  } catch (const nlohmann::json::exception& e) {
    throw ManifestError(path.string() + ": " + e.what());
  } catch (const ManifestError& e) {
    throw ManifestError(path.string() + ": " + e.what());
  }

  std::string missing;
  for (const auto& entry : manifest.entries) {
    if (!fs::exists(entry.path)) missing += "\n  " + entry.path.string();
  }
  if (!missing.empty()) throw ManifestError(path.string() + ": missing files:" + missing);
  return manifest;
}

void save_manifest(const DatasetManifest& manifest, const fs::path& path) {
  const fs::path base = path.parent_path();
  nlohmann::ordered_json doc;
  doc["labels"] = manifest.labels;
  doc["seed"] = manifest.seed;
  doc["files"] = nlohmann::ordered_json::array();
  for (const auto& entry : manifest.entries) {
    nlohmann::ordered_json item;
    const fs::path rel = base.empty() ? entry.path : entry.path.lexically_relative(base);
    item["path"] = (rel.empty() ? entry.path : rel).generic_string();
    item["label"] = entry.label;
    item["genuine"] = entry.genuine;
    if (entry.role != Role::kUnspecified) item["role"] = role_name(entry.role);
    doc["files"].push_back(std::move(item));
  }
  std::ofstream out(path);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out << doc.dump(2) << '\n';
  if (!out) throw IoError("write failed: " + path.string());
}

}  // namespace resonant
