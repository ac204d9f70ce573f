#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace resonant {

inline constexpr int kCanonicalSampleRate = 44100;

struct AudioClip {
  std::vector<double> samples;  // mono, nominally in [-1, 1]
  int sample_rate = kCanonicalSampleRate;

  double duration_seconds() const {
    return sample_rate > 0 ? static_cast<double>(samples.size()) / sample_rate : 0.0;
  }
};

// Reads RIFF/WAVE with PCM16 or float32 payload, mono or stereo. Stereo is
// averaged down to mono; PCM16 is scaled by 1/32768.
AudioClip load_wav(const std::filesystem::path& path);
AudioClip decode_wav(const std::vector<std::uint8_t>& bytes);

// Writes mono PCM16. Samples are clamped to the representable range.
void save_wav(const AudioClip& clip, const std::filesystem::path& path);
std::vector<std::uint8_t> encode_wav(const AudioClip& clip);

// Roles partition a corpus for evaluation. Training uses kTrain entries.
enum class Role { kTrain, kTest, kCounterfeit, kUnknown, kUnspecified };

std::string role_name(Role role);
Role parse_role(const std::string& name);

struct ManifestEntry {
  std::filesystem::path path;  // resolved against the manifest directory
  std::string label;
  bool genuine = true;
  Role role = Role::kUnspecified;
};

struct DatasetManifest {
  std::vector<std::string> labels;  // declared label set
  std::vector<ManifestEntry> entries;
  std::uint64_t seed = 0;
};

// JSON schema:
//   { "labels": ["kangaroo", ...],
//     "seed": 7,
//     "files": [ {"path": "a.wav", "label": "kangaroo", "genuine": true,
//                 "role": "train"}, ... ] }
// "role" is optional. Relative paths resolve against the manifest's directory.
DatasetManifest load_manifest(const std::filesystem::path& path);
// Paths are written relative to the manifest directory when possible.
void save_manifest(const DatasetManifest& manifest, const std::filesystem::path& path);

}  // namespace resonant
