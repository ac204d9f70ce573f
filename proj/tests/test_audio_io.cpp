#include <doctest.h>

#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>

#include "resonant/audio_io.hpp"
#include "resonant/errors.hpp"

using namespace resonant;
namespace fs = std::filesystem;

namespace {

// Hand-assembled RIFF bytes so the decoder is checked against the format, not
// against its own encoder.
struct WavBuilder {
  std::uint16_t format = 1;
  std::uint16_t channels = 1;
  std::uint32_t rate = 44100;
  std::uint16_t bits = 16;
  bool extensible = false;
  std::vector<std::uint8_t> data;

  static void put16(std::vector<std::uint8_t>& b, std::uint16_t v) {
    b.push_back(v & 0xFF);
    b.push_back(v >> 8);
  }
  static void put32(std::vector<std::uint8_t>& b, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) b.push_back((v >> (8 * i)) & 0xFF);
  }
  void pcm16(std::int16_t v) { put16(data, static_cast<std::uint16_t>(v)); }
  void f32(float v) {
    std::uint32_t u;
    std::memcpy(&u, &v, 4);
    put32(data, u);
  }

  std::vector<std::uint8_t> bytes() const {
    std::vector<std::uint8_t> fmt;
    put16(fmt, extensible ? 0xFFFE : format);
    put16(fmt, channels);
    put32(fmt, rate);
    put32(fmt, rate * channels * bits / 8);
    put16(fmt, channels * bits / 8);
    put16(fmt, bits);
    if (extensible) {
      put16(fmt, 22);
      put16(fmt, bits);
      put32(fmt, 0);
      put16(fmt, format);
      const std::uint8_t guid_tail[14] = {0x00, 0x00, 0x00, 0x00, 0x10, 0x00, 0x80,
                                          0x00, 0x00, 0xAA, 0x00, 0x38, 0x9B, 0x71};
      fmt.insert(fmt.end(), guid_tail, guid_tail + 14);
    }
    std::vector<std::uint8_t> b = {'R', 'I', 'F', 'F'};
    put32(b, static_cast<std::uint32_t>(4 + 8 + fmt.size() + 8 + data.size()));
    for (char c : std::string("WAVEfmt ")) b.push_back(c);
    put32(b, static_cast<std::uint32_t>(fmt.size()));
    b.insert(b.end(), fmt.begin(), fmt.end());
    for (char c : std::string("data")) b.push_back(c);
    put32(b, static_cast<std::uint32_t>(data.size()));
    b.insert(b.end(), data.begin(), data.end());
    return b;
  }
};

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() / ("resonant_test_" + std::to_string(reinterpret_cast<std::uintptr_t>(this)));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

void write_text(const fs::path& p, const std::string& s) { std::ofstream(p) << s; }

}  // namespace

TEST_CASE("pcm16 mono decodes to x / 32768") {
  WavBuilder w;
  for (std::int16_t v : {0, 16384, -32768, 32767}) w.pcm16(v);
  const auto clip = decode_wav(w.bytes());
  REQUIRE(clip.samples.size() == 4);
  CHECK(clip.samples[0] == 0.0);
  CHECK(clip.samples[1] == 0.5);
  CHECK(clip.samples[2] == -1.0);
  CHECK(clip.samples[3] == 32767.0 / 32768.0);
  CHECK(clip.sample_rate == 44100);
}

TEST_CASE("stereo is averaged to mono") {
  WavBuilder w;
  w.channels = 2;
  w.pcm16(16384);
  w.pcm16(0);
  w.pcm16(-8192);
  w.pcm16(-8192);
  const auto clip = decode_wav(w.bytes());
  REQUIRE(clip.samples.size() == 2);
  CHECK(clip.samples[0] == 0.25);
  CHECK(clip.samples[1] == -0.25);
}

TEST_CASE("float32 and extensible headers") {
  WavBuilder w;
  w.format = 3;
  w.bits = 32;
  w.f32(0.125f);
  w.f32(-0.75f);
  CHECK(decode_wav(w.bytes()).samples == std::vector<double>{0.125, -0.75});
  w.extensible = true;
  CHECK(decode_wav(w.bytes()).samples == std::vector<double>{0.125, -0.75});

  WavBuilder p;
  p.extensible = true;
  p.pcm16(-16384);
  CHECK(decode_wav(p.bytes()).samples == std::vector<double>{-0.5});
}

TEST_CASE("malformed files are rejected with the right error kind") {
  WavBuilder w;
  for (int i = 0; i < 10; ++i) w.pcm16(100);
  auto good = w.bytes();

  SUBCASE("truncated data chunk") {
    good.resize(good.size() - 3);
    CHECK_THROWS_AS(decode_wav(good), FormatError);
  }
  SUBCASE("truncated header") {
    good.resize(20);
    CHECK_THROWS_AS(decode_wav(good), FormatError);
  }
  SUBCASE("not RIFF") {
    good[0] = 'X';
    CHECK_THROWS_AS(decode_wav(good), FormatError);
  }
  SUBCASE("empty input") { CHECK_THROWS_AS(decode_wav({}), FormatError); }
  SUBCASE("8-bit pcm") {
    WavBuilder b;
    b.bits = 8;
    b.data = {128, 130};
    CHECK_THROWS_AS(decode_wav(b.bytes()), UnsupportedError);
  }
  SUBCASE("compressed format") {
    WavBuilder b;
    b.format = 2;
    b.pcm16(1);
    CHECK_THROWS_AS(decode_wav(b.bytes()), UnsupportedError);
  }
  SUBCASE("three channels") {
    WavBuilder b;
    b.channels = 3;
    for (int i = 0; i < 3; ++i) b.pcm16(1);
    CHECK_THROWS_AS(decode_wav(b.bytes()), UnsupportedError);
  }
  SUBCASE("zero frames") {
    WavBuilder b;
    CHECK_THROWS_AS(decode_wav(b.bytes()), EmptyError);
  }
}

TEST_CASE("save then load is within one quantization step") {
  TempDir dir;
  AudioClip clip;
  for (int i = 0; i < 1000; ++i) clip.samples.push_back(0.9 * std::sin(i * 0.01));
  clip.samples.push_back(1.5);  // clamps
  save_wav(clip, dir.path / "a.wav");
  const auto back = load_wav(dir.path / "a.wav");
  REQUIRE(back.samples.size() == clip.samples.size());
  for (std::size_t i = 0; i + 1 < clip.samples.size(); ++i) {
    CHECK(std::abs(back.samples[i] - clip.samples[i]) <= 0.5 / 32768.0 + 1e-15);
  }
  CHECK(back.samples.back() == 32767.0 / 32768.0);
  CHECK_THROWS_AS(save_wav(AudioClip{}, dir.path / "b.wav"), EmptyError);
  CHECK_THROWS_AS(load_wav(dir.path / "missing.wav"), IoError);
}

TEST_CASE("load_wav prefixes errors with the path") {
  TempDir dir;
  write_text(dir.path / "junk.wav", "definitely not audio");
  try {
    load_wav(dir.path / "junk.wav");
    FAIL("expected FormatError");
  } catch (const FormatError& e) {
    CHECK(std::string(e.what()).find("junk.wav") != std::string::npos);
  }
}

TEST_CASE("manifest parsing") {
  TempDir dir;
  AudioClip clip;
  clip.samples = {0.1, -0.1};
  save_wav(clip, dir.path / "a.wav");
  save_wav(clip, dir.path / "b.wav");
  const auto m = dir.path / "manifest.json";

  SUBCASE("valid, relative paths resolve against the manifest") {
    write_text(m, R"({"labels": ["x", "y"], "seed": 3, "files": [
      {"path": "a.wav", "label": "x", "genuine": true, "role": "train"},
      {"path": "b.wav", "label": "y", "genuine": false}]})");
    const auto man = load_manifest(m);
    CHECK(man.seed == 3);
    REQUIRE(man.entries.size() == 2);
    CHECK(man.entries[0].path == dir.path / "a.wav");
    CHECK(man.entries[0].role == Role::kTrain);
    CHECK(man.entries[1].role == Role::kUnspecified);
    CHECK_FALSE(man.entries[1].genuine);

    save_manifest(man, dir.path / "copy.json");
    const auto again = load_manifest(dir.path / "copy.json");
    CHECK(again.entries[1].path == man.entries[1].path);
    CHECK(again.labels == man.labels);
  }
  SUBCASE("duplicate path") {
    write_text(m, R"({"labels": ["x"], "files": [{"path": "a.wav", "label": "x", "genuine": true},
                                                  {"path": "a.wav", "label": "x", "genuine": true}]})");
    CHECK_THROWS_AS(load_manifest(m), ManifestError);
  }
  SUBCASE("undeclared label") {
    write_text(m, R"({"labels": ["x"], "files": [{"path": "a.wav", "label": "z", "genuine": true}]})");
    CHECK_THROWS_AS(load_manifest(m), ManifestError);
  }
  SUBCASE("missing file") {
    write_text(m, R"({"labels": ["x"], "files": [{"path": "nope.wav", "label": "x", "genuine": true}]})");
    CHECK_THROWS_AS(load_manifest(m), ManifestError);
  }
  SUBCASE("unknown key") {
    write_text(m, R"({"labels": ["x"], "files": [{"path": "a.wav", "label": "x", "genuine": true, "colour": 1}]})");
    CHECK_THROWS_AS(load_manifest(m), ManifestError);
  }
  SUBCASE("bad role") {
    write_text(m, R"({"labels": ["x"], "files": [{"path": "a.wav", "label": "x", "genuine": true, "role": "x"}]})");
    CHECK_THROWS_AS(load_manifest(m), ManifestError);
  }
  SUBCASE("not json") {
    write_text(m, "{");
    CHECK_THROWS_AS(load_manifest(m), ManifestError);
  }
}
