#include <doctest.h>

#include <cmath>

#include "oracles.hpp"
#include "resonant/augment.hpp"
#include "resonant/errors.hpp"
#include "resonant/rng.hpp"

using namespace resonant;

namespace {

struct ReferenceXoshiro {
  std::uint64_t s[4];
  static std::uint64_t splitmix(std::uint64_t& x) {
    std::uint64_t z = (x += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }
  explicit ReferenceXoshiro(std::uint64_t seed) {
    for (auto& w : s) w = splitmix(seed);
  }
  static std::uint64_t rotl(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }
  std::uint64_t next() {
    const std::uint64_t result = rotl(s[1] * 5, 7) * 9;
    const std::uint64_t t = s[1] << 17;
    s[2] ^= s[0];
    s[3] ^= s[1];
    s[1] ^= s[2];
    s[0] ^= s[3];
    s[2] ^= t;
    s[3] = rotl(s[3], 45);
    return result;
  }
};

Segment ramp(std::size_t n) {
  Segment s;
  s.samples.resize(n);
  for (std::size_t i = 0; i < n; ++i) s.samples[i] = std::sin(0.01 * static_cast<double>(i));
  return s;
}

}  // namespace

TEST_CASE("splitmix64 seeding reference value") {
  std::uint64_t x = 0;
  CHECK(ReferenceXoshiro::splitmix(x) == 0xe220a8397b1dcdafULL);
}

TEST_CASE("generator matches xoshiro256** seeded by splitmix64") {
  for (std::uint64_t seed : {0ULL, 7ULL, 0xdeadbeefULL}) {
    Rng rng(seed);
    ReferenceXoshiro ref(seed);
    for (int i = 0; i < 1000; ++i) REQUIRE(rng.next_u64() == ref.next());
  }
}

TEST_CASE("uniform, below and normal statistics") {
  Rng rng(123);
  double sum = 0;
  std::vector<int> hist(7, 0);
  std::vector<double> normals;
  for (int i = 0; i < 100000; ++i) {
    const double u = rng.uniform();
    CHECK((u >= 0.0 && u < 1.0));
    sum += u;
    ++hist[rng.below(7)];
    normals.push_back(rng.normal());
  }
  CHECK(sum / 100000 == doctest::Approx(0.5).epsilon(0.01));
  for (int h : hist) CHECK(std::abs(h - 100000 / 7.0) < 5 * std::sqrt(100000 / 7.0));
  CHECK(std::abs(oracle::mean(normals)) < 0.01);
  CHECK(oracle::population_sd(normals) == doctest::Approx(1.0).epsilon(0.01));
  CHECK(rng.below(0) == 0);
}

TEST_CASE("fork gives independent but reproducible streams") {
  Rng a(1), b(1);
  auto fa = a.fork();
  auto fb = b.fork();
  CHECK(fa.next_u64() == fb.next_u64());
  CHECK(a.next_u64() != fa.next_u64());
}

TEST_CASE("augmentation with unit coefficient and no noise is the identity") {
  AugmentConfig cfg;
  cfg.coeffs = {1.0};
  cfg.noise_sigma = 0.0;
  cfg.variants_per_coeff = 1;
  Rng rng(1);
  const auto seg = ramp(500);
  const auto out = augment_segment(seg, cfg, rng);
  REQUIRE(out.size() == 1);
  CHECK(out[0].samples == seg.samples);
}

TEST_CASE("coefficient scaling without noise") {
  AugmentConfig cfg;
  cfg.coeffs = {2.0};
  cfg.noise_sigma = 0.0;
  Rng rng(1);
  const auto seg = ramp(100);
  for (const auto& v : augment_segment(seg, cfg, rng)) {
    for (std::size_t i = 0; i < 100; ++i) CHECK(v.samples[i] == 2.0 * seg.samples[i]);
  }
}

TEST_CASE("default augmentation produces coefficient-major variants") {
  AugmentConfig cfg;
  CHECK(cfg.output_count() == 10);
  Rng rng(5);
  const auto seg = ramp(2000);
  const auto out = augment_segment(seg, cfg, rng);
  REQUIRE(out.size() == 10);
  for (std::size_t k = 0; k < out.size(); ++k) {
    const double coeff = cfg.coeffs[k / 2];
    std::vector<double> residual;
    for (std::size_t i = 0; i < seg.samples.size(); ++i) residual.push_back(out[k].samples[i] - coeff * seg.samples[i]);
    CHECK(oracle::population_sd(residual) == doctest::Approx(0.002).epsilon(0.1));
  }
  CHECK(out[0].samples != out[1].samples);
}

TEST_CASE("augmentation residuals follow N(0, sigma^2)") {
  AugmentConfig cfg;
  cfg.coeffs = {1.0};
  cfg.noise_sigma = 0.01;
  cfg.variants_per_coeff = 1000;
  Rng rng(2024);
  const auto seg = ramp(64);
  const auto out = augment_segment(seg, cfg, rng);
  REQUIRE(out.size() == 1000);
  std::vector<double> all;
  for (std::size_t i = 0; i < seg.samples.size(); ++i) {
    std::vector<double> column;
    for (const auto& v : out) column.push_back(v.samples[i] - seg.samples[i]);
    CHECK(std::abs(oracle::mean(column)) < 3 * 0.01 / std::sqrt(1000.0));
    all.insert(all.end(), column.begin(), column.end());
  }
  const double sd = oracle::population_sd(all);
  CHECK(std::abs(sd * sd - 1e-4) < 0.1 * 1e-4);
}

TEST_CASE("augmentation is deterministic for a seed") {
  AugmentConfig cfg;
  Rng a(77), b(77);
  const auto seg = ramp(300);
  const auto x = augment_segment(seg, cfg, a);
  const auto y = augment_segment(seg, cfg, b);
  for (std::size_t k = 0; k < x.size(); ++k) CHECK(x[k].samples == y[k].samples);
}

TEST_CASE("augment config validation") {
  AugmentConfig cfg;
  cfg.coeffs = {};
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg.coeffs = {1.0, -0.5};
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg.coeffs = {1.0};
  cfg.noise_sigma = std::nan("");
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
}
