#include "polyspec/rng.hpp"

namespace polyspec {

namespace {
constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ULL;
}

std::uint64_t mix64(std::uint64_t x) {
  x ^= x >> 30;
  x *= 0xBF58476D1CE4E5B9ULL;
  x ^= x >> 27;
  x *= 0x94D049BB133111EBULL;
  x ^= x >> 31;
  return x;
}

std::uint64_t derive_seed(std::uint64_t seed, std::string_view tag) {
  // FNV-1a over the tag, folded into the seed.
  std::uint64_t h = 0xCBF29CE484222325ULL;
  for (unsigned char c : tag) {
    h ^= c;
    h *= 0x100000001B3ULL;
  }
  return mix64(seed ^ mix64(h));
}

Substream::Substream(std::uint64_t seed, std::uint64_t index)
    : key_(mix64(mix64(seed + kGolden) ^ (index * 0xD1B54A32D192ED03ULL + 1))) {}

std::uint64_t Substream::next() {
  ++counter_;
  return mix64(key_ + counter_ * kGolden);
}

double Substream::uniform() {
  return static_cast<double>(next() >> 11) * 0x1.0p-53;
}

}  // namespace polyspec
