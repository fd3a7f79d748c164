#include "amodal/rng.h"

namespace amodal {

uint64_t MixSeed(uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

uint64_t DeriveSeed(uint64_t root, std::string_view tag, uint64_t index) {
  // FNV-1a over the tag keeps distinct components on distinct streams.
  uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : tag) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  return MixSeed(MixSeed(root ^ h) + index);
}

ImageBuffer GaussianImage(int height, int width, int channels, Rng& rng) {
  ImageBuffer out(height, width, channels);
  std::normal_distribution<float> normal(0.0f, 1.0f);
  for (float& v : out.data()) v = normal(rng);
  return out;
}

}  // namespace amodal
