#ifndef AMODAL_RNG_H_
#define AMODAL_RNG_H_

#include <cstdint>
#include <random>
#include <string_view>

#include "amodal/image.h"

namespace amodal {

using Rng = std::mt19937_64;

// splitmix64 finalizer.
uint64_t MixSeed(uint64_t x);

// Derives an independent stream seed from a root seed, a component tag and an
// index. Every random draw in the project flows from one root seed through
// this function, e.g. DeriveSeed(root, "scene", 17) for scene 17.
uint64_t DeriveSeed(uint64_t root, std::string_view tag, uint64_t index = 0);

// Fills an image of the given shape with i.i.d. standard normal samples.
ImageBuffer GaussianImage(int height, int width, int channels, Rng& rng);

}  // namespace amodal

#endif  // AMODAL_RNG_H_
