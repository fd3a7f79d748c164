#ifndef AMODAL_SEGMENTER_H_
#define AMODAL_SEGMENTER_H_

#include <vector>

#include "amodal/image.h"
#include "amodal/maskgen.h"
#include "amodal/rng.h"

namespace amodal {

inline constexpr int kDefaultSeedCount = 9;
inline constexpr double kDefaultTolerance = 0.25;

struct SeedSet {
  std::vector<Point> points;
  int count = 0;
};

// n points drawn uniformly from V's set pixels, without replacement when
// |V| >= n and with replacement otherwise.
SeedSet SampleSeedPoints(const BinaryMask& v, int n, Rng& rng);

enum class GrowMode {
  kRunningMean,  // compare against the mean colour of the region so far
  kFixedMean,    // compare against the seed pixel's colour
};

// Union of 4-connected regions grown from every seed over pixels whose RGB
// distance to the reference colour is <= tol, followed by hole filling.
BinaryMask ExtractAmodalMask(const ImageBuffer& image, const SeedSet& seeds,
                             double tol, GrowMode mode = GrowMode::kRunningMean);

// Region grown from one seed, without hole filling.
BinaryMask GrowRegion(const ImageBuffer& image, Point seed, double tol,
                      GrowMode mode);

// Sets every background pixel that is not 4-connected to the image border.
BinaryMask FillHoles(const BinaryMask& m);

}  // namespace amodal

#endif  // AMODAL_SEGMENTER_H_
