#ifndef AMODAL_TRAIN_MASKS_H_
#define AMODAL_TRAIN_MASKS_H_

#include <vector>

#include "amodal/denoiser.h"
#include "amodal/image.h"
#include "amodal/rng.h"
#include "amodal/scenegen.h"

namespace amodal {

// Mixture of inpainting masks shown to the denoiser during training.
struct TrainMaskConfig {
  double p_occluded_hull = 0.7;  // hull of a randomly occluded object
  double p_box = 0.15;           // random axis-aligned box
  // remaining mass: random ellipse anywhere in the frame
};

// Draws the inpainting mask for one corpus image. The dominant mode mimics
// inference: one object is cut by a random occluder shape and the mask is the
// convex hull of what remains, so the model learns to regenerate whole
// objects from hull-shaped evidence.
BinaryMask SampleTrainingMask(const std::vector<BinaryMask>& objects, int size,
                              const TrainMaskConfig& cfg, Rng& rng);

// Wraps a corpus as an ExampleSource for Train().
ExampleSource CorpusSource(const Corpus& corpus, const TrainMaskConfig& cfg);

}  // namespace amodal

#endif  // AMODAL_TRAIN_MASKS_H_
