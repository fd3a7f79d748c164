#ifndef AMODAL_SAMPLER_H_
#define AMODAL_SAMPLER_H_

#include <cstdint>
#include <vector>

#include "amodal/denoiser.h"
#include "amodal/image.h"
#include "amodal/rng.h"
#include "amodal/schedule.h"

namespace amodal {

// What happens after each reverse step.
enum class CombineMode {
  kLeakage,  // leakage combine with strength s
  kRepaint,  // leakage combine with strength 1 (hard known-region reset)
  kNone,     // keep the reverse-step sample as is
};

// Where guidance is applied. Both give the same result up to rounding because
// the DDPM mean is affine in the noise estimate and shares z.
enum class GuidanceTarget { kNoise, kSample };

struct SamplerConfig {
  double s = 0.3;
  double w = 0.75;
  int steps = 20;
  uint64_t rng_seed = 0;
  CombineMode combine = CombineMode::kLeakage;
  GuidanceTarget guidance = GuidanceTarget::kNoise;
  bool keep_trace = false;
};

void ValidateSamplerConfig(const SamplerConfig& cfg);

// (1 + w) * pred_cond - w * pred_null.
ImageBuffer CfgCombine(const ImageBuffer& pred_cond,
                       const ImageBuffer& pred_null, double w);

// s * (M * x_tilde + (1 - M) * x_t) + (1 - s) * x_t. Unmasked pixels are
// copied from x_t, masked ones get s * x_tilde + (1 - s) * x_t.
ImageBuffer LeakageCombine(const ImageBuffer& x_tilde, const ImageBuffer& x_t,
                           const BinaryMask& m, double s);

// Timesteps visited by the loop: t_start = ceil(s T), then `steps` uniformly
// strided levels down to 0 (rounded, duplicates removed). The returned list
// starts at t_start and ends at 0.
int StartStep(double s, int T);
std::vector<int> TimestepPlan(int t_start, int steps);

// One ancestral step t -> t_prev from a given noise estimate:
// MeanFromNoise + PosteriorSigma * z, with z = 0 when t_prev = 0.
ImageBuffer ReverseStepFromNoise(const ImageBuffer& x, const ImageBuffer& eps_hat,
                                 int t, int t_prev, const NoiseSchedule& sched,
                                 Rng& rng);

// Single-step reverse transition t -> t - 1 with model conditioning.
ImageBuffer ReverseStep(const ImageBuffer& x_hat_prev, int t,
                        const Conditioning& cond, const Denoiser& model,
                        const NoiseSchedule& sched, Rng& rng,
                        Workspace* ws = nullptr);

struct DiffusionState {
  ImageBuffer x_hat;
  int t = 0;
  std::vector<ImageBuffer> trace;  // x_hat after every step when requested
};

// Soft inpainting of the condition image inside M. Returns x_hat_0 clamped
// to [-1, 1].
DiffusionState SoftInpaint(const ImageBuffer& x_cond, const BinaryMask& m,
                           const SamplerConfig& cfg, const Denoiser& model,
                           const NoiseSchedule& sched, Workspace* ws = nullptr);

}  // namespace amodal

#endif  // AMODAL_SAMPLER_H_
