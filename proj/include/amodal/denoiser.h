#ifndef AMODAL_DENOISER_H_
#define AMODAL_DENOISER_H_

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "amodal/image.h"
#include "amodal/rng.h"
#include "amodal/schedule.h"
#include "amodal/unet.h"

namespace amodal {

// Mask conditioning for the noise predictor. The null token is encoded as
// all-zero mask and context planes, so Null() and an all-zero (mask, context)
// pair reach the network as the same input.
class Conditioning {
 public:
  static Conditioning Null() { return Conditioning(); }
  static Conditioning Make(BinaryMask mask, ImageBuffer context);

  bool is_null() const { return !mask_.has_value(); }
  const BinaryMask& mask() const { return *mask_; }
  const ImageBuffer& context() const { return *context_; }

 private:
  Conditioning() = default;
  std::optional<BinaryMask> mask_;
  std::optional<ImageBuffer> context_;
};

// Trained (or freshly initialised) noise predictor bound to one schedule.
class Denoiser {
 public:
  Denoiser(const UNetArch& arch, const NoiseSchedule& sched);

  const UNetArch& arch() const { return arch_; }
  const std::string& sched_fingerprint() const { return sched_fingerprint_; }
  int T() const { return T_; }
  double beta_start() const { return beta_start_; }
  double beta_end() const { return beta_end_; }
  const UNet<float>& net() const { return net_; }

  std::vector<float>& params() { return params_; }
  const std::vector<float>& params() const { return params_; }

  void InitParams(uint64_t seed) { params_ = net_.InitParams(seed); }

  // Throws kFingerprintMismatch unless `sched` is the training schedule.
  void RequireSchedule(const NoiseSchedule& sched) const;

 private:
  UNetArch arch_;
  UNet<float> net_;
  std::string sched_fingerprint_;
  int T_ = 0;
  double beta_start_ = 0.0;
  double beta_end_ = 0.0;
  std::vector<float> params_;
};

// Scratch memory for repeated network evaluations. One per thread.
class Workspace {
 public:
  explicit Workspace(const Denoiser& model);

  std::vector<float>& input() { return input_; }
  std::vector<float>& output() { return output_; }
  UNet<float>::Cache* cache() { return cache_.get(); }

 private:
  std::vector<float> input_;
  std::vector<float> output_;
  UNet<float>::CachePtr cache_;
};

// Writes the 7-plane network input [x_t, M, (1 - M) * context]: the context
// planes carry only the known region outside the inpainting area.
void PackInput(const ImageBuffer& x_t, const Conditioning& cond,
               std::span<float> input);

// Residual-noise prediction eps_theta(x_t, t, cond).
ImageBuffer PredictNoise(const ImageBuffer& x_t, int t,
                         const Conditioning& cond, const Denoiser& model,
                         Workspace* ws = nullptr);

// DDPM posterior mean for the jump t -> t_prev given a noise estimate. With
// t_prev = t - 1 this is (x_t - beta_t / sqrt(1 - abar_t) eps) / sqrt(alpha_t);
// larger jumps use the effective alpha abar_t / abar_{t_prev}. t_prev = 0
// yields the clean-image estimate.
ImageBuffer MeanFromNoise(const ImageBuffer& x_t, const ImageBuffer& eps_hat,
                          int t, int t_prev, const NoiseSchedule& sched);

// Posterior standard deviation of the t -> t_prev transition (0 at t_prev 0).
double PosteriorSigma(int t, int t_prev, const NoiseSchedule& sched);

ImageBuffer DenoiseMean(const ImageBuffer& x_t, int t,
                        const Conditioning& cond, const Denoiser& model,
                        const NoiseSchedule& sched, Workspace* ws = nullptr);

// ---------------------------------------------------------------------------
// Training.

struct TrainConfig {
  int epochs = 10;
  int batch_size = 8;
  int max_steps = 0;  // > 0 caps the optimiser steps regardless of epochs
  double lr = 5e-4;
  int warmup_steps = 100;
  double p_drop = 0.1;  // probability of replacing the conditioning by null
  double grad_clip = 1.0;  // global L2 norm; <= 0 disables
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  uint64_t init_seed = 1;
  int log_every = 0;  // > 0 prints a progress line to stderr
};

// One training sample: a complete-object image and its inpainting mask. The
// context is the clean image; the network sees it outside the mask only.
struct TrainExample {
  ImageBuffer image;
  BinaryMask mask;
};

// Supplies example `index` for the given draw; must be deterministic in
// (index, rng state).
using ExampleSource = std::function<TrainExample(size_t index, Rng& rng)>;

struct OptimizerState {
  int64_t step = 0;
  std::vector<float> m;
  std::vector<float> v;
};

struct TrainStats {
  std::vector<double> loss;  // one entry per optimiser step
  int64_t first_step = 0;    // global index of loss[0]
  int64_t null_batches_used = 0;  // samples trained with null conditioning
};

// Minimises the epsilon-prediction MSE with Adam. `state` carries the step
// counter and moments across calls, which is how resume works. Aborts with
// kNumerical on a non-finite loss.
TrainStats Train(Denoiser& model, OptimizerState& state, size_t dataset_size,
                 const ExampleSource& source, const TrainConfig& cfg,
                 const NoiseSchedule& sched, uint64_t rng_seed);

// Loss and parameter gradient of one sample at a fixed (t, eps, null flag);
// exposed for gradient checks and the training loop.
double SampleLossAndGrad(const Denoiser& model, const TrainExample& ex, int t,
                         const ImageBuffer& eps, bool use_null,
                         const NoiseSchedule& sched, Workspace& ws,
                         std::span<float> grad, float grad_scale);

// ---------------------------------------------------------------------------
// Checkpoint files.

inline constexpr char kCheckpointMagic[8] = {'A', 'M', 'O', 'D',
                                             'A', 'L', 'C', 'K'};
inline constexpr uint32_t kCheckpointVersion = 1;

void SaveCheckpoint(const std::string& path, const Denoiser& model,
                    const OptimizerState* state);

struct LoadedCheckpoint {
  Denoiser model;
  std::optional<OptimizerState> state;
  std::string header_json;
};

// `sched` must match the fingerprint stored in the file.
LoadedCheckpoint LoadCheckpoint(const std::string& path,
                                const NoiseSchedule& sched);

// Reads only the schedule constants recorded in a checkpoint header.
NoiseSchedule CheckpointSchedule(const std::string& path);

}  // namespace amodal

#endif  // AMODAL_DENOISER_H_
