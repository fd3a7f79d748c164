#include "amodal/sampler.h"

#include <cmath>
#include <optional>

namespace amodal {

void ValidateSamplerConfig(const SamplerConfig& cfg) {
  Require(cfg.s >= 0.0 && cfg.s <= 1.0, ErrorKind::kInvalidArgument,
          "sampler s must lie in [0, 1]");
  Require(cfg.w >= 0.0, ErrorKind::kInvalidArgument,
          "guidance w must be non-negative");
  Require(cfg.steps >= 1, ErrorKind::kInvalidArgument,
          "sampler needs at least one step");
}

ImageBuffer CfgCombine(const ImageBuffer& pred_cond,
                       const ImageBuffer& pred_null, double w) {
  RequireSameShape(pred_cond, pred_null, "CfgCombine");
  if (w == 0.0) return pred_cond;
  ImageBuffer out(pred_cond.height(), pred_cond.width(), pred_cond.channels());
  const float a = static_cast<float>(1.0 + w), b = static_cast<float>(w);
  auto o = out.data();
  auto c = pred_cond.data();
  auto n = pred_null.data();
  for (size_t i = 0; i < o.size(); ++i) o[i] = a * c[i] - b * n[i];
  return out;
}

ImageBuffer LeakageCombine(const ImageBuffer& x_tilde, const ImageBuffer& x_t,
                           const BinaryMask& m, double s) {
  RequireSameShape(x_tilde, x_t, "LeakageCombine");
  RequireSameResolution(x_t, m, "LeakageCombine");
  Require(s >= 0.0 && s <= 1.0, ErrorKind::kInvalidArgument,
          "LeakageCombine: s must lie in [0, 1]");
  ImageBuffer out = x_t;
  // Double accumulation keeps masked pixels within one float ulp of the exact
  // blend even when the two terms nearly cancel.
  const double keep = 1.0 - s;
  const auto bits = m.data();
  const size_t plane = x_t.plane_size();
  for (int c = 0; c < x_t.channels(); ++c) {
    auto o = out.plane(c);
    auto a = x_tilde.plane(c);
    auto b = x_t.plane(c);
    for (size_t i = 0; i < plane; ++i) {
      if (bits[i]) o[i] = static_cast<float>(s * a[i] + keep * b[i]);
    }
  }
  return out;
}

int StartStep(double s, int T) {
  Require(s >= 0.0 && s <= 1.0, ErrorKind::kInvalidArgument,
          "s must lie in [0, 1]");
  // Guard against s * T landing a hair above an integer.
  return static_cast<int>(std::ceil(s * T - 1e-9));
}

std::vector<int> TimestepPlan(int t_start, int steps) {
  Require(t_start >= 0 && steps >= 1, ErrorKind::kInvalidArgument,
          "invalid timestep plan");
  std::vector<int> plan;
  for (int k = 0; k <= steps; ++k) {
    const int t = static_cast<int>(
        std::lround(static_cast<double>(t_start) * (steps - k) / steps));
    if (plan.empty() || plan.back() != t) plan.push_back(t);
  }
  return plan;
}

ImageBuffer ReverseStepFromNoise(const ImageBuffer& x, const ImageBuffer& eps_hat,
                                 int t, int t_prev, const NoiseSchedule& sched,
                                 Rng& rng) {
  ImageBuffer out = MeanFromNoise(x, eps_hat, t, t_prev, sched);
  if (t_prev == 0) return out;
  const double sigma = PosteriorSigma(t, t_prev, sched);
  const ImageBuffer z = GaussianImage(x.height(), x.width(), x.channels(), rng);
  auto o = out.data();
  auto zz = z.data();
  const float sf = static_cast<float>(sigma);
  for (size_t i = 0; i < o.size(); ++i) o[i] += sf * zz[i];
  return out;
}

ImageBuffer ReverseStep(const ImageBuffer& x_hat_prev, int t,
                        const Conditioning& cond, const Denoiser& model,
                        const NoiseSchedule& sched, Rng& rng, Workspace* ws) {
  model.RequireSchedule(sched);
  const ImageBuffer eps = PredictNoise(x_hat_prev, t, cond, model, ws);
  return ReverseStepFromNoise(x_hat_prev, eps, t, t - 1, sched, rng);
}

DiffusionState SoftInpaint(const ImageBuffer& x_cond, const BinaryMask& m,
                           const SamplerConfig& cfg, const Denoiser& model,
                           const NoiseSchedule& sched, Workspace* ws) {
  ValidateSamplerConfig(cfg);
  RequireSameResolution(x_cond, m, "SoftInpaint");
  model.RequireSchedule(sched);
  if (x_cond.height() != model.arch().image_size ||
      x_cond.width() != model.arch().image_size) {
    Fail(ErrorKind::kShapeMismatch,
         "condition image resolution differs from the model's");
  }
  std::optional<Workspace> local;
  if (ws == nullptr) ws = &local.emplace(model);

  Rng rng(cfg.rng_seed);
  const int h = x_cond.height(), w = x_cond.width(), ch = x_cond.channels();
  const int t_start = StartStep(cfg.s, sched.T);
  DiffusionState state;
  state.t = t_start;
  if (t_start == 0) {
    state.x_hat = x_cond;
    ClampInPlace(state.x_hat);
    return state;
  }
  state.x_hat = ForwardDiffuse(x_cond, t_start, GaussianImage(h, w, ch, rng), sched);

  const Conditioning cond = Conditioning::Make(m, x_cond);
  const Conditioning null = Conditioning::Null();
  const double combine_s = cfg.combine == CombineMode::kRepaint ? 1.0 : cfg.s;
  const std::vector<int> plan = TimestepPlan(t_start, cfg.steps);

  for (size_t k = 0; k + 1 < plan.size(); ++k) {
    const int t = plan[k], t_prev = plan[k + 1];
    const ImageBuffer eps_c = PredictNoise(state.x_hat, t, cond, model, ws);
    ImageBuffer x_tilde;
    if (cfg.w == 0.0) {
      x_tilde = ReverseStepFromNoise(state.x_hat, eps_c, t, t_prev, sched, rng);
    } else {
      const ImageBuffer eps_n = PredictNoise(state.x_hat, t, null, model, ws);
      if (cfg.guidance == GuidanceTarget::kNoise) {
        x_tilde = ReverseStepFromNoise(state.x_hat, CfgCombine(eps_c, eps_n, cfg.w),
                                       t, t_prev, sched, rng);
      } else {
        // Same z for both branches, so the noise terms cancel in the blend.
        Rng rng_null = rng;
        const ImageBuffer xc =
            ReverseStepFromNoise(state.x_hat, eps_c, t, t_prev, sched, rng);
        const ImageBuffer xn =
            ReverseStepFromNoise(state.x_hat, eps_n, t, t_prev, sched, rng_null);
        x_tilde = CfgCombine(xc, xn, cfg.w);
      }
    }
    if (cfg.combine == CombineMode::kNone) {
      state.x_hat = std::move(x_tilde);
    } else {
      const ImageBuffer x_known =
          t_prev == 0 ? x_cond
                      : ForwardDiffuse(x_cond, t_prev,
                                       GaussianImage(h, w, ch, rng), sched);
      state.x_hat = LeakageCombine(x_tilde, x_known, m, combine_s);
    }
    state.t = t_prev;
    if (!AllFinite(state.x_hat)) {
      Fail(ErrorKind::kNumerical,
           "sampler produced non-finite values at t=" + std::to_string(t_prev));
    }
    if (cfg.keep_trace) state.trace.push_back(state.x_hat);
  }
  ClampInPlace(state.x_hat);
  return state;
}

}  // namespace amodal
