#include "amodal/denoiser.h"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <numeric>
#include <sstream>

#include <json.hpp>

namespace amodal {

static_assert(std::endian::native == std::endian::little,
              "checkpoint IO assumes a little-endian host");

Conditioning Conditioning::Make(BinaryMask mask, ImageBuffer context) {
  Require(!context.empty() && context.channels() == 3,
          ErrorKind::kShapeMismatch, "conditioning context must be RGB");
  RequireSameResolution(context, mask, "Conditioning");
  Conditioning c;
  c.mask_ = std::move(mask);
  c.context_ = std::move(context);
  return c;
}

Denoiser::Denoiser(const UNetArch& arch, const NoiseSchedule& sched)
    : arch_(arch),
      net_(arch),
      sched_fingerprint_(sched.Fingerprint()),
      T_(sched.T),
      beta_start_(sched.beta_start),
      beta_end_(sched.beta_end) {
  Require(arch.in_channels == 7 && arch.out_channels == 3,
          ErrorKind::kInvalidArgument,
          "denoiser expects 7 input and 3 output channels");
  params_.assign(net_.num_params(), 0.0f);
}

void Denoiser::RequireSchedule(const NoiseSchedule& sched) const {
  if (sched.Fingerprint() != sched_fingerprint_) {
    Fail(ErrorKind::kFingerprintMismatch,
         "schedule fingerprint " + sched.Fingerprint() +
             " does not match the model's " + sched_fingerprint_);
  }
}

Workspace::Workspace(const Denoiser& model)
    : cache_(model.net().NewCache()) {
  const size_t plane = static_cast<size_t>(model.arch().image_size) *
                       model.arch().image_size;
  input_.resize(7 * plane);
  output_.resize(3 * plane);
}

void PackInput(const ImageBuffer& x_t, const Conditioning& cond,
               std::span<float> input) {
  const size_t plane = x_t.plane_size();
  Require(x_t.channels() == 3, ErrorKind::kShapeMismatch,
          "denoiser input must be RGB");
  Require(input.size() == 7 * plane, ErrorKind::kShapeMismatch,
          "network input buffer has the wrong size");
  std::copy(x_t.data().begin(), x_t.data().end(), input.begin());
  float* mask_plane = input.data() + 3 * plane;
  float* ctx = input.data() + 4 * plane;
  if (cond.is_null()) {
    std::fill(mask_plane, mask_plane + 4 * plane, 0.0f);
    return;
  }
  RequireSameResolution(x_t, cond.mask(), "PackInput");
  RequireSameShape(x_t, cond.context(), "PackInput");
  const auto mask = cond.mask().data();
  for (size_t i = 0; i < plane; ++i) mask_plane[i] = mask[i] ? 1.0f : 0.0f;
  const auto src = cond.context().data();
  for (int c = 0; c < 3; ++c) {
    for (size_t i = 0; i < plane; ++i) {
      ctx[c * plane + i] = mask[i] ? 0.0f : src[c * plane + i];
    }
  }
}

namespace {

void RequireStep(int t, int T) {
  if (t < 1 || t > T) {
    Fail(ErrorKind::kOutOfRange, "timestep " + std::to_string(t) +
                                     " outside [1, " + std::to_string(T) +
                                     "]");
  }
}

void RequireModelInput(const ImageBuffer& x_t, const Denoiser& model) {
  const int size = model.arch().image_size;
  if (x_t.height() != size || x_t.width() != size || x_t.channels() != 3) {
    Fail(ErrorKind::kShapeMismatch,
         "model expects 3x" + std::to_string(size) + "x" +
             std::to_string(size) + " input");
  }
}

}  // namespace

ImageBuffer PredictNoise(const ImageBuffer& x_t, int t,
                         const Conditioning& cond, const Denoiser& model,
                         Workspace* ws) {
  RequireStep(t, model.T());
  RequireModelInput(x_t, model);
  std::optional<Workspace> local;
  if (ws == nullptr) ws = &local.emplace(model);
  PackInput(x_t, cond, ws->input());
  model.net().Forward(model.params(), ws->input(), t, ws->output(),
                      ws->cache());
  ImageBuffer out(x_t.height(), x_t.width(), 3);
  std::copy(ws->output().begin(), ws->output().end(), out.data().begin());
  return out;
}

ImageBuffer MeanFromNoise(const ImageBuffer& x_t, const ImageBuffer& eps_hat,
                          int t, int t_prev, const NoiseSchedule& sched) {
  RequireStep(t, sched.T);
  Require(t_prev >= 0 && t_prev < t, ErrorKind::kOutOfRange,
          "t_prev must lie in [0, t)");
  RequireSameShape(x_t, eps_hat, "MeanFromNoise");
  double alpha, beta;
  if (t_prev == t - 1) {
    alpha = sched.alpha[t];
    beta = sched.beta[t];
  } else {
    alpha = sched.alpha_bar[t] / sched.alpha_bar[t_prev];
    beta = 1.0 - alpha;
  }
  const double inv_sqrt_alpha = 1.0 / std::sqrt(alpha);
  const double eps_coef = beta / std::sqrt(1.0 - sched.alpha_bar[t]);
  ImageBuffer out(x_t.height(), x_t.width(), x_t.channels());
  auto o = out.data();
  auto x = x_t.data();
  auto e = eps_hat.data();
  for (size_t i = 0; i < o.size(); ++i) {
    o[i] = static_cast<float>(inv_sqrt_alpha * (x[i] - eps_coef * e[i]));
  }
  return out;
}

double PosteriorSigma(int t, int t_prev, const NoiseSchedule& sched) {
  RequireStep(t, sched.T);
  Require(t_prev >= 0 && t_prev < t, ErrorKind::kOutOfRange,
          "t_prev must lie in [0, t)");
  if (t_prev == t - 1) return sched.sigma[t];
  const double beta = 1.0 - sched.alpha_bar[t] / sched.alpha_bar[t_prev];
  return std::sqrt(beta * (1.0 - sched.alpha_bar[t_prev]) /
                   (1.0 - sched.alpha_bar[t]));
}

ImageBuffer DenoiseMean(const ImageBuffer& x_t, int t,
                        const Conditioning& cond, const Denoiser& model,
                        const NoiseSchedule& sched, Workspace* ws) {
  model.RequireSchedule(sched);
  const ImageBuffer eps = PredictNoise(x_t, t, cond, model, ws);
  return MeanFromNoise(x_t, eps, t, t - 1, sched);
}

// ---------------------------------------------------------------------------

double SampleLossAndGrad(const Denoiser& model, const TrainExample& ex, int t,
                         const ImageBuffer& eps, bool use_null,
                         const NoiseSchedule& sched, Workspace& ws,
                         std::span<float> grad, float grad_scale) {
  const ImageBuffer x_t = ForwardDiffuse(ex.image, t, eps, sched);
  const Conditioning cond = use_null ? Conditioning::Null()
                                     : Conditioning::Make(ex.mask, ex.image);
  RequireModelInput(x_t, model);
  PackInput(x_t, cond, ws.input());
  model.net().Forward(model.params(), ws.input(), t, ws.output(), ws.cache());

  const auto e = eps.data();
  auto& out = ws.output();
  const double n = static_cast<double>(out.size());
  double loss = 0.0;
  // Reuse the output buffer for d(loss)/d(output).
  for (size_t i = 0; i < out.size(); ++i) {
    const double diff = static_cast<double>(out[i]) - e[i];
    loss += diff * diff;
    out[i] = static_cast<float>(2.0 * diff / n) * grad_scale;
  }
  model.net().Backward(model.params(), *ws.cache(), out, grad);
  return loss / n;
}

TrainStats Train(Denoiser& model, OptimizerState& state, size_t dataset_size,
                 const ExampleSource& source, const TrainConfig& cfg,
                 const NoiseSchedule& sched, uint64_t rng_seed) {
  Require(dataset_size > 0, ErrorKind::kInvalidArgument, "empty dataset");
  Require(cfg.batch_size >= 1, ErrorKind::kInvalidArgument,
          "batch_size must be >= 1");
  Require(cfg.p_drop >= 0.0 && cfg.p_drop <= 1.0, ErrorKind::kInvalidArgument,
          "p_drop must lie in [0, 1]");
  Require(cfg.lr > 0.0, ErrorKind::kInvalidArgument, "lr must be positive");
  model.RequireSchedule(sched);

  const size_t n_params = model.params().size();
  if (state.m.size() != n_params) {
    Require(state.step == 0 && state.m.empty(), ErrorKind::kFormat,
            "optimizer state does not match the model");
    state.m.assign(n_params, 0.0f);
    state.v.assign(n_params, 0.0f);
  }

  const int64_t steps_per_epoch =
      static_cast<int64_t>((dataset_size + cfg.batch_size - 1) /
                           cfg.batch_size);
  const int64_t total_steps =
      cfg.max_steps > 0 ? cfg.max_steps : cfg.epochs * steps_per_epoch;

  TrainStats stats;
  stats.first_step = state.step;
  Workspace ws(model);
  std::vector<float> grad(n_params);
  std::vector<size_t> order(dataset_size);
  int64_t order_epoch = -1;
  double last_finite = std::nan("");

  for (; state.step < total_steps; ++state.step) {
    const int64_t step = state.step;
    const int64_t epoch = step / steps_per_epoch;
    if (epoch != order_epoch) {
      std::iota(order.begin(), order.end(), size_t{0});
      Rng shuffle_rng(DeriveSeed(rng_seed, "train_epoch", epoch));
      std::shuffle(order.begin(), order.end(), shuffle_rng);
      order_epoch = epoch;
    }
    std::fill(grad.begin(), grad.end(), 0.0f);
    double batch_loss = 0.0;
    const float scale = 1.0f / static_cast<float>(cfg.batch_size);
    for (int b = 0; b < cfg.batch_size; ++b) {
      const size_t pos =
          static_cast<size_t>((step % steps_per_epoch) * cfg.batch_size + b) %
          dataset_size;
      Rng rng(DeriveSeed(rng_seed, "train_sample",
                         static_cast<uint64_t>(step * cfg.batch_size + b)));
      const TrainExample ex = source(order[pos], rng);
      std::uniform_int_distribution<int> pick_t(1, sched.T);
      const int t = pick_t(rng);
      std::uniform_real_distribution<double> unit(0.0, 1.0);
      const bool use_null = unit(rng) < cfg.p_drop;
      const ImageBuffer eps = GaussianImage(ex.image.height(),
                                            ex.image.width(), 3, rng);
      stats.null_batches_used += use_null ? 1 : 0;
      batch_loss += SampleLossAndGrad(model, ex, t, eps, use_null, sched, ws,
                                      grad, scale);
    }
    batch_loss /= cfg.batch_size;
    if (!std::isfinite(batch_loss)) {
      char msg[256];
      std::snprintf(msg, sizeof(msg),
                    "non-finite training loss at step %lld (lr %.3g, last "
                    "finite loss %.6g)",
                    static_cast<long long>(step), cfg.lr, last_finite);
      Fail(ErrorKind::kNumerical, msg);
    }
    last_finite = batch_loss;
    stats.loss.push_back(batch_loss);

    double gnorm2 = 0.0;
    for (float g : grad) gnorm2 += static_cast<double>(g) * g;
    const double gnorm = std::sqrt(gnorm2);
    const double clip =
        (cfg.grad_clip > 0.0 && gnorm > cfg.grad_clip) ? cfg.grad_clip / gnorm
                                                       : 1.0;
    const double warm =
        cfg.warmup_steps > 0
            ? std::min(1.0, static_cast<double>(step + 1) / cfg.warmup_steps)
            : 1.0;
    const double lr = cfg.lr * warm;
    const double k = static_cast<double>(step + 1);
    const double bc1 = 1.0 - std::pow(cfg.adam_beta1, k);
    const double bc2 = 1.0 - std::pow(cfg.adam_beta2, k);
    auto& p = model.params();
    for (size_t i = 0; i < n_params; ++i) {
      const double g = grad[i] * clip;
      const double m = cfg.adam_beta1 * state.m[i] + (1 - cfg.adam_beta1) * g;
      const double v =
          cfg.adam_beta2 * state.v[i] + (1 - cfg.adam_beta2) * g * g;
      state.m[i] = static_cast<float>(m);
      state.v[i] = static_cast<float>(v);
      p[i] -= static_cast<float>(lr * (m / bc1) /
                                 (std::sqrt(v / bc2) + cfg.adam_eps));
    }
    if (cfg.log_every > 0 && (step + 1) % cfg.log_every == 0) {
      const size_t w = std::min<size_t>(stats.loss.size(), cfg.log_every);
      double avg = 0.0;
      for (size_t i = stats.loss.size() - w; i < stats.loss.size(); ++i) {
        avg += stats.loss[i];
      }
      std::fprintf(stderr, "step %lld/%lld loss %.5f grad_norm %.3f\n",
                   static_cast<long long>(step + 1),
                   static_cast<long long>(total_steps), avg / w, gnorm);
    }
  }
  return stats;
}

// ---------------------------------------------------------------------------
// Checkpoint layout: magic[8] | u32 version | u32 header_len | header JSON |
// f32 params[n] | (f32 m[n] | f32 v[n] when has_optimizer).

namespace {

using nlohmann::json;

uint64_t Fnv1a(const void* data, size_t n) {
  uint64_t h = 0xcbf29ce484222325ULL;
  const auto* bytes = static_cast<const unsigned char*>(data);
  for (size_t i = 0; i < n; ++i) {
    h ^= bytes[i];
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string Hex(uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

json ArchToJson(const UNetArch& a) {
  return {{"in_channels", a.in_channels}, {"out_channels", a.out_channels},
          {"base_width", a.base_width},   {"levels", a.levels},
          {"time_dim", a.time_dim},       {"groups", a.groups},
          {"image_size", a.image_size}};
}

UNetArch ArchFromJson(const json& j) {
  UNetArch a;
  a.in_channels = j.at("in_channels").get<int>();
  a.out_channels = j.at("out_channels").get<int>();
  a.base_width = j.at("base_width").get<int>();
  a.levels = j.at("levels").get<int>();
  a.time_dim = j.at("time_dim").get<int>();
  a.groups = j.at("groups").get<int>();
  a.image_size = j.at("image_size").get<int>();
  const std::string problem = ValidateArch(a);
  if (!problem.empty()) Fail(ErrorKind::kFormat, "checkpoint arch: " + problem);
  return a;
}

void WriteFloats(std::ostream& os, const std::vector<float>& v) {
  os.write(reinterpret_cast<const char*>(v.data()),
           static_cast<std::streamsize>(v.size() * sizeof(float)));
}

void ReadFloats(std::istream& is, std::vector<float>& v, size_t n,
                const std::string& path) {
  v.resize(n);
  is.read(reinterpret_cast<char*>(v.data()),
          static_cast<std::streamsize>(n * sizeof(float)));
  if (!is) Fail(ErrorKind::kFormat, path + ": truncated checkpoint payload");
}

struct RawHeader {
  json header;
  std::string text;
};

RawHeader ReadHeader(std::istream& is, const std::string& path) {
  char magic[8];
  is.read(magic, 8);
  if (!is || std::memcmp(magic, kCheckpointMagic, 8) != 0) {
    Fail(ErrorKind::kFormat, path + ": not a checkpoint (bad magic)");
  }
  uint32_t version = 0, len = 0;
  is.read(reinterpret_cast<char*>(&version), 4);
  is.read(reinterpret_cast<char*>(&len), 4);
  if (!is) Fail(ErrorKind::kFormat, path + ": truncated checkpoint header");
  if (version != kCheckpointVersion) {
    Fail(ErrorKind::kFormat, path + ": unsupported checkpoint version " +
                                 std::to_string(version));
  }
  if (len > (1u << 20)) Fail(ErrorKind::kFormat, path + ": oversized header");
  RawHeader raw;
  raw.text.resize(len);
  is.read(raw.text.data(), len);
  if (!is) Fail(ErrorKind::kFormat, path + ": truncated checkpoint header");
  try {
    raw.header = json::parse(raw.text);
  } catch (const json::exception& e) {
    Fail(ErrorKind::kFormat, path + ": header is not JSON: " + e.what());
  }
  return raw;
}

}  // namespace

void SaveCheckpoint(const std::string& path, const Denoiser& model,
                    const OptimizerState* state) {
  const auto& p = model.params();
  json header = {
      {"format", "amodal-checkpoint"},
      {"arch", ArchToJson(model.arch())},
      {"schedule",
       {{"T", model.T()},
        {"beta_start", model.beta_start()},
        {"beta_end", model.beta_end()},
        {"kind", "linear"}}},
      {"sched_fingerprint", model.sched_fingerprint()},
      {"num_params", p.size()},
      {"params_fnv1a", Hex(Fnv1a(p.data(), p.size() * sizeof(float)))},
      {"has_optimizer", state != nullptr},
      {"train_step", state ? state->step : 0},
  };
  const std::string text = header.dump();
  const std::string tmp = path + ".tmp";
  {
    std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
    if (!os) Fail(ErrorKind::kIo, "cannot write " + tmp);
    os.write(kCheckpointMagic, 8);
    const uint32_t version = kCheckpointVersion;
    const auto len = static_cast<uint32_t>(text.size());
    os.write(reinterpret_cast<const char*>(&version), 4);
    os.write(reinterpret_cast<const char*>(&len), 4);
    os.write(text.data(), static_cast<std::streamsize>(text.size()));
    WriteFloats(os, p);
    if (state != nullptr) {
      Require(state->m.size() == p.size() && state->v.size() == p.size(),
              ErrorKind::kInvalidArgument, "optimizer state size mismatch");
      WriteFloats(os, state->m);
      WriteFloats(os, state->v);
    }
    if (!os) Fail(ErrorKind::kIo, "write failed for " + tmp);
  }
  if (std::rename(tmp.c_str(), path.c_str()) != 0) {
    Fail(ErrorKind::kIo, "cannot rename " + tmp + " to " + path);
  }
}

LoadedCheckpoint LoadCheckpoint(const std::string& path,
                                const NoiseSchedule& sched) {
  std::ifstream is(path, std::ios::binary);
  if (!is) Fail(ErrorKind::kIo, "cannot open checkpoint " + path);
  RawHeader raw = ReadHeader(is, path);
  const json& h = raw.header;
  try {
    const UNetArch arch = ArchFromJson(h.at("arch"));
    const std::string fp = h.at("sched_fingerprint").get<std::string>();
    if (fp != sched.Fingerprint()) {
      Fail(ErrorKind::kFingerprintMismatch,
           path + ": checkpoint schedule fingerprint " + fp +
               " differs from " + sched.Fingerprint());
    }
    LoadedCheckpoint out{Denoiser(arch, sched), std::nullopt, raw.text};
    const size_t n = h.at("num_params").get<size_t>();
    if (n != out.model.params().size()) {
      Fail(ErrorKind::kFormat, path + ": parameter count does not match arch");
    }
    ReadFloats(is, out.model.params(), n, path);
    const auto& p = out.model.params();
    if (Hex(Fnv1a(p.data(), n * sizeof(float))) !=
        h.at("params_fnv1a").get<std::string>()) {
      Fail(ErrorKind::kFormat, path + ": parameter checksum mismatch");
    }
    if (h.at("has_optimizer").get<bool>()) {
      OptimizerState st;
      st.step = h.at("train_step").get<int64_t>();
      ReadFloats(is, st.m, n, path);
      ReadFloats(is, st.v, n, path);
      out.state = std::move(st);
    }
    is.peek();
    if (!is.eof()) Fail(ErrorKind::kFormat, path + ": trailing bytes");
    return out;
  } catch (const json::exception& e) {
    Fail(ErrorKind::kFormat, path + ": malformed header: " + e.what());
  }
}

NoiseSchedule CheckpointSchedule(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) Fail(ErrorKind::kIo, "cannot open checkpoint " + path);
  const RawHeader raw = ReadHeader(is, path);
  try {
    const json& s = raw.header.at("schedule");
    return BuildSchedule(s.at("T").get<int>(), s.at("beta_start").get<double>(),
                         s.at("beta_end").get<double>());
  } catch (const json::exception& e) {
    Fail(ErrorKind::kFormat, path + ": malformed header: " + e.what());
  }
}

}  // namespace amodal
