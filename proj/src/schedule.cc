#include "amodal/schedule.h"

#include <cmath>
#include <cstdio>
#include <cstring>

namespace amodal {
namespace {

void FillDerived(NoiseSchedule& s) {
  const int T = s.T;
  s.alpha.assign(T + 1, 1.0);
  s.alpha_bar.assign(T + 1, 1.0);
  s.sigma.assign(T + 1, 0.0);
  for (int t = 1; t <= T; ++t) {
    s.alpha[t] = 1.0 - s.beta[t];
    s.alpha_bar[t] = s.alpha_bar[t - 1] * s.alpha[t];
    const double var =
        s.beta[t] * (1.0 - s.alpha_bar[t - 1]) / (1.0 - s.alpha_bar[t]);
    s.sigma[t] = std::sqrt(var);
  }
}

}  // namespace

std::string NoiseSchedule::Fingerprint() const {
  uint64_t h = 0xcbf29ce484222325ULL;
  auto mix = [&h](const void* p, size_t n) {
    const auto* bytes = static_cast<const unsigned char*>(p);
    for (size_t i = 0; i < n; ++i) {
      h ^= bytes[i];
      h *= 0x100000001b3ULL;
    }
  };
  const int64_t steps = T;
  mix(&steps, sizeof(steps));
  for (int t = 1; t <= T; ++t) mix(&beta[t], sizeof(double));
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx",
                static_cast<unsigned long long>(h));
  return buf;
}

NoiseSchedule BuildSchedule(int T, double beta_start, double beta_end) {
  Require(T >= 2, ErrorKind::kInvalidArgument,
          "schedule needs at least two steps");
  Require(beta_start > 0.0 && beta_start <= beta_end && beta_end < 1.0,
          ErrorKind::kInvalidArgument,
          "betas must satisfy 0 < beta_start <= beta_end < 1");
  NoiseSchedule s;
  s.T = T;
  s.beta_start = beta_start;
  s.beta_end = beta_end;
  s.beta.assign(T + 1, 0.0);
  for (int t = 1; t <= T; ++t) {
    const double frac = static_cast<double>(t - 1) / (T - 1);
    s.beta[t] = beta_start + frac * (beta_end - beta_start);
  }
  FillDerived(s);
  return s;
}

NoiseSchedule ScheduleFromBetas(const std::vector<double>& betas) {
  Require(!betas.empty(), ErrorKind::kInvalidArgument, "empty beta table");
  NoiseSchedule s;
  s.T = static_cast<int>(betas.size());
  s.beta.assign(s.T + 1, 0.0);
  for (int t = 1; t <= s.T; ++t) {
    Require(betas[t - 1] > 0.0 && betas[t - 1] < 1.0,
            ErrorKind::kInvalidArgument, "beta out of (0, 1)");
    s.beta[t] = betas[t - 1];
  }
  s.beta_start = s.beta[1];
  s.beta_end = s.beta[s.T];
  FillDerived(s);
  return s;
}

ImageBuffer ForwardDiffuse(const ImageBuffer& x0, int t,
                           const ImageBuffer& eps,
                           const NoiseSchedule& sched) {
  RequireSameShape(x0, eps, "ForwardDiffuse");
  Require(t >= 1 && t <= sched.T, ErrorKind::kOutOfRange,
          "ForwardDiffuse: step index out of range");
  const float a = static_cast<float>(std::sqrt(sched.alpha_bar[t]));
  const float b = static_cast<float>(std::sqrt(1.0 - sched.alpha_bar[t]));
  ImageBuffer out = x0;
  auto o = out.data();
  auto e = eps.data();
  for (size_t i = 0; i < o.size(); ++i) o[i] = a * o[i] + b * e[i];
  return out;
}

}  // namespace amodal
