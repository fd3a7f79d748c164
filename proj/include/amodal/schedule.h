#ifndef AMODAL_SCHEDULE_H_
#define AMODAL_SCHEDULE_H_

#include <cstdint>
#include <string>
#include <vector>

#include "amodal/image.h"

namespace amodal {

// Diffusion noise schedule. Step indices are 1-based: index 0 of every table
// is the clean image (beta 0, alpha 1, alpha_bar 1, sigma 0), so the table for
// step t is read at [t].
struct NoiseSchedule {
  int T = 0;
  double beta_start = 0.0;
  double beta_end = 0.0;
  std::vector<double> beta;
  std::vector<double> alpha;
  std::vector<double> alpha_bar;
  // Standard deviation of the reverse transition t -> t-1, from the
  // posterior variance beta_t (1 - alpha_bar_{t-1}) / (1 - alpha_bar_t).
  std::vector<double> sigma;

  // Identifies the schedule inside model checkpoints.
  std::string Fingerprint() const;
};

// Linear beta schedule over [beta_start, beta_end].
NoiseSchedule BuildSchedule(int T, double beta_start = 1e-4,
                            double beta_end = 0.02);

// Schedule from an explicit beta table (betas[0] is step 1).
NoiseSchedule ScheduleFromBetas(const std::vector<double>& betas);

// sqrt(alpha_bar[t]) x0 + sqrt(1 - alpha_bar[t]) eps, elementwise.
ImageBuffer ForwardDiffuse(const ImageBuffer& x0, int t,
                           const ImageBuffer& eps,
                           const NoiseSchedule& sched);

}  // namespace amodal

#endif  // AMODAL_SCHEDULE_H_
