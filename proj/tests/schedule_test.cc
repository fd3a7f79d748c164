#include "amodal/schedule.h"

#include <cmath>

#include "amodal/rng.h"
#include "doctest.h"

namespace amodal {
namespace {

// Reference products computed with 50-digit arithmetic.
TEST_CASE("linear schedule alpha_bar matches high-precision products") {
  const NoiseSchedule s = BuildSchedule(1000);
  REQUIRE(s.alpha_bar.size() == 1001);
  CHECK(s.beta[1] == doctest::Approx(1e-4).epsilon(1e-12));
  CHECK(s.beta[1000] == doctest::Approx(0.02).epsilon(1e-12));
  CHECK(s.alpha_bar[1] == doctest::Approx(0.9999).epsilon(1e-12));
  CHECK(s.alpha_bar[2] == doctest::Approx(0.99978009207207207207).epsilon(1e-12));
  CHECK(s.alpha_bar[500] == doctest::Approx(0.078587242881778237343).epsilon(1e-9));
  CHECK(s.alpha_bar[1000] == doctest::Approx(4.0358297653756833148e-5).epsilon(1e-8));
}

TEST_CASE("index 0 is the clean image") {
  const NoiseSchedule s = BuildSchedule(50);
  CHECK(s.beta[0] == 0.0);
  CHECK(s.alpha[0] == 1.0);
  CHECK(s.alpha_bar[0] == 1.0);
  CHECK(s.sigma[0] == 0.0);
  // Posterior variance at t = 1 vanishes because alpha_bar_0 = 1.
  CHECK(s.sigma[1] == 0.0);
  for (int t = 2; t <= 50; ++t) {
    const double var = s.beta[t] * (1 - s.alpha_bar[t - 1]) / (1 - s.alpha_bar[t]);
    CHECK(s.sigma[t] == doctest::Approx(std::sqrt(var)).epsilon(1e-12));
  }
}

TEST_CASE("explicit betas") {
  const NoiseSchedule s = ScheduleFromBetas({0.1, 0.2});
  CHECK(s.T == 2);
  CHECK(s.alpha_bar[2] == doctest::Approx(0.9 * 0.8));
  CHECK_THROWS_AS(ScheduleFromBetas({}), Error);
  CHECK_THROWS_AS(ScheduleFromBetas({0.0}), Error);
  CHECK_THROWS_AS(ScheduleFromBetas({1.0}), Error);
  CHECK_THROWS_AS(BuildSchedule(0), Error);
}

TEST_CASE("fingerprint separates schedules") {
  CHECK(BuildSchedule(1000).Fingerprint() == BuildSchedule(1000).Fingerprint());
  CHECK(BuildSchedule(1000).Fingerprint() != BuildSchedule(999).Fingerprint());
  CHECK(BuildSchedule(1000).Fingerprint() !=
        BuildSchedule(1000, 1e-4, 0.021).Fingerprint());
}

TEST_CASE("forward diffusion matches its closed form") {
  const NoiseSchedule s = BuildSchedule(1000);
  ImageBuffer x0(4, 5, 3, 0.25f);
  Rng rng(11);
  const ImageBuffer eps = GaussianImage(4, 5, 3, rng);
  const ImageBuffer xt = ForwardDiffuse(x0, 400, eps, s);
  const double a = std::sqrt(s.alpha_bar[400]), b = std::sqrt(1 - s.alpha_bar[400]);
  for (size_t i = 0; i < xt.size(); ++i) {
    CHECK(xt.data()[i] == doctest::Approx(a * 0.25 + b * eps.data()[i]).epsilon(1e-6));
  }
  CHECK_THROWS_AS(ForwardDiffuse(x0, 0, eps, s), Error);
  CHECK_THROWS_AS(ForwardDiffuse(x0, 1001, eps, s), Error);
}

}  // namespace
}  // namespace amodal
