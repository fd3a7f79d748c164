#include "amodal/sampler.h"

#include <cmath>

#include "amodal/rng.h"
#include "doctest.h"

namespace amodal {
namespace {

ImageBuffer Random(int h, int w, uint64_t seed) {
  Rng rng(seed);
  return GaussianImage(h, w, 3, rng);
}

BinaryMask Stripe(int h, int w) {
  BinaryMask m(h, w);
  for (int y = 0; y < h; ++y) {
    for (int x = w / 4; x < w / 2; ++x) m.set(y, x);
  }
  return m;
}

TEST_CASE("guidance blend") {
  const ImageBuffer c = Random(3, 4, 1), n = Random(3, 4, 2);
  for (double w : {0.0, 0.75, 7.5}) {
    const ImageBuffer g = CfgCombine(c, n, w);
    for (size_t i = 0; i < g.size(); ++i) {
      CHECK(g.data()[i] == doctest::Approx((1 + w) * c.data()[i] - w * n.data()[i]).epsilon(1e-5));
    }
  }
  CHECK(CfgCombine(c, n, 0.0) == c);
}

TEST_CASE("leakage combine") {
  const int h = 5, w = 6;
  const ImageBuffer xt = Random(h, w, 3), xk = Random(h, w, 4);
  const BinaryMask m = Stripe(h, w);
  for (double s : {0.0, 0.3, 1.0}) {
    const ImageBuffer out = LeakageCombine(xt, xk, m, s);
    for (int c = 0; c < 3; ++c) {
      for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
          const double mm = m.at(y, x) ? 1.0 : 0.0;
          const double want = s * (mm * xt.at(c, y, x) + (1 - mm) * xk.at(c, y, x)) +
                              (1 - s) * xk.at(c, y, x);
          CHECK(out.at(c, y, x) == doctest::Approx(want).epsilon(1e-6));
          if (!m.at(y, x)) CHECK(out.at(c, y, x) == xk.at(c, y, x));
        }
      }
    }
  }
  // s = 0 keeps the known image, s = 1 is a hard paste.
  CHECK(LeakageCombine(xt, xk, m, 0.0) == xk);
}

TEST_CASE("start step and timestep plan") {
  CHECK(StartStep(0.3, 1000) == 300);
  CHECK(StartStep(0.1, 1000) == 100);
  CHECK(StartStep(0.15, 1000) == 150);
  CHECK(StartStep(1.0 / 3.0, 1000) == 334);
  CHECK(StartStep(0.0, 1000) == 0);
  CHECK(StartStep(1.0, 1000) == 1000);
  CHECK(StartStep(0.0004, 1000) == 1);
  CHECK_THROWS_AS(StartStep(1.1, 1000), Error);

  const std::vector<int> p = TimestepPlan(300, 20);
  REQUIRE(p.size() == 21);
  CHECK(p.front() == 300);
  CHECK(p[1] == 285);
  CHECK(p.back() == 0);
  for (size_t i = 1; i < p.size(); ++i) CHECK(p[i] < p[i - 1]);

  CHECK(TimestepPlan(5, 20) == std::vector<int>{5, 4, 3, 2, 1, 0});
  CHECK(TimestepPlan(0, 20) == std::vector<int>{0});
}

TEST_CASE("config validation") {
  SamplerConfig c;
  CHECK_NOTHROW(ValidateSamplerConfig(c));
  c.s = -0.1;
  CHECK_THROWS_AS(ValidateSamplerConfig(c), Error);
  c = SamplerConfig();
  c.w = -1;
  CHECK_THROWS_AS(ValidateSamplerConfig(c), Error);
  c = SamplerConfig();
  c.steps = 0;
  CHECK_THROWS_AS(ValidateSamplerConfig(c), Error);
}

struct Fixture {
  NoiseSchedule sched = BuildSchedule(100);
  Denoiser model{Arch(), sched};
  ImageBuffer x_cond;
  BinaryMask m;

  static UNetArch Arch() {
    UNetArch a;
    a.base_width = 4;
    a.levels = 2;
    a.time_dim = 8;
    a.groups = 2;
    a.image_size = 8;
    return a;
  }

  Fixture() {
    Rng rng(12);
    std::normal_distribution<float> n(0.0f, 0.2f);
    for (float& p : model.params()) p = n(rng);
    x_cond = Random(8, 8, 5);
    ClampInPlace(x_cond);
    m = Stripe(8, 8);
  }
};

TEST_CASE("soft inpainting keeps the unmasked region and stays in range") {
  Fixture f;
  SamplerConfig c;
  c.s = 0.5;
  c.rng_seed = 3;
  c.keep_trace = true;
  const DiffusionState st = SoftInpaint(f.x_cond, f.m, c, f.model, f.sched);
  CHECK(st.t == 0);
  CHECK(st.trace.size() == 20);
  for (int ch = 0; ch < 3; ++ch) {
    for (int y = 0; y < 8; ++y) {
      for (int x = 0; x < 8; ++x) {
        const float v = st.x_hat.at(ch, y, x);
        CHECK(v >= -1.0f);
        CHECK(v <= 1.0f);
        if (!f.m.at(y, x)) CHECK(v == f.x_cond.at(ch, y, x));
      }
    }
  }
}

TEST_CASE("soft inpainting with s = 0 returns the condition") {
  Fixture f;
  SamplerConfig c;
  c.s = 0.0;
  CHECK(SoftInpaint(f.x_cond, f.m, c, f.model, f.sched).x_hat == f.x_cond);
}

TEST_CASE("soft inpainting is deterministic per seed") {
  Fixture f;
  SamplerConfig c;
  c.rng_seed = 8;
  const ImageBuffer a = SoftInpaint(f.x_cond, f.m, c, f.model, f.sched).x_hat;
  const ImageBuffer b = SoftInpaint(f.x_cond, f.m, c, f.model, f.sched).x_hat;
  c.rng_seed = 9;
  const ImageBuffer d = SoftInpaint(f.x_cond, f.m, c, f.model, f.sched).x_hat;
  CHECK(a == b);
  CHECK_FALSE(a == d);
}

TEST_CASE("guidance on the noise or on the sample agree") {
  Fixture f;
  SamplerConfig c;
  c.w = 7.5;
  c.s = 0.6;
  c.rng_seed = 4;
  c.combine = CombineMode::kNone;
  const ImageBuffer a = SoftInpaint(f.x_cond, f.m, c, f.model, f.sched).x_hat;
  c.guidance = GuidanceTarget::kSample;
  const ImageBuffer b = SoftInpaint(f.x_cond, f.m, c, f.model, f.sched).x_hat;
  for (size_t i = 0; i < a.size(); ++i) {
    CHECK(a.data()[i] == doctest::Approx(b.data()[i]).epsilon(1e-4).scale(1));
  }
}

TEST_CASE("repaint pastes the known image outside and the sample inside") {
  Fixture f;
  SamplerConfig c;
  c.combine = CombineMode::kRepaint;
  c.rng_seed = 5;
  const ImageBuffer a = SoftInpaint(f.x_cond, f.m, c, f.model, f.sched).x_hat;
  for (int y = 0; y < 8; ++y) {
    for (int x = 0; x < 8; ++x) {
      if (!f.m.at(y, x)) CHECK(a.at(0, y, x) == f.x_cond.at(0, y, x));
    }
  }
}

TEST_CASE("resolution and schedule mismatches are rejected") {
  Fixture f;
  SamplerConfig c;
  CHECK_THROWS_AS(SoftInpaint(Random(4, 4, 1), BinaryMask(4, 4), c, f.model, f.sched), Error);
  CHECK_THROWS_AS(SoftInpaint(f.x_cond, BinaryMask(4, 4), c, f.model, f.sched), Error);
  CHECK_THROWS_AS(SoftInpaint(f.x_cond, f.m, c, f.model, BuildSchedule(99)), Error);
}

}  // namespace
}  // namespace amodal
