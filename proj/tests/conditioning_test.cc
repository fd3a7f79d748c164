#include "amodal/conditioning.h"

#include <cmath>

#include "doctest.h"

namespace amodal {
namespace {

ImageBuffer Solid(int h, int w, std::array<float, 3> c) {
  ImageBuffer im(h, w, 3);
  for (int ch = 0; ch < 3; ++ch) {
    for (float& v : im.plane(ch)) v = c[ch];
  }
  return im;
}

void Paint(ImageBuffer& im, int y, int x, std::array<float, 3> c) {
  for (int ch = 0; ch < 3; ++ch) im.at(ch, y, x) = c[ch];
}

TEST_CASE("histogram bins and centres") {
  CHECK(HistogramBin(-1.0f, 16) == 0);
  CHECK(HistogramBin(1.0f, 16) == 15);
  CHECK(HistogramBin(-0.875f, 16) == 1);  // left edge belongs to the bin
  CHECK(HistogramBin(-0.8751f, 16) == 0);
  CHECK(HistogramBin(0.0f, 16) == 8);
  CHECK(BinCenter(0, 16) == doctest::Approx(-0.9375));
  CHECK(BinCenter(15, 16) == doctest::Approx(0.9375));
  for (int b = 0; b < 16; ++b) CHECK(HistogramBin(BinCenter(b, 16), 16) == b);
}

TEST_CASE("noise object") {
  const ImageBuffer im = Solid(2, 2, {0.5f, -0.5f, 0.0f});
  const ImageBuffer eps = Solid(2, 2, {1.0f, 1.0f, -2.0f});
  const ImageBuffer o = NoiseObject(im, 0.3, eps);
  CHECK(o.at(0, 0, 0) == doctest::Approx(0.3 + 0.7 * 0.5));
  CHECK(o.at(1, 1, 1) == doctest::Approx(0.3 - 0.7 * 0.5));
  CHECK(o.at(2, 0, 1) == doctest::Approx(-0.6));
  CHECK(NoiseObject(im, 0.0, eps) == im);
  CHECK_THROWS_AS(NoiseObject(im, 1.5, eps), Error);
}

// Visible region: three pixels of colour A and one of colour B, both exactly
// on cell centres. Every background pixel must be A or B with frequency 3:1.
TEST_CASE("histogram field samples visible colours by frequency") {
  const std::array<float, 3> a{BinCenter(2, 16), BinCenter(12, 16), BinCenter(8, 16)};
  const std::array<float, 3> b{BinCenter(12, 16), BinCenter(2, 16), BinCenter(8, 16)};
  ImageBuffer im = Solid(64, 64, {0.9f, 0.9f, 0.9f});
  BinaryMask v(64, 64);
  for (int x = 0; x < 3; ++x) {
    Paint(im, 10, 10 + x, a);
    v.set(10, 10 + x);
  }
  Paint(im, 11, 10, b);
  v.set(11, 10);
  Rng rng(3);
  const ImageBuffer f = SampleHistogramField(im, v, 16, rng);
  size_t n_a = 0, n_b = 0;
  for (int y = 0; y < 64; ++y) {
    for (int x = 0; x < 64; ++x) {
      const bool is_a = f.at(0, y, x) == a[0] && f.at(1, y, x) == a[1] && f.at(2, y, x) == a[2];
      const bool is_b = f.at(0, y, x) == b[0] && f.at(1, y, x) == b[1] && f.at(2, y, x) == b[2];
      CHECK((is_a || is_b));
      n_a += is_a;
      n_b += is_b;
    }
  }
  // Binomial(4096, 0.75): standard deviation 0.0068.
  const double frac = static_cast<double>(n_a) / (n_a + n_b);
  CHECK(frac == doctest::Approx(0.75).epsilon(0.04 / 0.75));
}

TEST_CASE("cell colours stay inside the visible range") {
  // A uniform object: the centre of its cell is clamped back to the colour.
  const std::array<float, 3> c{0.01f, -0.33f, 0.97f};
  const ImageBuffer im = Solid(64, 64, c);
  BinaryMask v(64, 64);
  for (int y = 20; y < 30; ++y) {
    for (int x = 5; x < 9; ++x) v.set(y, x);
  }
  Rng rng(1);
  const ImageBuffer bg = HistogramBackground(im, v, 16, 8.0, rng);
  for (int ch = 0; ch < 3; ++ch) {
    for (float val : bg.plane(ch)) CHECK(val == doctest::Approx(c[ch]).epsilon(1e-6));
  }

  // Two-tone object: every field value lies in the per-channel visible range.
  ImageBuffer two = Solid(16, 16, {-0.2f, 0.4f, 0.1f});
  BinaryMask v2(16, 16);
  for (int x = 0; x < 8; ++x) {
    v2.set(3, x);
    if (x % 2) Paint(two, 3, x, {0.3f, -0.1f, 0.12f});
  }
  Rng rng2(2);
  const ImageBuffer f = SampleHistogramField(two, v2, 16, rng2);
  const float lo[3] = {-0.2f, -0.1f, 0.1f}, hi[3] = {0.3f, 0.4f, 0.12f};
  for (int ch = 0; ch < 3; ++ch) {
    for (float val : f.plane(ch)) {
      CHECK(val >= lo[ch]);
      CHECK(val <= hi[ch]);
    }
  }
}

TEST_CASE("histogram field needs visible pixels") {
  Rng rng(1);
  CHECK_THROWS_AS(SampleHistogramField(Solid(4, 4, {0, 0, 0}), BinaryMask(4, 4), 16, rng), Error);
}

int MirrorIndex(int i, int n) {
  // Explicit unfolding: ... 1 0 | 0 1 ... n-1 | n-1 n-2 ...
  while (i < 0 || i >= n) {
    if (i < 0) i = -i - 1;
    if (i >= n) i = 2 * n - 1 - i;
  }
  return i;
}

TEST_CASE("gaussian blur matches a direct 2-D convolution with mirrored borders") {
  Rng rng(4);
  const ImageBuffer im = GaussianImage(9, 7, 3, rng);
  const double sigma = 1.7;
  const int r = static_cast<int>(std::ceil(3 * sigma));
  double norm = 0;
  for (int k = -r; k <= r; ++k) norm += std::exp(-0.5 * k * k / (sigma * sigma));
  const ImageBuffer out = GaussianBlur(im, sigma);
  for (int c = 0; c < 3; ++c) {
    for (int y = 0; y < 9; ++y) {
      for (int x = 0; x < 7; ++x) {
        double acc = 0;
        for (int dy = -r; dy <= r; ++dy) {
          for (int dx = -r; dx <= r; ++dx) {
            const double wgt = std::exp(-0.5 * (dx * dx + dy * dy) / (sigma * sigma)) / (norm * norm);
            acc += wgt * im.at(c, MirrorIndex(y + dy, 9), MirrorIndex(x + dx, 7));
          }
        }
        CHECK(out.at(c, y, x) == doctest::Approx(acc).epsilon(1e-5));
      }
    }
  }
  CHECK(GaussianBlur(im, 0.0) == im);
  CHECK_THROWS_AS(GaussianBlur(im, -1.0), Error);
}

TEST_CASE("blur sigma scales with resolution") {
  CHECK(DefaultBlurSigma(64) == 8.0);
  CHECK(DefaultBlurSigma(128) == 16.0);
}

TEST_CASE("condition image composition") {
  Rng rng(6);
  ImageBuffer im = GaussianImage(32, 32, 3, rng);
  ClampInPlace(im);
  BinaryMask v(32, 32);
  for (int y = 4; y < 20; ++y) {
    for (int x = 6; x < 15; ++x) v.set(y, x);
  }
  Rng r1(9);
  const ConditionImage ci = BuildCondition(im, v, 0.3, r1);
  CHECK(ci.s_used == 0.3);
  CHECK(ci.V == v);
  double sum = 0, sq = 0;
  size_t n = 0;
  for (int c = 0; c < 3; ++c) {
    for (int y = 0; y < 32; ++y) {
      for (int x = 0; x < 32; ++x) {
        CHECK(ci.x.at(c, y, x) == (v.at(y, x) ? ci.x_obj.at(c, y, x) : ci.x_bck.at(c, y, x)));
        const double e = (ci.x_obj.at(c, y, x) - 0.7 * im.at(c, y, x)) / 0.3;
        sum += e;
        sq += e * e;
        ++n;
      }
    }
  }
  // The recovered noise is standard normal (3072 draws).
  CHECK(std::abs(sum / n) < 0.08);
  CHECK(std::sqrt(sq / n) == doctest::Approx(1.0).epsilon(0.06));

  Rng r2(9);
  const ConditionImage same = BuildCondition(im, v, 0.3, r2);
  CHECK(same.x == ci.x);

  Rng r3(9);
  const ConditionImage white = BuildCondition(im, v, 0.0, r3, BackgroundKind::kWhite);
  for (int c = 0; c < 3; ++c) {
    for (int y = 0; y < 32; ++y) {
      for (int x = 0; x < 32; ++x) {
        CHECK(white.x.at(c, y, x) == (v.at(y, x) ? im.at(c, y, x) : 1.0f));
      }
    }
  }
}

}  // namespace
}  // namespace amodal
