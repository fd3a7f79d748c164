#include "amodal/conditioning.h"

#include <algorithm>
#include <array>
#include <cmath>
#include <map>
#include <vector>

namespace amodal {

ImageBuffer NoiseObject(const ImageBuffer& image, double s,
                        const ImageBuffer& eps) {
  RequireSameShape(image, eps, "NoiseObject");
  Require(s >= 0.0 && s <= 1.0, ErrorKind::kInvalidArgument,
          "NoiseObject: s must lie in [0, 1]");
  ImageBuffer out(image.height(), image.width(), image.channels());
  const float sf = static_cast<float>(s), keep = static_cast<float>(1.0 - s);
  auto o = out.data();
  auto in = image.data();
  auto e = eps.data();
  for (size_t i = 0; i < o.size(); ++i) o[i] = sf * e[i] + keep * in[i];
  return out;
}

int HistogramBin(float v, int bins) {
  const int b = static_cast<int>(std::floor((v + 1.0f) * 0.5f * bins));
  return std::clamp(b, 0, bins - 1);
}

float BinCenter(int bin, int bins) {
  return -1.0f + (2.0f * bin + 1.0f) / static_cast<float>(bins);
}

ImageBuffer SampleHistogramField(const ImageBuffer& image, const BinaryMask& v,
                                 int bins, Rng& rng) {
  RequireSameResolution(image, v, "SampleHistogramField");
  Require(image.channels() == 3, ErrorKind::kShapeMismatch,
          "histogram background needs an RGB image");
  Require(bins >= 2, ErrorKind::kInvalidArgument,
          "bins_per_channel must be >= 2");
  if (v.Empty()) Fail(ErrorKind::kInvalidArgument, "no visible pixels");

  std::map<int, double> counts;  // ordered, so sampling is deterministic
  std::array<float, 3> lo{1e9f, 1e9f, 1e9f}, hi{-1e9f, -1e9f, -1e9f};
  for (int y = 0; y < image.height(); ++y) {
    for (int x = 0; x < image.width(); ++x) {
      if (!v.at(y, x)) continue;
      int cell = 0;
      for (int c = 0; c < 3; ++c) {
        const float val = image.at(c, y, x);
        lo[c] = std::min(lo[c], val);
        hi[c] = std::max(hi[c], val);
        cell = cell * bins + HistogramBin(val, bins);
      }
      counts[cell] += 1.0;
    }
  }
  std::vector<int> cells;
  std::vector<double> weights;
  for (const auto& [cell, n] : counts) {
    cells.push_back(cell);
    weights.push_back(n);
  }
  std::vector<std::array<float, 3>> colors;
  for (int cell : cells) {
    std::array<float, 3> col;
    int rest = cell;
    for (int c = 2; c >= 0; --c) {
      col[c] = std::clamp(BinCenter(rest % bins, bins), lo[c], hi[c]);
      rest /= bins;
    }
    colors.push_back(col);
  }
  std::discrete_distribution<int> pick(weights.begin(), weights.end());
  ImageBuffer out(image.height(), image.width(), 3);
  for (int y = 0; y < image.height(); ++y) {
    for (int x = 0; x < image.width(); ++x) {
      const auto& col = colors[pick(rng)];
      for (int c = 0; c < 3; ++c) out.at(c, y, x) = col[c];
    }
  }
  return out;
}

namespace {

// Symmetric reflection: ... b a | a b c ... z | z y ...
int Reflect(int i, int n) {
  const int period = 2 * n;
  i %= period;
  if (i < 0) i += period;
  return i < n ? i : period - 1 - i;
}

}  // namespace

ImageBuffer GaussianBlur(const ImageBuffer& image, double sigma) {
  Require(sigma >= 0.0, ErrorKind::kInvalidArgument,
          "blur sigma must be non-negative");
  if (sigma == 0.0) return image;
  const int radius = static_cast<int>(std::ceil(3.0 * sigma));
  std::vector<double> kernel(2 * radius + 1);
  double total = 0.0;
  for (int k = -radius; k <= radius; ++k) {
    kernel[k + radius] = std::exp(-0.5 * k * k / (sigma * sigma));
    total += kernel[k + radius];
  }
  for (double& k : kernel) k /= total;

  const int h = image.height(), w = image.width();
  ImageBuffer tmp(h, w, image.channels()), out(h, w, image.channels());
  for (int c = 0; c < image.channels(); ++c) {
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        double acc = 0.0;
        for (int k = -radius; k <= radius; ++k) {
          acc += kernel[k + radius] * image.at(c, y, Reflect(x + k, w));
        }
        tmp.at(c, y, x) = static_cast<float>(acc);
      }
    }
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        double acc = 0.0;
        for (int k = -radius; k <= radius; ++k) {
          acc += kernel[k + radius] * tmp.at(c, Reflect(y + k, h), x);
        }
        out.at(c, y, x) = static_cast<float>(acc);
      }
    }
  }
  return out;
}

ImageBuffer HistogramBackground(const ImageBuffer& image, const BinaryMask& v,
                                int bins, double blur_sigma, Rng& rng) {
  Require(blur_sigma >= 0.0, ErrorKind::kInvalidArgument,
          "blur sigma must be non-negative");
  return GaussianBlur(SampleHistogramField(image, v, bins, rng), blur_sigma);
}

ImageBuffer WhiteBackground(int height, int width) {
  return ImageBuffer(height, width, 3, 1.0f);
}

double DefaultBlurSigma(int width) { return kBlurSigmaAt64 * width / 64.0; }

ImageBuffer Compose(const ImageBuffer& x_obj, const ImageBuffer& x_bck,
                    const BinaryMask& v) {
  RequireSameShape(x_obj, x_bck, "Compose");
  RequireSameResolution(x_obj, v, "Compose");
  ImageBuffer x(x_obj.height(), x_obj.width(), x_obj.channels());
  const auto bits = v.data();
  const size_t plane = x.plane_size();
  for (int c = 0; c < x.channels(); ++c) {
    auto o = x.plane(c);
    auto a = x_obj.plane(c);
    auto b = x_bck.plane(c);
    for (size_t i = 0; i < plane; ++i) o[i] = bits[i] ? a[i] : b[i];
  }
  return x;
}

ConditionImage BuildCondition(const ImageBuffer& image, const BinaryMask& v,
                              double s, Rng& rng, BackgroundKind background) {
  RequireSameResolution(image, v, "BuildCondition");
  ConditionImage ci;
  ci.V = v;
  ci.s_used = s;
  const ImageBuffer eps =
      GaussianImage(image.height(), image.width(), image.channels(), rng);
  ci.x_obj = NoiseObject(image, s, eps);
  ci.x_bck = background == BackgroundKind::kWhite
                 ? WhiteBackground(image.height(), image.width())
                 : HistogramBackground(image, v, kHistogramBins,
                                       DefaultBlurSigma(image.width()), rng);
  ci.x = Compose(ci.x_obj, ci.x_bck, v);
  return ci;
}

}  // namespace amodal
