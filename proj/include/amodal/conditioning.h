#ifndef AMODAL_CONDITIONING_H_
#define AMODAL_CONDITIONING_H_

#include "amodal/image.h"
#include "amodal/rng.h"

namespace amodal {

enum class BackgroundKind { kHistogram, kWhite };

struct ConditionImage {
  ImageBuffer x;      // V * x_obj + (1 - V) * x_bck
  ImageBuffer x_obj;  // noised object
  ImageBuffer x_bck;  // background field
  BinaryMask V;
  double s_used = 0.0;
};

// s * eps + (1 - s) * I, elementwise.
ImageBuffer NoiseObject(const ImageBuffer& image, double s,
                        const ImageBuffer& eps);

inline constexpr int kHistogramBins = 16;
inline constexpr double kBlurSigmaAt64 = 8.0;

// Joint RGB histogram of the visible pixels; bin b of a channel covers
// [-1 + 2b/bins, -1 + 2(b+1)/bins), the last bin closed at 1.
int HistogramBin(float v, int bins);
float BinCenter(int bin, int bins);

// Background field before blurring: every pixel is an independent draw of a
// histogram cell (proportional to its count) mapped to the cell-centre
// colour, clamped per channel to the visible pixels' range.
ImageBuffer SampleHistogramField(const ImageBuffer& image, const BinaryMask& v,
                                 int bins, Rng& rng);

// Separable Gaussian blur, per channel, with symmetric (edge-duplicating)
// reflection at the borders. sigma 0 returns the input.
ImageBuffer GaussianBlur(const ImageBuffer& image, double sigma);

// Histogram-sampled field followed by the blur.
ImageBuffer HistogramBackground(const ImageBuffer& image, const BinaryMask& v,
                                int bins, double blur_sigma, Rng& rng);

// Constant maximum-value field (the white-background ablation).
ImageBuffer WhiteBackground(int height, int width);

// Blur sigma for a given resolution (8 px at 64 px, proportional otherwise).
double DefaultBlurSigma(int width);

// x = V * x_obj + (1 - V) * x_bck with x_obj = NoiseObject(I, s, eps).
ConditionImage BuildCondition(const ImageBuffer& image, const BinaryMask& v,
                              double s, Rng& rng,
                              BackgroundKind background = BackgroundKind::kHistogram);

// Recomposes x from stored components.
ImageBuffer Compose(const ImageBuffer& x_obj, const ImageBuffer& x_bck,
                    const BinaryMask& v);

}  // namespace amodal

#endif  // AMODAL_CONDITIONING_H_
