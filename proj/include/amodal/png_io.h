#ifndef AMODAL_PNG_IO_H_
#define AMODAL_PNG_IO_H_

#include <cstdint>
#include <string>
#include <vector>

#include "amodal/image.h"

namespace amodal {

// [-1, 1] float <-> 8-bit code q with v = q / 127.5 - 1.
uint8_t EncodeByte(float v);
float DecodeByte(uint8_t q);

// Rounds every value onto the 8-bit grid so PNG round trips are lossless.
void QuantizeInPlace(ImageBuffer& image);

// RGB images as 8-bit PNG; the input is clamped to [-1, 1].
void WritePngRgb(const std::string& path, const ImageBuffer& image);
ImageBuffer ReadPngRgb(const std::string& path);

// Masks as 1-bit grayscale PNG. Reading accepts any grayscale depth and maps
// non-zero samples to 1.
void WritePngMask(const std::string& path, const BinaryMask& mask);
BinaryMask ReadPngMask(const std::string& path);

// 8-bit grayscale label map (0 = background).
struct LabelMap {
  int height = 0;
  int width = 0;
  std::vector<uint8_t> labels;
};
void WritePngLabels(const std::string& path, const LabelMap& map);
LabelMap ReadPngLabels(const std::string& path);

}  // namespace amodal

#endif  // AMODAL_PNG_IO_H_
