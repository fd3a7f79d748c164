#ifndef AMODAL_IMAGE_H_
#define AMODAL_IMAGE_H_

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "amodal/error.h"

namespace amodal {

// Planar (channel-major) float raster. Pixel values live in [-1, 1] for
// images; intermediate noise buffers may exceed that range.
class ImageBuffer {
 public:
  ImageBuffer() = default;
  ImageBuffer(int height, int width, int channels, float fill = 0.0f);

  int height() const { return height_; }
  int width() const { return width_; }
  int channels() const { return channels_; }
  size_t size() const { return data_.size(); }
  size_t plane_size() const {
    return static_cast<size_t>(height_) * static_cast<size_t>(width_);
  }
  bool empty() const { return data_.empty(); }

  float& at(int c, int y, int x) { return data_[index(c, y, x)]; }
  float at(int c, int y, int x) const { return data_[index(c, y, x)]; }

  std::span<float> data() { return data_; }
  std::span<const float> data() const { return data_; }
  std::span<float> plane(int c) {
    return std::span<float>(data_).subspan(c * plane_size(), plane_size());
  }
  std::span<const float> plane(int c) const {
    return std::span<const float>(data_).subspan(c * plane_size(),
                                                 plane_size());
  }

  bool SameShape(const ImageBuffer& other) const {
    return height_ == other.height_ && width_ == other.width_ &&
           channels_ == other.channels_;
  }
  bool operator==(const ImageBuffer& other) const = default;

 private:
  size_t index(int c, int y, int x) const {
    return (static_cast<size_t>(c) * height_ + y) * width_ + x;
  }

  int height_ = 0;
  int width_ = 0;
  int channels_ = 0;
  std::vector<float> data_;
};

// H x W raster of {0, 1}.
class BinaryMask {
 public:
  BinaryMask() = default;
  BinaryMask(int height, int width, bool fill = false);

  int height() const { return height_; }
  int width() const { return width_; }
  size_t size() const { return data_.size(); }

  bool at(int y, int x) const { return data_[index(y, x)] != 0; }
  void set(int y, int x, bool value = true) {
    data_[index(y, x)] = value ? 1 : 0;
  }
  bool in_bounds(int y, int x) const {
    return y >= 0 && y < height_ && x >= 0 && x < width_;
  }

  std::span<const uint8_t> data() const { return data_; }
  std::span<uint8_t> data() { return data_; }

  size_t Count() const;
  bool Empty() const { return Count() == 0; }
  bool SameShape(const BinaryMask& other) const {
    return height_ == other.height_ && width_ == other.width_;
  }
  // True iff every set pixel of this mask is set in `other`.
  bool IsSubsetOf(const BinaryMask& other) const;

  BinaryMask Union(const BinaryMask& other) const;
  BinaryMask Intersect(const BinaryMask& other) const;
  BinaryMask Minus(const BinaryMask& other) const;

  bool operator==(const BinaryMask& other) const = default;

 private:
  size_t index(int y, int x) const {
    return static_cast<size_t>(y) * width_ + x;
  }

  int height_ = 0;
  int width_ = 0;
  std::vector<uint8_t> data_;
};

void RequireSameShape(const ImageBuffer& a, const ImageBuffer& b,
                      const char* what);
void RequireSameShape(const BinaryMask& a, const BinaryMask& b,
                      const char* what);
void RequireSameResolution(const ImageBuffer& a, const BinaryMask& b,
                           const char* what);

void ClampInPlace(ImageBuffer& image, float lo = -1.0f, float hi = 1.0f);
bool AllFinite(const ImageBuffer& image);

}  // namespace amodal

#endif  // AMODAL_IMAGE_H_
