#include "amodal/image.h"

#include <algorithm>
#include <cmath>
#include <string>

namespace amodal {

ImageBuffer::ImageBuffer(int height, int width, int channels, float fill)
    : height_(height), width_(width), channels_(channels) {
  Require(height > 0 && width > 0 && channels > 0,
          ErrorKind::kInvalidArgument, "image dimensions must be positive");
  data_.assign(static_cast<size_t>(height) * width * channels, fill);
}

BinaryMask::BinaryMask(int height, int width, bool fill)
    : height_(height), width_(width) {
  Require(height > 0 && width > 0, ErrorKind::kInvalidArgument,
          "mask dimensions must be positive");
  data_.assign(static_cast<size_t>(height) * width, fill ? 1 : 0);
}

size_t BinaryMask::Count() const {
  return static_cast<size_t>(std::count(data_.begin(), data_.end(), 1));
}

bool BinaryMask::IsSubsetOf(const BinaryMask& other) const {
  RequireSameShape(*this, other, "IsSubsetOf");
  for (size_t i = 0; i < data_.size(); ++i) {
    if (data_[i] && !other.data_[i]) return false;
  }
  return true;
}

BinaryMask BinaryMask::Union(const BinaryMask& other) const {
  RequireSameShape(*this, other, "Union");
  BinaryMask out = *this;
  for (size_t i = 0; i < data_.size(); ++i) out.data_[i] |= other.data_[i];
  return out;
}

BinaryMask BinaryMask::Intersect(const BinaryMask& other) const {
  RequireSameShape(*this, other, "Intersect");
  BinaryMask out = *this;
  for (size_t i = 0; i < data_.size(); ++i) out.data_[i] &= other.data_[i];
  return out;
}

BinaryMask BinaryMask::Minus(const BinaryMask& other) const {
  RequireSameShape(*this, other, "Minus");
  BinaryMask out = *this;
  for (size_t i = 0; i < data_.size(); ++i) {
    out.data_[i] = data_[i] && !other.data_[i];
  }
  return out;
}

void RequireSameShape(const ImageBuffer& a, const ImageBuffer& b,
                      const char* what) {
  if (!a.SameShape(b)) {
    Fail(ErrorKind::kShapeMismatch,
         std::string(what) + ": image shapes differ");
  }
}

void RequireSameShape(const BinaryMask& a, const BinaryMask& b,
                      const char* what) {
  if (!a.SameShape(b)) {
    Fail(ErrorKind::kShapeMismatch, std::string(what) + ": mask shapes differ");
  }
}

void RequireSameResolution(const ImageBuffer& a, const BinaryMask& b,
                           const char* what) {
  if (a.height() != b.height() || a.width() != b.width()) {
    Fail(ErrorKind::kShapeMismatch,
         std::string(what) + ": image and mask resolution differ");
  }
}

void ClampInPlace(ImageBuffer& image, float lo, float hi) {
  for (float& v : image.data()) v = std::clamp(v, lo, hi);
}

bool AllFinite(const ImageBuffer& image) {
  for (float v : image.data()) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

}  // namespace amodal
