#include "amodal/png_io.h"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <csetjmp>
#include <cstdio>
#include <memory>

namespace amodal {
namespace {

struct FileCloser {
  void operator()(FILE* f) const {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<FILE, FileCloser>;

// Grayscale (channels 1) or RGB (channels 3) rows; bit_depth 1 or 8.
void WriteRaw(const std::string& path, int width, int height, int channels,
              int bit_depth, const std::vector<uint8_t>& packed) {
  FilePtr f(std::fopen(path.c_str(), "wb"));
  if (!f) Fail(ErrorKind::kIo, "cannot write " + path);
  png_structp png =
      png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_write_struct(&png, &info);
    Fail(ErrorKind::kIo, "libpng init failed");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    Fail(ErrorKind::kIo, "libpng failed writing " + path);
  }
  png_init_io(png, f.get());
  png_set_compression_level(png, 6);
  png_set_IHDR(png, info, width, height, bit_depth,
               channels == 3 ? PNG_COLOR_TYPE_RGB : PNG_COLOR_TYPE_GRAY,
               PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
               PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  const size_t stride = packed.size() / height;
  for (int y = 0; y < height; ++y) {
    png_write_row(png, const_cast<png_bytep>(packed.data() + y * stride));
  }
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
  if (std::fflush(f.get()) != 0) Fail(ErrorKind::kIo, "write failed: " + path);
}

struct Raw {
  int width = 0;
  int height = 0;
  int channels = 0;  // 1 or 3, 8 bits per sample after transforms
  std::vector<uint8_t> data;
};

Raw ReadRaw(const std::string& path) {
  FilePtr f(std::fopen(path.c_str(), "rb"));
  if (!f) Fail(ErrorKind::kIo, "cannot open " + path);
  unsigned char sig[8];
  if (std::fread(sig, 1, 8, f.get()) != 8 || png_sig_cmp(sig, 0, 8) != 0) {
    Fail(ErrorKind::kFormat, path + ": not a PNG file");
  }
  png_structp png =
      png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_read_struct(&png, &info, nullptr);
    Fail(ErrorKind::kIo, "libpng init failed");
  }
  Raw raw;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    Fail(ErrorKind::kFormat, path + ": corrupt PNG");
  }
  png_init_io(png, f.get());
  png_set_sig_bytes(png, 8);
  png_read_info(png, info);
  const int color = png_get_color_type(png, info);
  const int depth = png_get_bit_depth(png, info);
  if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
  if (color == PNG_COLOR_TYPE_GRAY && depth < 8) {
    png_set_expand_gray_1_2_4_to_8(png);
  }
  if (depth == 16) png_set_strip_16(png);
  if (color & PNG_COLOR_MASK_ALPHA) png_set_strip_alpha(png);
  png_read_update_info(png, info);
  raw.width = static_cast<int>(png_get_image_width(png, info));
  raw.height = static_cast<int>(png_get_image_height(png, info));
  raw.channels = png_get_channels(png, info);
  const size_t stride = png_get_rowbytes(png, info);
  raw.data.resize(stride * raw.height);
  for (int y = 0; y < raw.height; ++y) {
    png_read_row(png, raw.data.data() + y * stride, nullptr);
  }
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);
  return raw;
}

}  // namespace

uint8_t EncodeByte(float v) {
  const float c = std::clamp(v, -1.0f, 1.0f);
  return static_cast<uint8_t>(std::lround((c + 1.0f) * 127.5f));
}

float DecodeByte(uint8_t q) { return static_cast<float>(q) / 127.5f - 1.0f; }

void QuantizeInPlace(ImageBuffer& image) {
  for (float& v : image.data()) v = DecodeByte(EncodeByte(v));
}

void WritePngRgb(const std::string& path, const ImageBuffer& image) {
  Require(image.channels() == 3, ErrorKind::kShapeMismatch,
          "WritePngRgb expects 3 channels");
  const int h = image.height(), w = image.width();
  std::vector<uint8_t> packed(static_cast<size_t>(h) * w * 3);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      for (int c = 0; c < 3; ++c) {
        packed[(static_cast<size_t>(y) * w + x) * 3 + c] =
            EncodeByte(image.at(c, y, x));
      }
    }
  }
  WriteRaw(path, w, h, 3, 8, packed);
}

ImageBuffer ReadPngRgb(const std::string& path) {
  const Raw raw = ReadRaw(path);
  ImageBuffer out(raw.height, raw.width, 3);
  for (int y = 0; y < raw.height; ++y) {
    for (int x = 0; x < raw.width; ++x) {
      const size_t px = static_cast<size_t>(y) * raw.width + x;
      for (int c = 0; c < 3; ++c) {
        const uint8_t q = raw.channels == 3 ? raw.data[px * 3 + c]
                                            : raw.data[px * raw.channels];
        out.at(c, y, x) = DecodeByte(q);
      }
    }
  }
  return out;
}

void WritePngMask(const std::string& path, const BinaryMask& mask) {
  const int h = mask.height(), w = mask.width();
  const size_t stride = (static_cast<size_t>(w) + 7) / 8;
  std::vector<uint8_t> packed(stride * h, 0);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      if (mask.at(y, x)) packed[y * stride + x / 8] |= 0x80 >> (x % 8);
    }
  }
  WriteRaw(path, w, h, 1, 1, packed);
}

BinaryMask ReadPngMask(const std::string& path) {
  const Raw raw = ReadRaw(path);
  if (raw.channels != 1) Fail(ErrorKind::kFormat, path + ": mask not grayscale");
  BinaryMask out(raw.height, raw.width);
  for (int y = 0; y < raw.height; ++y) {
    for (int x = 0; x < raw.width; ++x) {
      out.set(y, x, raw.data[static_cast<size_t>(y) * raw.width + x] != 0);
    }
  }
  return out;
}

void WritePngLabels(const std::string& path, const LabelMap& map) {
  Require(map.labels.size() == static_cast<size_t>(map.height) * map.width,
          ErrorKind::kShapeMismatch, "label map size mismatch");
  WriteRaw(path, map.width, map.height, 1, 8, map.labels);
}

LabelMap ReadPngLabels(const std::string& path) {
  Raw raw = ReadRaw(path);
  if (raw.channels != 1) Fail(ErrorKind::kFormat, path + ": labels not gray");
  return {raw.height, raw.width, std::move(raw.data)};
}

}  // namespace amodal
