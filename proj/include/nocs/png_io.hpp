#pragma once

#include <csetjmp>
#include <cstdint>
#include <cstring>
#include <vector>

#include <png.h>

#include "nocs/error.hpp"

namespace nocs::png {

/// Interleaved samples, row-major. Samples hold 8- or 16-bit values.
struct RawImage {
  int width = 0;
  int height = 0;
  int channels = 0;
  int bit_depth = 0;
  std::vector<std::uint16_t> samples;
};

namespace detail {

struct ReadCursor {
  const std::uint8_t* data;
  std::size_t size;
  std::size_t offset;
};

inline void write_to_vector(png_structp png, png_bytep data, png_size_t length) {
  auto* out = static_cast<std::vector<std::uint8_t>*>(png_get_io_ptr(png));
  out->insert(out->end(), data, data + length);
}

inline void flush_noop(png_structp) {}

inline void read_from_cursor(png_structp png, png_bytep data, png_size_t length) {
  auto* cur = static_cast<ReadCursor*>(png_get_io_ptr(png));
  if (cur->offset + length > cur->size) png_error(png, "unexpected end of stream");
  std::memcpy(data, cur->data + cur->offset, length);
  cur->offset += length;
}

inline void silent_warning(png_structp, png_const_charp) {}

[[noreturn]] inline void silent_error(png_structp png, png_const_charp) { png_longjmp(png, 1); }

inline int color_type_for(int channels) {
  switch (channels) {
    case 1: return PNG_COLOR_TYPE_GRAY;
    case 2: return PNG_COLOR_TYPE_GRAY_ALPHA;
    case 3: return PNG_COLOR_TYPE_RGB;
    case 4: return PNG_COLOR_TYPE_RGB_ALPHA;
    default: return -1;
  }
}

// Only trivially destructible locals live in these frames: libpng reports
// errors through longjmp.
inline bool write_impl(const RawImage& img, const std::vector<std::uint8_t>& packed, std::vector<std::uint8_t>* out) {
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, silent_error, silent_warning);
  if (!png) return false;
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_write_struct(&png, nullptr);
    return false;
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    return false;
  }
  png_set_write_fn(png, out, write_to_vector, flush_noop);
  png_set_IHDR(png, info, static_cast<png_uint_32>(img.width), static_cast<png_uint_32>(img.height), img.bit_depth,
               color_type_for(img.channels), PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  const std::size_t stride = static_cast<std::size_t>(img.width) * img.channels * (img.bit_depth / 8);
  for (int r = 0; r < img.height; ++r)
    png_write_row(png, const_cast<png_bytep>(packed.data() + static_cast<std::size_t>(r) * stride));
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
  return true;
}

inline bool read_impl(ReadCursor* cursor, RawImage* img, std::vector<std::uint8_t>* packed) {
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, silent_error, silent_warning);
  if (!png) return false;
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_read_struct(&png, nullptr, nullptr);
    return false;
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    return false;
  }
  png_set_read_fn(png, cursor, read_from_cursor);
  png_read_info(png, info);
  const int color = png_get_color_type(png, info);
  const int depth = png_get_bit_depth(png, info);
  if (color == PNG_COLOR_TYPE_PALETTE || png_get_interlace_type(png, info) != PNG_INTERLACE_NONE ||
      (depth != 8 && depth != 16)) {
    png_destroy_read_struct(&png, &info, nullptr);
    return false;
  }
  img->width = static_cast<int>(png_get_image_width(png, info));
  img->height = static_cast<int>(png_get_image_height(png, info));
  img->channels = png_get_channels(png, info);
  img->bit_depth = depth;
  const std::size_t stride = png_get_rowbytes(png, info);
  packed->resize(stride * static_cast<std::size_t>(img->height));
  for (int r = 0; r < img->height; ++r) png_read_row(png, packed->data() + static_cast<std::size_t>(r) * stride, nullptr);
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);
  return true;
}

}  // namespace detail

inline std::vector<std::uint8_t> encode(const RawImage& img) {
  if (detail::color_type_for(img.channels) < 0 || (img.bit_depth != 8 && img.bit_depth != 16) || img.width <= 0 ||
      img.height <= 0 ||
      img.samples.size() != static_cast<std::size_t>(img.width) * img.height * img.channels)
    fail(ErrorCode::DimensionMismatch, "raw image layout is inconsistent");
  std::vector<std::uint8_t> packed;
  packed.reserve(img.samples.size() * (img.bit_depth / 8));
  for (std::uint16_t s : img.samples) {
    if (img.bit_depth == 16) {
      packed.push_back(static_cast<std::uint8_t>(s >> 8));
      packed.push_back(static_cast<std::uint8_t>(s & 0xff));
    } else {
      packed.push_back(static_cast<std::uint8_t>(s));
    }
  }
  std::vector<std::uint8_t> out;
  if (!detail::write_impl(img, packed, &out)) fail(ErrorCode::IoFailure, "png encoding failed");
  return out;
}

inline RawImage decode(const std::vector<std::uint8_t>& bytes) {
  if (bytes.size() < 8 || png_sig_cmp(bytes.data(), 0, 8) != 0) fail(ErrorCode::CorruptStream, "not a png stream");
  detail::ReadCursor cursor{bytes.data(), bytes.size(), 0};
  RawImage img;
  std::vector<std::uint8_t> packed;
  if (!detail::read_impl(&cursor, &img, &packed)) fail(ErrorCode::CorruptStream, "png stream could not be decoded");
  const std::size_t n = static_cast<std::size_t>(img.width) * img.height * img.channels;
  img.samples.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    img.samples[i] = img.bit_depth == 16
                         ? static_cast<std::uint16_t>((packed[2 * i] << 8) | packed[2 * i + 1])
                         : packed[i];
  }
  return img;
}

}  // namespace nocs::png
