#include "mlfield/common/png.hpp"

#include <png.h>

#include <csetjmp>
#include <cstring>
#include <string>

#include "mlfield/common/error.hpp"

namespace mlfield {
namespace {

struct WriteState {
  std::vector<std::uint8_t>* out;
};

void write_cb(png_structp png, png_bytep data, png_size_t len) {
  auto* state = static_cast<WriteState*>(png_get_io_ptr(png));
  state->out->insert(state->out->end(), data, data + len);
}

void flush_cb(png_structp) {}

struct ReadState {
  std::span<const std::uint8_t> bytes;
  std::size_t pos = 0;
};

void read_cb(png_structp png, png_bytep data, png_size_t len) {
  auto* state = static_cast<ReadState*>(png_get_io_ptr(png));
  if (state->bytes.size() - state->pos < len) png_error(png, "truncated PNG");
  std::memcpy(data, state->bytes.data() + state->pos, len);
  state->pos += len;
}

void error_cb(png_structp png, png_const_charp msg) {
  auto* message = static_cast<std::string*>(png_get_error_ptr(png));
  *message = msg;
  png_longjmp(png, 1);
}

void warning_cb(png_structp, png_const_charp) {}

std::vector<std::uint8_t> write_rows(int width, int height, int bit_depth, int color_type,
                                     const std::vector<std::vector<std::uint8_t>>& rows) {
  std::vector<std::uint8_t> out;
  std::string message;
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, &message, error_cb, warning_cb);
  if (!png) throw Error("png_create_write_struct failed");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_write_struct(&png, nullptr);
    throw Error("png_create_info_struct failed");
  }
  WriteState state{&out};
  std::vector<png_bytep> row_ptrs(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) row_ptrs[i] = const_cast<png_bytep>(rows[i].data());

  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw Error("PNG encode failed: " + message);
  }
  png_set_write_fn(png, &state, write_cb, flush_cb);
  png_set_IHDR(png, info, static_cast<png_uint_32>(width), static_cast<png_uint_32>(height), bit_depth,
               color_type, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  png_write_image(png, row_ptrs.data());
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
  return out;
}

}  // namespace

std::vector<std::uint8_t> encode_png(const Image8& image) {
  int color_type = 0;
  switch (image.channels) {
    case 1: color_type = PNG_COLOR_TYPE_GRAY; break;
    case 3: color_type = PNG_COLOR_TYPE_RGB; break;
    case 4: color_type = PNG_COLOR_TYPE_RGBA; break;
    default: throw InvalidInput("unsupported channel count " + std::to_string(image.channels));
  }
  const std::size_t stride = static_cast<std::size_t>(image.width) * image.channels;
  if (image.data.size() != stride * static_cast<std::size_t>(image.height))
    throw InvalidInput("image buffer size does not match dimensions");
  std::vector<std::vector<std::uint8_t>> rows(image.height);
  for (int y = 0; y < image.height; ++y)
    rows[y].assign(image.data.begin() + y * stride, image.data.begin() + (y + 1) * stride);
  return write_rows(image.width, image.height, 8, color_type, rows);
}

std::vector<std::uint8_t> encode_mask_png(const BinaryRaster& mask) {
  const int w = mask.width();
  std::vector<std::vector<std::uint8_t>> rows(mask.height(), std::vector<std::uint8_t>((w + 7) / 8, 0));
  for (int y = 0; y < mask.height(); ++y)
    for (int x = 0; x < w; ++x)
      if (mask(x, y)) rows[y][x / 8] |= static_cast<std::uint8_t>(0x80u >> (x % 8));
  return write_rows(w, mask.height(), 1, PNG_COLOR_TYPE_GRAY, rows);
}

Image8 decode_png(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 8 || png_sig_cmp(bytes.data(), 0, 8) != 0) throw FormatError("not a PNG stream");
  std::string message;
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, &message, error_cb, warning_cb);
  if (!png) throw Error("png_create_read_struct failed");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_read_struct(&png, nullptr, nullptr);
    throw Error("png_create_info_struct failed");
  }
  ReadState state{bytes, 0};
  Image8 image;
  std::vector<png_bytep> row_ptrs;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw FormatError("PNG decode failed: " + message);
  }
  png_set_read_fn(png, &state, read_cb);
  png_read_info(png, info);
  png_set_expand(png);  // palette -> RGB, gray < 8 bit -> 8 bit, tRNS -> alpha
  png_set_strip_16(png);
  png_read_update_info(png, info);
  image.width = static_cast<int>(png_get_image_width(png, info));
  image.height = static_cast<int>(png_get_image_height(png, info));
  image.channels = png_get_channels(png, info);
  const std::size_t stride = png_get_rowbytes(png, info);
  image.data.resize(stride * image.height);
  row_ptrs.resize(image.height);
  for (int y = 0; y < image.height; ++y) row_ptrs[y] = image.data.data() + y * stride;
  png_read_image(png, row_ptrs.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);
  return image;
}

}  // namespace mlfield
