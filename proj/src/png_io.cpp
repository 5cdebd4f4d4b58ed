#include <png.h>

#include <cmath>
#include <cstdio>
#include <memory>

#include "threer/image.hpp"

namespace threer {

namespace {

struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

[[noreturn]] void fail_read(png_structp png, png_infop info, const std::string& msg) {
  png_destroy_read_struct(&png, &info, nullptr);
  throw IoError(msg);
}

}  // namespace

Image Image::create(int width, int height, float fill) {
  if (width <= 0 || height <= 0) throw ShapeError("image: non-positive dimensions");
  Image img;
  img.width = width;
  img.height = height;
  img.data.assign(3 * static_cast<size_t>(width) * height, fill);
  return img;
}

Image load_png(const std::string& path) {
  FilePtr f(std::fopen(path.c_str(), "rb"));
  if (!f) throw IoError("cannot open " + path);

  png_byte header[8];
  if (std::fread(header, 1, 8, f.get()) != 8 || png_sig_cmp(header, 0, 8) != 0) {
    throw IoError(path + ": not a PNG file");
  }

  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!png) throw IoError("libpng init failed");
  png_infop info = png_create_info_struct(png);
  if (!info) fail_read(png, nullptr, "libpng init failed");
  if (setjmp(png_jmpbuf(png))) fail_read(png, info, path + ": PNG decode error");

  png_init_io(png, f.get());
  png_set_sig_bytes(png, 8);
  png_read_info(png, info);

  const int color = png_get_color_type(png, info);
  const int depth = png_get_bit_depth(png, info);
  if (color != PNG_COLOR_TYPE_RGB || (depth != 8 && depth != 16)) {
    fail_read(png, info, path + ": unsupported color type (need 8- or 16-bit RGB)");
  }
  if (depth == 16) png_set_swap(png);  // libpng hands 16-bit rows big-endian

  const int w = static_cast<int>(png_get_image_width(png, info));
  const int h = static_cast<int>(png_get_image_height(png, info));
  png_read_update_info(png, info);

  const size_t row_bytes = png_get_rowbytes(png, info);
  std::vector<png_byte> raw(row_bytes * static_cast<size_t>(h));
  std::vector<png_bytep> rows(static_cast<size_t>(h));
  for (int y = 0; y < h; ++y) rows[y] = raw.data() + row_bytes * static_cast<size_t>(y);
  png_read_image(png, rows.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);

  Image img = Image::create(w, h);
  if (depth == 8) {
    for (int y = 0; y < h; ++y) {
      const png_byte* row = raw.data() + row_bytes * static_cast<size_t>(y);
      for (int x = 0; x < w; ++x) {
        for (int c = 0; c < 3; ++c) {
          img.at(c, y, x) = static_cast<float>(row[3 * x + c]) / 255.0f;
        }
      }
    }
  } else {
    for (int y = 0; y < h; ++y) {
      const auto* row = reinterpret_cast<const std::uint16_t*>(raw.data() + row_bytes * y);
      for (int x = 0; x < w; ++x) {
        for (int c = 0; c < 3; ++c) {
          img.at(c, y, x) = static_cast<float>(row[3 * x + c]) / 65535.0f;
        }
      }
    }
  }
  return img;
}

void save_png(const Image& img, const std::string& path) {
  if (img.width <= 0 || img.height <= 0 ||
      img.data.size() != 3 * static_cast<size_t>(img.width) * img.height) {
    throw ShapeError("save_png: malformed image");
  }
  FilePtr f(std::fopen(path.c_str(), "wb"));
  if (!f) throw IoError("cannot write " + path);

  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!png) throw IoError("libpng init failed");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_write_struct(&png, nullptr);
    throw IoError("libpng init failed");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw IoError(path + ": PNG encode error");
  }

  png_init_io(png, f.get());
  png_set_IHDR(png, info, img.width, img.height, 8, PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE,
               PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);

  std::vector<png_byte> row(3 * static_cast<size_t>(img.width));
  for (int y = 0; y < img.height; ++y) {
    for (int x = 0; x < img.width; ++x) {
      for (int c = 0; c < 3; ++c) {
        // round-half-away-from-zero; values are already inside [0,1]
        const float v = std::min(1.0f, std::max(0.0f, img.at(c, y, x)));
        row[3 * x + c] = static_cast<png_byte>(std::floor(v * 255.0f + 0.5f));
      }
    }
    png_write_row(png, row.data());
  }
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

}  // namespace threer
