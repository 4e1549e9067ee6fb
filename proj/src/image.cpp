#include "brandlens/image.hpp"

#include <png.h>

#include <algorithm>
#include <cstring>

namespace brandlens {

Image::Image(int w, int h, std::uint8_t r, std::uint8_t g, std::uint8_t b)
    : width(w), height(h) {
  if (w < 0 || h < 0) throw ImageError("negative image dimensions");
  rgb.resize(pixel_count() * 3);
  for (std::size_t i = 0; i < pixel_count(); ++i) {
    rgb[i * 3] = r;
    rgb[i * 3 + 1] = g;
    rgb[i * 3 + 2] = b;
  }
}

void Image::set(int x, int y, std::uint8_t r, std::uint8_t g, std::uint8_t b) {
  auto* p = rgb.data() + (static_cast<std::size_t>(y) * width + x) * 3;
  p[0] = r;
  p[1] = g;
  p[2] = b;
}

void Image::fill_rect(int x0, int y0, int x1, int y1, std::uint8_t r, std::uint8_t g,
                      std::uint8_t b) {
  x0 = std::clamp(x0, 0, width);
  x1 = std::clamp(x1, 0, width);
  y0 = std::clamp(y0, 0, height);
  y1 = std::clamp(y1, 0, height);
  for (int y = y0; y < y1; ++y) {
    for (int x = x0; x < x1; ++x) set(x, y, r, g, b);
  }
}

Image decode_png(std::string_view png_bytes) {
  png_image img;
  std::memset(&img, 0, sizeof img);
  img.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_memory(&img, png_bytes.data(), png_bytes.size())) {
    throw ImageError(std::string("png decode: ") + img.message);
  }
  img.format = PNG_FORMAT_RGB;
  if (img.width == 0 || img.height == 0) {
    png_image_free(&img);
    throw ImageError("png decode: zero-sized image");
  }
  Image out;
  out.width = static_cast<int>(img.width);
  out.height = static_cast<int>(img.height);
  out.rgb.resize(PNG_IMAGE_SIZE(img));
  if (!png_image_finish_read(&img, nullptr, out.rgb.data(), 0, nullptr)) {
    std::string msg = img.message;
    png_image_free(&img);
    throw ImageError("png decode: " + msg);
  }
  return out;
}

std::string encode_png(const Image& image) {
  if (image.empty()) throw ImageError("png encode: empty image");
  png_image img;
  std::memset(&img, 0, sizeof img);
  img.version = PNG_IMAGE_VERSION;
  img.width = static_cast<png_uint_32>(image.width);
  img.height = static_cast<png_uint_32>(image.height);
  img.format = PNG_FORMAT_RGB;
  png_alloc_size_t size = 0;
  if (!png_image_write_get_memory_size(img, size, 0, image.rgb.data(), 0, nullptr)) {
    throw ImageError(std::string("png encode: ") + img.message);
  }
  std::string out(size, '\0');
  if (!png_image_write_to_memory(&img, out.data(), &size, 0, image.rgb.data(), 0, nullptr)) {
    throw ImageError(std::string("png encode: ") + img.message);
  }
  out.resize(size);
  return out;
}

Screenshot Screenshot::from_image(Image image) {
  Screenshot s;
  s.png = encode_png(image);
  s.image = std::move(image);
  return s;
}

Screenshot Screenshot::from_png(std::string png_bytes) {
  Screenshot s;
  s.image = decode_png(png_bytes);
  s.png = std::move(png_bytes);
  return s;
}

}  // namespace brandlens
