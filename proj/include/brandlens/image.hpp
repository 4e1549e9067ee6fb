#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace brandlens {

// 8-bit RGB raster, row-major, three bytes per pixel.
struct Image {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> rgb;

  Image() = default;
  Image(int w, int h, std::uint8_t r = 0, std::uint8_t g = 0, std::uint8_t b = 0);

  [[nodiscard]] bool empty() const { return width <= 0 || height <= 0; }
  [[nodiscard]] std::size_t pixel_count() const {
    return static_cast<std::size_t>(width) * static_cast<std::size_t>(height);
  }

  void set(int x, int y, std::uint8_t r, std::uint8_t g, std::uint8_t b);
  void fill_rect(int x0, int y0, int x1, int y1, std::uint8_t r, std::uint8_t g,
                 std::uint8_t b);
  [[nodiscard]] const std::uint8_t* at(int x, int y) const {
    return rgb.data() + (static_cast<std::size_t>(y) * width + x) * 3;
  }

  friend bool operator==(const Image&, const Image&) = default;
};

class ImageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

Image decode_png(std::string_view png_bytes);
std::string encode_png(const Image& image);

// A screenshot as captured: the decoded raster plus the exact encoded bytes,
// which are what gets attached to model requests.
struct Screenshot {
  Image image;
  std::string png;
  std::string media_type = "image/png";

  static Screenshot from_image(Image image);
  static Screenshot from_png(std::string png_bytes);

  friend bool operator==(const Screenshot&, const Screenshot&) = default;
};

}  // namespace brandlens
