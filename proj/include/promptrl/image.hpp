#pragma once

#include <compare>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "promptrl/error.hpp"

namespace promptrl {

// Row-major 2D grid. The base for images, masks and per-pixel maps.
template <class T>
class Grid {
 public:
  Grid() = default;
  Grid(int width, int height, T fill = T{})
      : width_(width), height_(height), values_(checked_size(width, height), fill) {}
  Grid(int width, int height, std::vector<T> values)
      : width_(width), height_(height), values_(std::move(values)) {
    if (values_.size() != checked_size(width, height)) {
      throw Error(ErrorCode::ShapeMismatch, "grid value count does not match dimensions");
    }
  }

  int width() const noexcept { return width_; }
  int height() const noexcept { return height_; }
  std::size_t size() const noexcept { return values_.size(); }

  bool contains(int x, int y) const noexcept {
    return x >= 0 && y >= 0 && x < width_ && y < height_;
  }
  std::size_t index(int x, int y) const noexcept {
    return static_cast<std::size_t>(y) * static_cast<std::size_t>(width_) +
           static_cast<std::size_t>(x);
  }

  T& operator()(int x, int y) { return values_[index(x, y)]; }
  const T& operator()(int x, int y) const { return values_[index(x, y)]; }
  T& operator[](std::size_t i) { return values_[i]; }
  const T& operator[](std::size_t i) const { return values_[i]; }

  std::span<T> values() noexcept { return values_; }
  std::span<const T> values() const noexcept { return values_; }

  bool same_shape(const Grid& other) const noexcept {
    return width_ == other.width_ && height_ == other.height_;
  }
  template <class U>
  bool same_shape(const Grid<U>& other) const noexcept {
    return width_ == other.width() && height_ == other.height();
  }

  bool operator==(const Grid&) const = default;

 private:
  static std::size_t checked_size(int width, int height) {
    if (width <= 0 || height <= 0) {
      throw Error(ErrorCode::ShapeMismatch, "grid dimensions must be positive");
    }
    return static_cast<std::size_t>(width) * static_cast<std::size_t>(height);
  }

  int width_ = 0;
  int height_ = 0;
  std::vector<T> values_;
};

using ScalarMap = Grid<double>;

struct Pixel {
  int x = 0;
  int y = 0;
  auto operator<=>(const Pixel&) const = default;
};

// Millimetres per pixel along each axis.
struct Spacing {
  double sx = 1.0;
  double sy = 1.0;
  bool operator==(const Spacing&) const = default;
};

// Binary mask; stored values are 0 or 1.
class Mask : public Grid<std::uint8_t> {
 public:
  using Grid::Grid;
  Mask() = default;
  explicit Mask(Grid<std::uint8_t> g) : Grid(std::move(g)) {}

  bool test(int x, int y) const { return (*this)(x, y) != 0; }
  void set(int x, int y, bool on = true) { (*this)(x, y) = on ? 1 : 0; }
  std::size_t count() const;
  bool empty() const { return count() == 0; }
  std::vector<Pixel> pixels() const;  // foreground, row-major
};

// Grayscale image, intensities normalised to [0, 1].
class Image2D {
 public:
  static constexpr int kMinSide = 8;

  Image2D(int width, int height, std::vector<float> intensities, Spacing spacing = {});

  int width() const noexcept { return pixels_.width(); }
  int height() const noexcept { return pixels_.height(); }
  Spacing spacing() const noexcept { return spacing_; }
  float operator()(int x, int y) const { return pixels_(x, y); }
  std::span<const float> values() const noexcept { return pixels_.values(); }
  const Grid<float>& grid() const noexcept { return pixels_; }

  bool operator==(const Image2D&) const = default;

 private:
  Grid<float> pixels_;
  Spacing spacing_;
};

enum class Polarity { Positive, Negative };

struct PromptPoint {
  int x = 0;
  int y = 0;
  Polarity polarity = Polarity::Positive;
  bool operator==(const PromptPoint&) const = default;
};

// Ordered interaction sequence; rejects duplicate (x, y, polarity) entries.
class PromptSet {
 public:
  PromptSet() = default;
  PromptSet(std::initializer_list<PromptPoint> points);

  void add(const PromptPoint& p);
  bool contains(const PromptPoint& p) const;

  std::size_t size() const noexcept { return points_.size(); }
  bool empty() const noexcept { return points_.empty(); }
  const PromptPoint& operator[](std::size_t i) const { return points_[i]; }
  auto begin() const { return points_.begin(); }
  auto end() const { return points_.end(); }
  std::span<const PromptPoint> points() const noexcept { return points_; }

  bool operator==(const PromptSet&) const = default;

 private:
  std::vector<PromptPoint> points_;
};

struct LabeledCase {
  std::string id;
  Image2D image;
  Mask truth;
  std::string dataset_tag;

  // Throws CorruptCase when the truth is empty or mis-sized.
  void validate() const;
  bool operator==(const LabeledCase&) const = default;
};

}  // namespace promptrl
