#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "nocs/error.hpp"
#include "nocs/geometry.hpp"

namespace nocs {

/// Row-major H x W image of T.
template <typename T>
class Grid {
 public:
  Grid() = default;
  Grid(int width, int height, const T& fill = T{})
      : width_(width), height_(height), data_(static_cast<std::size_t>(width) * height, fill) {
    if (width < 0 || height < 0) fail(ErrorCode::DimensionMismatch, "negative grid size");
  }

  int width() const { return width_; }
  int height() const { return height_; }
  std::size_t size() const { return data_.size(); }

  T& operator()(int row, int col) { return data_[index(row, col)]; }
  const T& operator()(int row, int col) const { return data_[index(row, col)]; }

  T& operator[](std::size_t i) { return data_[i]; }
  const T& operator[](std::size_t i) const { return data_[i]; }

  std::vector<T>& data() { return data_; }
  const std::vector<T>& data() const { return data_; }

  bool same_shape(int w, int h) const { return width_ == w && height_ == h; }
  template <typename U>
  bool same_shape(const Grid<U>& other) const { return same_shape(other.width(), other.height()); }

  bool operator==(const Grid&) const = default;

 private:
  std::size_t index(int row, int col) const { return static_cast<std::size_t>(row) * width_ + col; }

  int width_ = 0;
  int height_ = 0;
  std::vector<T> data_;
};

template <typename A, typename B>
void require_same_shape(const Grid<A>& a, const Grid<B>& b, const char* what) {
  if (!a.same_shape(b))
    fail(ErrorCode::DimensionMismatch, std::string(what) + ": " + std::to_string(a.width()) + "x" +
                                           std::to_string(a.height()) + " vs " + std::to_string(b.width()) + "x" +
                                           std::to_string(b.height()));
}

/// Boolean grid. uint8_t storage so that std::vector<bool> never appears.
using BoolGrid = Grid<std::uint8_t>;

struct DepthMap {
  Grid<double> depth;
  BoolGrid valid;

  DepthMap() = default;
  DepthMap(int width, int height) : depth(width, height, 0.0), valid(width, height, 0) {}

  int width() const { return depth.width(); }
  int height() const { return depth.height(); }
  bool is_valid(int row, int col) const { return valid(row, col) != 0 && depth(row, col) > 0.0; }
};

struct InstanceMask {
  BoolGrid mask;

  InstanceMask() = default;
  InstanceMask(int width, int height) : mask(width, height, 0) {}

  int width() const { return mask.width(); }
  int height() const { return mask.height(); }
  bool operator()(int row, int col) const { return mask(row, col) != 0; }
  std::size_t area() const {
    std::size_t n = 0;
    for (auto v : mask.data()) n += v != 0;
    return n;
  }
  bool operator==(const InstanceMask&) const = default;
};

/// Per-pixel normalized object coordinates with a validity mask.
struct NocsMap {
  Grid<Vec3> coords;
  BoolGrid valid;

  NocsMap() = default;
  NocsMap(int width, int height) : coords(width, height, Vec3::Zero()), valid(width, height, 0) {}

  int width() const { return coords.width(); }
  int height() const { return coords.height(); }
  bool is_valid(int row, int col) const { return valid(row, col) != 0; }
  std::size_t valid_count() const {
    std::size_t n = 0;
    for (auto v : valid.data()) n += v != 0;
    return n;
  }
};

inline bool operator==(const NocsMap& a, const NocsMap& b) {
  if (!a.coords.same_shape(b.coords) || a.valid != b.valid) return false;
  for (std::size_t i = 0; i < a.coords.size(); ++i)
    if (a.coords[i] != b.coords[i]) return false;
  return true;
}

}  // namespace nocs
