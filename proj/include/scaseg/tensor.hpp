#ifndef SCASEG_TENSOR_HPP_
#define SCASEG_TENSOR_HPP_

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "scaseg/error.hpp"

namespace scaseg {

#ifdef SCASEG_SINGLE_PRECISION
using real = float;
#else
using real = double;
#endif

// Dense rank-3 array in row-major (h, w, c) order.
struct FeatureMap {
  int height = 0;
  int width = 0;
  int channels = 0;
  std::vector<real> data;

  FeatureMap() = default;
  FeatureMap(int h, int w, int c, real fill = real(0));

  real& at(int h, int w, int c) { return data[(static_cast<size_t>(h) * width + w) * channels + c]; }
  real at(int h, int w, int c) const { return data[(static_cast<size_t>(h) * width + w) * channels + c]; }

  size_t size() const { return data.size(); }
  bool same_shape(const FeatureMap& o) const {
    return height == o.height && width == o.width && channels == o.channels;
  }
  std::string shape_str() const;
};

// Dense matrix, row-major.
struct Matrix {
  int rows = 0;
  int cols = 0;
  std::vector<real> data;

  Matrix() = default;
  Matrix(int r, int c, real fill = real(0));

  real& at(int r, int c) { return data[static_cast<size_t>(r) * cols + c]; }
  real at(int r, int c) const { return data[static_cast<size_t>(r) * cols + c]; }

  size_t size() const { return data.size(); }
  bool same_shape(const Matrix& o) const { return rows == o.rows && cols == o.cols; }
  std::string shape_str() const;

  static Matrix identity(int n);
};

// Per-pixel class indices; 255 marks ignored pixels.
inline constexpr uint8_t kIgnoreLabel = 255;

struct LabelMap {
  int height = 0;
  int width = 0;
  std::vector<uint8_t> data;

  LabelMap() = default;
  LabelMap(int h, int w, uint8_t fill = 0);

  uint8_t& at(int h, int w) { return data[static_cast<size_t>(h) * width + w]; }
  uint8_t at(int h, int w) const { return data[static_cast<size_t>(h) * width + w]; }
};

bool all_finite(std::span<const real> values);

// y = W x (+ accumulate into out). All matvecs in the library run through
// this so that degenerate aggregation paths stay bit-identical to conv1x1.
void matvec(const Matrix& w, const real* x, real* out);
void matvec_accumulate(const Matrix& w, const real* x, real factor, real* out);
// y = W^T x accumulated into out (out has w.cols entries).
void matvec_transpose_accumulate(const Matrix& w, const real* x, real factor, real* out);

}  // namespace scaseg

#endif  // SCASEG_TENSOR_HPP_
