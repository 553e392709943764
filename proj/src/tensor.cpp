#include "scaseg/tensor.hpp"

#include <cmath>
#include <sstream>

namespace scaseg {

namespace {
void require_positive(int value, const char* what) {
  if (value <= 0) {
    throw ShapeError(std::string(what) + " must be positive, got " + std::to_string(value));
  }
}
}  // namespace

FeatureMap::FeatureMap(int h, int w, int c, real fill) : height(h), width(w), channels(c) {
  require_positive(h, "height");
  require_positive(w, "width");
  require_positive(c, "channels");
  data.assign(static_cast<size_t>(h) * w * c, fill);
}

std::string FeatureMap::shape_str() const {
  std::ostringstream os;
  os << height << "x" << width << "x" << channels;
  return os.str();
}

Matrix::Matrix(int r, int c, real fill) : rows(r), cols(c) {
  require_positive(r, "rows");
  require_positive(c, "cols");
  data.assign(static_cast<size_t>(r) * c, fill);
}

std::string Matrix::shape_str() const {
  std::ostringstream os;
  os << rows << "x" << cols;
  return os.str();
}

Matrix Matrix::identity(int n) {
  Matrix m(n, n);
  for (int i = 0; i < n; ++i) m.at(i, i) = real(1);
  return m;
}

LabelMap::LabelMap(int h, int w, uint8_t fill) : height(h), width(w) {
  require_positive(h, "height");
  require_positive(w, "width");
  data.assign(static_cast<size_t>(h) * w, fill);
}

bool all_finite(std::span<const real> values) {
  for (real v : values) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

void matvec(const Matrix& w, const real* x, real* out) {
  for (int r = 0; r < w.rows; ++r) {
    const real* row = w.data.data() + static_cast<size_t>(r) * w.cols;
    real acc = real(0);
    for (int c = 0; c < w.cols; ++c) acc += row[c] * x[c];
    out[r] = acc;
  }
}

void matvec_accumulate(const Matrix& w, const real* x, real factor, real* out) {
  for (int r = 0; r < w.rows; ++r) {
    const real* row = w.data.data() + static_cast<size_t>(r) * w.cols;
    real acc = real(0);
    for (int c = 0; c < w.cols; ++c) acc += row[c] * x[c];
    out[r] += factor * acc;
  }
}

void matvec_transpose_accumulate(const Matrix& w, const real* x, real factor, real* out) {
  for (int r = 0; r < w.rows; ++r) {
    const real* row = w.data.data() + static_cast<size_t>(r) * w.cols;
    const real xr = factor * x[r];
    for (int c = 0; c < w.cols; ++c) out[c] += row[c] * xr;
  }
}

}  // namespace scaseg
