#include "scaseg/layers.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "scaseg/threading.hpp"

namespace scaseg {

namespace {

void check_conv_channels(int in_channels, const Matrix& weight, size_t bias_len, int weight_cols,
                         const char* op) {
  if (weight.cols != weight_cols) {
    throw ShapeError(std::string(op) + ": weight shape " + weight.shape_str() +
                     " does not match input with " + std::to_string(in_channels) + " channels");
  }
  if (bias_len != static_cast<size_t>(weight.rows)) {
    throw ShapeError(std::string(op) + ": bias length " + std::to_string(bias_len) +
                     " does not match weight shape " + weight.shape_str());
  }
}

}  // namespace

FeatureMap conv1x1(const FeatureMap& input, const Matrix& weight, std::span<const real> bias) {
  check_conv_channels(input.channels, weight, bias.size(), input.channels, "conv1x1");
  FeatureMap out(input.height, input.width, weight.rows);
  const int pixels = input.height * input.width;
  parallel_for(0, pixels, [&](int p) {
    const real* x = input.data.data() + static_cast<size_t>(p) * input.channels;
    real* y = out.data.data() + static_cast<size_t>(p) * out.channels;
    matvec(weight, x, y);
    for (int r = 0; r < weight.rows; ++r) y[r] += bias[r];
  });
  return out;
}

FeatureMap conv1x1(const FeatureMap& input, const Conv1x1Params& p) {
  return conv1x1(input, p.weight, p.bias);
}

Conv1x1Grads conv1x1_backward(const FeatureMap& input, const Matrix& weight, const FeatureMap& d_out) {
  if (d_out.height != input.height || d_out.width != input.width || d_out.channels != weight.rows) {
    throw ShapeError("conv1x1_backward: upstream gradient " + d_out.shape_str() +
                     " does not match output of weight " + weight.shape_str());
  }
  Conv1x1Grads g;
  g.input = FeatureMap(input.height, input.width, input.channels);
  g.weight = Matrix(weight.rows, weight.cols);
  g.bias.assign(weight.rows, real(0));
  const int pixels = input.height * input.width;
  for (int p = 0; p < pixels; ++p) {
    const real* x = input.data.data() + static_cast<size_t>(p) * input.channels;
    const real* dy = d_out.data.data() + static_cast<size_t>(p) * d_out.channels;
    real* dx = g.input.data.data() + static_cast<size_t>(p) * input.channels;
    for (int r = 0; r < weight.rows; ++r) {
      const real* wrow = weight.data.data() + static_cast<size_t>(r) * weight.cols;
      real* gwrow = g.weight.data.data() + static_cast<size_t>(r) * weight.cols;
      const real d = dy[r];
      for (int c = 0; c < weight.cols; ++c) {
        dx[c] += wrow[c] * d;
        gwrow[c] += x[c] * d;
      }
      g.bias[r] += d;
    }
  }
  return g;
}

FeatureMap conv3x3(const FeatureMap& input, const Matrix& weight, std::span<const real> bias,
                   int stride) {
  if (stride != 1 && stride != 2) {
    throw UsageError("conv3x3: stride must be 1 or 2, got " + std::to_string(stride));
  }
  check_conv_channels(input.channels, weight, bias.size(), input.channels * 9, "conv3x3");
  const int out_h = (input.height + stride - 1) / stride;
  const int out_w = (input.width + stride - 1) / stride;
  FeatureMap out(out_h, out_w, weight.rows);
  parallel_for(0, out_h, [&](int oh) {
    for (int ow = 0; ow < out_w; ++ow) {
      real* y = &out.at(oh, ow, 0);
      for (int co = 0; co < weight.rows; ++co) {
        const real* wrow = weight.data.data() + static_cast<size_t>(co) * weight.cols;
        real acc = bias[co];
        for (int ci = 0; ci < input.channels; ++ci) {
          for (int ky = 0; ky < 3; ++ky) {
            const int ih = oh * stride + ky - 1;
            if (ih < 0 || ih >= input.height) continue;
            for (int kx = 0; kx < 3; ++kx) {
              const int iw = ow * stride + kx - 1;
              if (iw < 0 || iw >= input.width) continue;
              acc += wrow[(ci * 3 + ky) * 3 + kx] * input.at(ih, iw, ci);
            }
          }
        }
        y[co] = acc;
      }
    }
  });
  return out;
}

FeatureMap conv3x3(const FeatureMap& input, const Conv3x3Params& p, int stride) {
  return conv3x3(input, p.weight, p.bias, stride);
}

Conv3x3Grads conv3x3_backward(const FeatureMap& input, const Matrix& weight, int stride,
                              const FeatureMap& d_out) {
  const int out_h = (input.height + stride - 1) / stride;
  const int out_w = (input.width + stride - 1) / stride;
  if (d_out.height != out_h || d_out.width != out_w || d_out.channels != weight.rows) {
    throw ShapeError("conv3x3_backward: upstream gradient " + d_out.shape_str() + " does not match " +
                     std::to_string(out_h) + "x" + std::to_string(out_w) + "x" +
                     std::to_string(weight.rows));
  }
  Conv3x3Grads g;
  g.input = FeatureMap(input.height, input.width, input.channels);
  g.weight = Matrix(weight.rows, weight.cols);
  g.bias.assign(weight.rows, real(0));
  for (int oh = 0; oh < out_h; ++oh) {
    for (int ow = 0; ow < out_w; ++ow) {
      const real* dy = &d_out.at(oh, ow, 0);
      for (int co = 0; co < weight.rows; ++co) {
        const real d = dy[co];
        const real* wrow = weight.data.data() + static_cast<size_t>(co) * weight.cols;
        real* gwrow = g.weight.data.data() + static_cast<size_t>(co) * weight.cols;
        g.bias[co] += d;
        for (int ci = 0; ci < input.channels; ++ci) {
          for (int ky = 0; ky < 3; ++ky) {
            const int ih = oh * stride + ky - 1;
            if (ih < 0 || ih >= input.height) continue;
            for (int kx = 0; kx < 3; ++kx) {
              const int iw = ow * stride + kx - 1;
              if (iw < 0 || iw >= input.width) continue;
              const int widx = (ci * 3 + ky) * 3 + kx;
              g.input.at(ih, iw, ci) += wrow[widx] * d;
              gwrow[widx] += input.at(ih, iw, ci) * d;
            }
          }
        }
      }
    }
  }
  return g;
}

namespace {

struct Tap {
  int lo, hi;
  real frac;  // weight of hi is frac, of lo is 1 - frac
};

Tap bilinear_tap(int out_idx, int factor, int in_size) {
  const double src = (out_idx + 0.5) / factor - 0.5;
  double lo = std::floor(src);
  Tap t;
  t.frac = static_cast<real>(src - lo);
  t.lo = std::clamp(static_cast<int>(lo), 0, in_size - 1);
  t.hi = std::clamp(static_cast<int>(lo) + 1, 0, in_size - 1);
  return t;
}

}  // namespace

FeatureMap bilinear_upsample(const FeatureMap& input, int factor) {
  if (factor < 1) throw UsageError("bilinear_upsample: factor must be >= 1");
  if (factor == 1) return input;
  FeatureMap out(input.height * factor, input.width * factor, input.channels);
  std::vector<Tap> row_taps(out.height), col_taps(out.width);
  for (int i = 0; i < out.height; ++i) row_taps[i] = bilinear_tap(i, factor, input.height);
  for (int i = 0; i < out.width; ++i) col_taps[i] = bilinear_tap(i, factor, input.width);
  parallel_for(0, out.height, [&](int oh) {
    const Tap ry = row_taps[oh];
    for (int ow = 0; ow < out.width; ++ow) {
      const Tap rx = col_taps[ow];
      for (int c = 0; c < input.channels; ++c) {
        const real top = input.at(ry.lo, rx.lo, c) * (1 - rx.frac) + input.at(ry.lo, rx.hi, c) * rx.frac;
        const real bot = input.at(ry.hi, rx.lo, c) * (1 - rx.frac) + input.at(ry.hi, rx.hi, c) * rx.frac;
        out.at(oh, ow, c) = top * (1 - ry.frac) + bot * ry.frac;
      }
    }
  });
  return out;
}

FeatureMap bilinear_upsample_backward(const FeatureMap& d_out, int in_height, int in_width, int factor) {
  if (factor < 1) throw UsageError("bilinear_upsample_backward: factor must be >= 1");
  if (factor == 1) return d_out;
  if (d_out.height != in_height * factor || d_out.width != in_width * factor) {
    throw ShapeError("bilinear_upsample_backward: gradient " + d_out.shape_str() +
                     " does not match input " + std::to_string(in_height) + "x" +
                     std::to_string(in_width) + " at factor " + std::to_string(factor));
  }
  FeatureMap d_in(in_height, in_width, d_out.channels);
  for (int oh = 0; oh < d_out.height; ++oh) {
    const Tap ry = bilinear_tap(oh, factor, in_height);
    for (int ow = 0; ow < d_out.width; ++ow) {
      const Tap rx = bilinear_tap(ow, factor, in_width);
      for (int c = 0; c < d_out.channels; ++c) {
        const real d = d_out.at(oh, ow, c);
        d_in.at(ry.lo, rx.lo, c) += d * (1 - ry.frac) * (1 - rx.frac);
        d_in.at(ry.lo, rx.hi, c) += d * (1 - ry.frac) * rx.frac;
        d_in.at(ry.hi, rx.lo, c) += d * ry.frac * (1 - rx.frac);
        d_in.at(ry.hi, rx.hi, c) += d * ry.frac * rx.frac;
      }
    }
  }
  return d_in;
}

FeatureMap relu(const FeatureMap& input) {
  FeatureMap out = input;
  for (real& v : out.data) v = v > real(0) ? v : real(0);
  return out;
}

FeatureMap relu_backward(const FeatureMap& input, const FeatureMap& d_out) {
  if (!input.same_shape(d_out)) {
    throw ShapeError("relu_backward: gradient " + d_out.shape_str() + " does not match input " +
                     input.shape_str());
  }
  FeatureMap d_in = d_out;
  for (size_t i = 0; i < d_in.data.size(); ++i) {
    if (input.data[i] <= real(0)) d_in.data[i] = real(0);
  }
  return d_in;
}

real softplus(real x) {
  // log(1 + exp(x)) without overflow: for large x this is x + log1p(exp(-x)).
  if (x > real(0)) return x + std::log1p(std::exp(-x));
  return std::log1p(std::exp(x));
}

real softplus_grad(real x) { return real(1) / (real(1) + std::exp(-x)); }

FeatureMap softplus(const FeatureMap& input) {
  FeatureMap out = input;
  for (real& v : out.data) v = softplus(v);
  return out;
}

LossAndGrad weighted_cross_entropy(const FeatureMap& logits, const LabelMap& labels,
                                   std::span<const real> class_weights) {
  const int k = logits.channels;
  if (labels.height != logits.height || labels.width != logits.width) {
    throw ShapeError("weighted_cross_entropy: labels " + std::to_string(labels.height) + "x" +
                     std::to_string(labels.width) + " do not match logits " + logits.shape_str());
  }
  if (class_weights.size() != static_cast<size_t>(k)) {
    throw ShapeError("weighted_cross_entropy: " + std::to_string(class_weights.size()) +
                     " class weights for " + std::to_string(k) + " classes");
  }
  LossAndGrad result;
  result.d_logits = FeatureMap(logits.height, logits.width, k);

  const int pixels = logits.height * logits.width;
  int64_t counted = 0;
  for (int p = 0; p < pixels; ++p) {
    const uint8_t y = labels.data[p];
    if (y == kIgnoreLabel) continue;
    if (y >= k) {
      throw DataError("weighted_cross_entropy: label " + std::to_string(int(y)) +
                      " out of range for " + std::to_string(k) + " classes");
    }
    ++counted;
  }
  if (counted == 0) return result;

  std::vector<real> prob(k);
  const real inv_count = real(1) / static_cast<real>(counted);
  real loss = real(0);
  for (int p = 0; p < pixels; ++p) {
    const uint8_t y = labels.data[p];
    if (y == kIgnoreLabel) continue;
    const real* z = logits.data.data() + static_cast<size_t>(p) * k;
    real zmax = z[0];
    for (int c = 1; c < k; ++c) zmax = std::max(zmax, z[c]);
    real denom = real(0);
    for (int c = 0; c < k; ++c) {
      prob[c] = std::exp(z[c] - zmax);
      denom += prob[c];
    }
    const real w = class_weights[y];
    loss += w * (std::log(denom) - (z[y] - zmax));
    real* dz = result.d_logits.data.data() + static_cast<size_t>(p) * k;
    const real scale = w * inv_count;
    for (int c = 0; c < k; ++c) {
      dz[c] = scale * (prob[c] / denom - (c == y ? real(1) : real(0)));
    }
  }
  result.loss = loss * inv_count;
  return result;
}

void sgd_momentum_step(std::span<real> params, std::span<const real> grads,
                       std::span<real> velocity, real momentum, real lr) {
  if (params.size() != grads.size() || params.size() != velocity.size()) {
    throw ShapeError("sgd_momentum_step: sizes differ (params " + std::to_string(params.size()) +
                     ", grads " + std::to_string(grads.size()) + ", velocity " +
                     std::to_string(velocity.size()) + ")");
  }
  for (size_t i = 0; i < params.size(); ++i) {
    velocity[i] = momentum * velocity[i] + grads[i];
    params[i] -= lr * velocity[i];
  }
}

}  // namespace scaseg
