#ifndef SCASEG_LAYERS_HPP_
#define SCASEG_LAYERS_HPP_

#include <cstdint>
#include <span>
#include <vector>

#include "scaseg/tensor.hpp"

namespace scaseg {

struct Conv1x1Params {
  Matrix weight;            // [out_channels, in_channels]
  std::vector<real> bias;   // [out_channels]
};

struct Conv3x3Params {
  Matrix weight;            // [out_channels, in_channels * 9], inner order (cin, ky, kx)
  std::vector<real> bias;   // [out_channels]
};

// out[h,w,:] = weight * in[h,w,:] + bias
FeatureMap conv1x1(const FeatureMap& input, const Matrix& weight, std::span<const real> bias);
FeatureMap conv1x1(const FeatureMap& input, const Conv1x1Params& p);

struct Conv1x1Grads {
  FeatureMap input;
  Matrix weight;
  std::vector<real> bias;
};
Conv1x1Grads conv1x1_backward(const FeatureMap& input, const Matrix& weight, const FeatureMap& d_out);

// Cross-correlation with zero padding 1; output spatial dims are ceil(in / stride).
FeatureMap conv3x3(const FeatureMap& input, const Matrix& weight, std::span<const real> bias, int stride);
FeatureMap conv3x3(const FeatureMap& input, const Conv3x3Params& p, int stride);

struct Conv3x3Grads {
  FeatureMap input;
  Matrix weight;
  std::vector<real> bias;
};
Conv3x3Grads conv3x3_backward(const FeatureMap& input, const Matrix& weight, int stride,
                              const FeatureMap& d_out);

// Sample centers at (i + 0.5) / factor - 0.5 (align-corners-false), edges clamped.
FeatureMap bilinear_upsample(const FeatureMap& input, int factor);
FeatureMap bilinear_upsample_backward(const FeatureMap& d_out, int in_height, int in_width, int factor);

FeatureMap relu(const FeatureMap& input);
// d_in = d_out where the forward input was > 0, else 0.
FeatureMap relu_backward(const FeatureMap& input, const FeatureMap& d_out);

real softplus(real x);
// softplus'(x) = 1 / (1 + exp(-x))
real softplus_grad(real x);
FeatureMap softplus(const FeatureMap& input);

struct LossAndGrad {
  real loss = real(0);
  FeatureMap d_logits;
};

// Mean over non-ignored pixels of class_weights[y] * (-log softmax(logits)[y]).
// Softmax uses max subtraction; labels must lie in [0, K) or equal kIgnoreLabel.
LossAndGrad weighted_cross_entropy(const FeatureMap& logits, const LabelMap& labels,
                                   std::span<const real> class_weights);

// v <- mu * v + g;  p <- p - lr * v   (classic, non-Nesterov momentum)
void sgd_momentum_step(std::span<real> params, std::span<const real> grads,
                       std::span<real> velocity, real momentum, real lr);

struct OptimizerState {
  real momentum = real(0.9);
  int64_t iteration = 0;
  std::vector<std::vector<real>> velocity;  // one buffer per parameter tensor
};

}  // namespace scaseg

#endif  // SCASEG_LAYERS_HPP_
