#ifndef SCASEG_CDP_HPP_
#define SCASEG_CDP_HPP_

#include <vector>

#include "scaseg/layers.hpp"
#include "scaseg/sca.hpp"
#include "scaseg/tensor.hpp"

namespace scaseg {

// Predictor parameters: a stack of 1x1 convolutions (ReLU between them)
// followed by a single-channel 1x1 head applied to the pair tensor.
struct CdpParams {
  std::vector<Conv1x1Params> hidden;  // may be empty; then the head sees raw input pairs
  Conv1x1Params head;                 // [1, 2 * feature_channels]
};

// Neurons as rows: row i of the result is the channel vector at flat
// position i (row-major over (h, w), matching the aggregation operator).
Matrix flatten_neurons(const FeatureMap& input);
FeatureMap unflatten_neurons(const Matrix& rows, int height, int width);

// n x n map whose (i, j) entry concatenates [f_i ; f_j]: the first half of
// the channels replicates f along rows, the second half along columns.
FeatureMap pair_tensor(const Matrix& features);

struct CdpCache {
  FeatureMap input;
  std::vector<FeatureMap> hidden_pre;   // conv outputs before ReLU, one per hidden layer
  std::vector<FeatureMap> hidden_post;  // after ReLU
  FeatureMap pair;                      // n x n x 2C
  FeatureMap head_raw;                  // n x n x 1, before softplus
};

// hidden 1x1 convs + ReLU -> flatten -> pair tensor -> 1x1 head ->
// softplus -> diagonal overwritten with 1.
DependencyMatrix cdp_predict(const FeatureMap& input, const CdpParams& params,
                             CdpCache* cache = nullptr);

struct CdpGradients {
  FeatureMap input;
  CdpParams params;  // same shapes as the forward parameters
};

// Reverse traversal of cdp_predict. The incoming coefficient gradient must
// have a zero diagonal (the diagonal is pinned, not predicted).
CdpGradients cdp_backward(const CdpParams& params, const CdpCache& cache, const Matrix& d_coeff);

}  // namespace scaseg

#endif  // SCASEG_CDP_HPP_
