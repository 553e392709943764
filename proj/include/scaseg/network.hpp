#ifndef SCASEG_NETWORK_HPP_
#define SCASEG_NETWORK_HPP_

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "scaseg/cdp.hpp"
#include "scaseg/layers.hpp"
#include "scaseg/sca.hpp"
#include "scaseg/tensor.hpp"

namespace scaseg {

enum class Mode { sca, baseline_no, baseline_ave };

std::string mode_name(Mode mode);
Mode mode_from_name(const std::string& name);

struct NetworkConfig {
  int image_h = 32;
  int image_w = 32;
  int enc_width1 = 16;
  int enc_width2 = 32;
  int downsample = 4;    // 1, 2 or 4; realized by the strides of the first two encoder convs
  int sca_n = 32;        // channels entering the aggregation operator
  int sca_m = 32;        // channels it produces
  int cdp_layers = 3;    // hidden 1x1 convs in the predictor
  int cdp_channels = 32; // their output width
  int num_classes = 4;
  Mode mode = Mode::sca;

  int neurons() const { return (image_h / downsample) * (image_w / downsample); }
  void validate() const;  // throws ConfigError naming the offending field
};

// Encoder (3 conv3x3 blocks) -> context aggregation -> 1x1 class head ->
// bilinear upsample back to input resolution.
struct Network {
  NetworkConfig config;
  Conv3x3Params enc1, enc2, enc3;
  ScaParams sca;
  std::optional<CdpParams> cdp;  // present only in Mode::sca
  Conv1x1Params decoder;
};

enum class ParamGroup { encoder, sca_decoder };

// Named view over one parameter (or gradient) tensor.
struct ParamRef {
  std::string name;
  ParamGroup group;
  std::vector<int> dims;
  std::span<real> values;
};

Network build_network(const NetworkConfig& config, uint64_t seed);

struct ForwardCache {
  FeatureMap image;
  FeatureMap enc1_pre, enc1_post;
  FeatureMap enc2_pre, enc2_post;
  FeatureMap enc3_pre, enc3_post;  // enc3_post is the aggregation input
  CdpCache cdp;
  DependencyMatrix dependency;
  FeatureMap aggregated;
  FeatureMap head_out;  // class scores at the downsampled grid
};

// Returns logits at input resolution. The cache (when given) holds every
// intermediate needed by net_backward plus the dependency matrix.
FeatureMap net_forward(const Network& net, const FeatureMap& image, ForwardCache* cache = nullptr);

struct NetworkGrads {
  Conv3x3Grads enc1, enc2, enc3;  // the FeatureMap members are unused (zero-size)
  ScaParams sca;
  std::optional<CdpParams> cdp;
  Conv1x1Params decoder;
};

NetworkGrads net_backward(const Network& net, const ForwardCache& cache, const FeatureMap& d_logits);

// Fixed-order registries; parameters and gradients share names and order.
std::vector<ParamRef> param_refs(Network& net);
std::vector<ParamRef> grad_refs(NetworkGrads& grads, const Network& net);
NetworkGrads zero_grads_like(const Network& net);
int64_t total_param_count(const Network& net);

// Per-pixel argmax; ties go to the lowest class index.
LabelMap predict_labels(const FeatureMap& logits);

// Row i of the predicted dependency matrix on the neuron grid, scaled so the
// largest entry is 1 (an all-zero row stays all-zero). Requires Mode::sca.
FeatureMap dependency_mask(const Network& net, const FeatureMap& image, int neuron_index);

}  // namespace scaseg

#endif  // SCASEG_NETWORK_HPP_
