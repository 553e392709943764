#include "scaseg/network.hpp"

#include <cmath>
#include <utility>

#include "scaseg/rng.hpp"

namespace scaseg {

std::string mode_name(Mode mode) {
  switch (mode) {
    case Mode::sca: return "sca";
    case Mode::baseline_no: return "baseline_no";
    case Mode::baseline_ave: return "baseline_ave";
  }
  return "?";
}

Mode mode_from_name(const std::string& name) {
  if (name == "sca") return Mode::sca;
  if (name == "baseline_no") return Mode::baseline_no;
  if (name == "baseline_ave") return Mode::baseline_ave;
  throw ConfigError("mode: unknown value '" + name + "' (expected sca, baseline_no or baseline_ave)");
}

void NetworkConfig::validate() const {
  auto positive = [](int v, const char* field) {
    if (v <= 0) throw ConfigError(std::string(field) + ": must be positive, got " + std::to_string(v));
  };
  positive(image_h, "image_h");
  positive(image_w, "image_w");
  positive(enc_width1, "enc_width1");
  positive(enc_width2, "enc_width2");
  positive(sca_n, "sca_n");
  positive(sca_m, "sca_m");
  positive(num_classes, "classes");
  positive(cdp_channels, "cdp_channels");
  if (cdp_layers < 0) throw ConfigError("cdp_layers: must be >= 0");
  if (downsample != 1 && downsample != 2 && downsample != 4) {
    throw ConfigError("downsample: must be 1, 2 or 4, got " + std::to_string(downsample));
  }
  if (image_h % downsample != 0 || image_w % downsample != 0) {
    throw ConfigError("downsample: image " + std::to_string(image_h) + "x" + std::to_string(image_w) +
                      " is not divisible by " + std::to_string(downsample));
  }
}

namespace {

// Strides of the two potentially-striding encoder convs for a downsample factor.
std::pair<int, int> encoder_strides(int downsample) {
  switch (downsample) {
    case 1: return {1, 1};
    case 2: return {2, 1};
    default: return {2, 2};
  }
}

Matrix he_uniform(int rows, int cols, int fan_in, Rng& rng) {
  Matrix m(rows, cols);
  const double limit = std::sqrt(6.0 / fan_in);
  for (real& v : m.data) v = static_cast<real>(rng.uniform(-limit, limit));
  return m;
}

Conv3x3Params init_conv3x3(int out_c, int in_c, Rng& rng) {
  Conv3x3Params p;
  p.weight = he_uniform(out_c, in_c * 9, in_c * 9, rng);
  p.bias.assign(out_c, real(0));
  return p;
}

Conv1x1Params init_conv1x1(int out_c, int in_c, Rng& rng) {
  Conv1x1Params p;
  p.weight = he_uniform(out_c, in_c, in_c, rng);
  p.bias.assign(out_c, real(0));
  return p;
}

}  // namespace

Network build_network(const NetworkConfig& config, uint64_t seed) {
  config.validate();
  Network net;
  net.config = config;

  // Components draw from forked streams so encoder/sca/decoder weights are
  // identical across modes for a given seed.
  Rng root(seed);
  Rng enc_rng = root.fork(0);
  net.enc1 = init_conv3x3(config.enc_width1, 3, enc_rng);
  net.enc2 = init_conv3x3(config.enc_width2, config.enc_width1, enc_rng);
  net.enc3 = init_conv3x3(config.sca_n, config.enc_width2, enc_rng);

  Rng sca_rng = root.fork(1);
  net.sca.identity_weight = he_uniform(config.sca_m, config.sca_n, config.sca_n, sca_rng);
  net.sca.context_weight = he_uniform(config.sca_m, config.sca_n, config.sca_n, sca_rng);

  if (config.mode == Mode::sca) {
    Rng cdp_rng = root.fork(2);
    CdpParams cdp;
    int in_c = config.sca_n;
    for (int l = 0; l < config.cdp_layers; ++l) {
      cdp.hidden.push_back(init_conv1x1(config.cdp_channels, in_c, cdp_rng));
      in_c = config.cdp_channels;
    }
    cdp.head = init_conv1x1(1, 2 * in_c, cdp_rng);
    net.cdp = std::move(cdp);
  }

  Rng dec_rng = root.fork(3);
  net.decoder = init_conv1x1(config.num_classes, config.sca_m, dec_rng);
  return net;
}

FeatureMap net_forward(const Network& net, const FeatureMap& image, ForwardCache* cache) {
  const NetworkConfig& cfg = net.config;
  if (image.height != cfg.image_h || image.width != cfg.image_w || image.channels != 3) {
    throw ShapeError("net_forward: image " + image.shape_str() + " does not match configured " +
                     std::to_string(cfg.image_h) + "x" + std::to_string(cfg.image_w) + "x3");
  }
  ForwardCache local;
  ForwardCache& c = cache ? *cache : local;
  const auto [s1, s2] = encoder_strides(cfg.downsample);

  c.image = image;
  c.enc1_pre = conv3x3(image, net.enc1, s1);
  c.enc1_post = relu(c.enc1_pre);
  c.enc2_pre = conv3x3(c.enc1_post, net.enc2, s2);
  c.enc2_post = relu(c.enc2_pre);
  c.enc3_pre = conv3x3(c.enc2_post, net.enc3, 1);
  c.enc3_post = relu(c.enc3_pre);

  const int n = cfg.neurons();
  switch (cfg.mode) {
    case Mode::sca:
      c.dependency = cdp_predict(c.enc3_post, *net.cdp, &c.cdp);
      break;
    case Mode::baseline_no:
      c.dependency = DependencyMatrix::identity(n);
      break;
    case Mode::baseline_ave:
      c.dependency = DependencyMatrix::all_ones(n);
      break;
  }

  c.aggregated = sca_forward(c.enc3_post, c.dependency, net.sca);
  c.head_out = conv1x1(c.aggregated, net.decoder);
  return bilinear_upsample(c.head_out, cfg.downsample);
}

NetworkGrads net_backward(const Network& net, const ForwardCache& cache, const FeatureMap& d_logits) {
  const NetworkConfig& cfg = net.config;
  if (cache.head_out.size() == 0) {
    throw UsageError("net_backward: forward cache is empty or stale");
  }
  if (d_logits.height != cfg.image_h || d_logits.width != cfg.image_w ||
      d_logits.channels != cfg.num_classes) {
    throw ShapeError("net_backward: logits gradient " + d_logits.shape_str() +
                     " does not match network output");
  }
  NetworkGrads g;

  FeatureMap d_head = bilinear_upsample_backward(d_logits, cache.head_out.height,
                                                 cache.head_out.width, cfg.downsample);
  Conv1x1Grads dec = conv1x1_backward(cache.aggregated, net.decoder.weight, d_head);
  g.decoder.weight = std::move(dec.weight);
  g.decoder.bias = std::move(dec.bias);

  ScaGradients sca_g = sca_backward(cache.enc3_post, cache.dependency, net.sca, dec.input);
  g.sca.identity_weight = std::move(sca_g.identity_weight);
  g.sca.context_weight = std::move(sca_g.context_weight);

  FeatureMap d_feat = std::move(sca_g.input);
  if (cfg.mode == Mode::sca) {
    CdpGradients cdp_g = cdp_backward(*net.cdp, cache.cdp, sca_g.coeff);
    g.cdp = std::move(cdp_g.params);
    for (size_t i = 0; i < d_feat.data.size(); ++i) d_feat.data[i] += cdp_g.input.data[i];
  }

  const auto [s1, s2] = encoder_strides(cfg.downsample);
  FeatureMap d3 = relu_backward(cache.enc3_pre, d_feat);
  g.enc3 = conv3x3_backward(cache.enc2_post, net.enc3.weight, 1, d3);
  FeatureMap d2 = relu_backward(cache.enc2_pre, g.enc3.input);
  g.enc2 = conv3x3_backward(cache.enc1_post, net.enc2.weight, s2, d2);
  FeatureMap d1 = relu_backward(cache.enc1_pre, g.enc2.input);
  g.enc1 = conv3x3_backward(cache.image, net.enc1.weight, s1, d1);

  // Input-image gradients are never consumed.
  g.enc1.input = FeatureMap();
  g.enc2.input = FeatureMap();
  g.enc3.input = FeatureMap();
  return g;
}

namespace {

void push(std::vector<ParamRef>& refs, const std::string& name, ParamGroup group, Matrix& m) {
  refs.push_back(ParamRef{name, group, {m.rows, m.cols}, std::span<real>(m.data)});
}

void push(std::vector<ParamRef>& refs, const std::string& name, ParamGroup group,
          std::vector<real>& v) {
  refs.push_back(ParamRef{name, group, {static_cast<int>(v.size())}, std::span<real>(v)});
}

template <typename Enc1, typename Sca, typename Cdp, typename Dec>
std::vector<ParamRef> build_refs(Enc1& enc1, Enc1& enc2, Enc1& enc3, Sca& sca, Cdp* cdp,
                                 Dec& decoder) {
  std::vector<ParamRef> refs;
  push(refs, "enc1/weight", ParamGroup::encoder, enc1.weight);
  push(refs, "enc1/bias", ParamGroup::encoder, enc1.bias);
  push(refs, "enc2/weight", ParamGroup::encoder, enc2.weight);
  push(refs, "enc2/bias", ParamGroup::encoder, enc2.bias);
  push(refs, "enc3/weight", ParamGroup::encoder, enc3.weight);
  push(refs, "enc3/bias", ParamGroup::encoder, enc3.bias);
  push(refs, "sca/identity_weight", ParamGroup::sca_decoder, sca.identity_weight);
  push(refs, "sca/context_weight", ParamGroup::sca_decoder, sca.context_weight);
  if (cdp) {
    for (size_t l = 0; l < cdp->hidden.size(); ++l) {
      const std::string base = "cdp/hidden" + std::to_string(l);
      push(refs, base + "/weight", ParamGroup::sca_decoder, cdp->hidden[l].weight);
      push(refs, base + "/bias", ParamGroup::sca_decoder, cdp->hidden[l].bias);
    }
    push(refs, "cdp/head/weight", ParamGroup::sca_decoder, cdp->head.weight);
    push(refs, "cdp/head/bias", ParamGroup::sca_decoder, cdp->head.bias);
  }
  push(refs, "decoder/weight", ParamGroup::sca_decoder, decoder.weight);
  push(refs, "decoder/bias", ParamGroup::sca_decoder, decoder.bias);
  return refs;
}

}  // namespace

std::vector<ParamRef> param_refs(Network& net) {
  return build_refs(net.enc1, net.enc2, net.enc3, net.sca, net.cdp ? &*net.cdp : nullptr,
                    net.decoder);
}

std::vector<ParamRef> grad_refs(NetworkGrads& grads, const Network& net) {
  (void)net;
  return build_refs(grads.enc1, grads.enc2, grads.enc3, grads.sca,
                    grads.cdp ? &*grads.cdp : nullptr, grads.decoder);
}

NetworkGrads zero_grads_like(const Network& net) {
  NetworkGrads g;
  auto zero3 = [](const Conv3x3Params& p) {
    Conv3x3Grads z;
    z.weight = Matrix(p.weight.rows, p.weight.cols);
    z.bias.assign(p.bias.size(), real(0));
    return z;
  };
  g.enc1 = zero3(net.enc1);
  g.enc2 = zero3(net.enc2);
  g.enc3 = zero3(net.enc3);
  g.sca.identity_weight = Matrix(net.sca.identity_weight.rows, net.sca.identity_weight.cols);
  g.sca.context_weight = Matrix(net.sca.context_weight.rows, net.sca.context_weight.cols);
  if (net.cdp) {
    CdpParams z;
    for (const Conv1x1Params& h : net.cdp->hidden) {
      Conv1x1Params zh;
      zh.weight = Matrix(h.weight.rows, h.weight.cols);
      zh.bias.assign(h.bias.size(), real(0));
      z.hidden.push_back(std::move(zh));
    }
    z.head.weight = Matrix(net.cdp->head.weight.rows, net.cdp->head.weight.cols);
    z.head.bias.assign(net.cdp->head.bias.size(), real(0));
    g.cdp = std::move(z);
  }
  g.decoder.weight = Matrix(net.decoder.weight.rows, net.decoder.weight.cols);
  g.decoder.bias.assign(net.decoder.bias.size(), real(0));
  return g;
}

int64_t total_param_count(const Network& net) {
  auto count3 = [](const Conv3x3Params& p) {
    return static_cast<int64_t>(p.weight.size()) + static_cast<int64_t>(p.bias.size());
  };
  auto count1 = [](const Conv1x1Params& p) {
    return static_cast<int64_t>(p.weight.size()) + static_cast<int64_t>(p.bias.size());
  };
  int64_t total = count3(net.enc1) + count3(net.enc2) + count3(net.enc3);
  total += static_cast<int64_t>(net.sca.identity_weight.size());
  total += static_cast<int64_t>(net.sca.context_weight.size());
  if (net.cdp) {
    for (const Conv1x1Params& h : net.cdp->hidden) total += count1(h);
    total += count1(net.cdp->head);
  }
  total += count1(net.decoder);
  return total;
}

LabelMap predict_labels(const FeatureMap& logits) {
  LabelMap labels(logits.height, logits.width);
  const int k = logits.channels;
  const int pixels = logits.height * logits.width;
  for (int p = 0; p < pixels; ++p) {
    const real* z = logits.data.data() + static_cast<size_t>(p) * k;
    int best = 0;
    for (int c = 1; c < k; ++c) {
      if (z[c] > z[best]) best = c;
    }
    labels.data[p] = static_cast<uint8_t>(best);
  }
  return labels;
}

FeatureMap dependency_mask(const Network& net, const FeatureMap& image, int neuron_index) {
  if (net.config.mode != Mode::sca) {
    throw UsageError("dependency_mask: network mode is " + mode_name(net.config.mode) +
                     ", masks require sca");
  }
  const int n = net.config.neurons();
  if (neuron_index < 0 || neuron_index >= n) {
    throw UsageError("dependency_mask: neuron index " + std::to_string(neuron_index) +
                     " out of range [0, " + std::to_string(n) + ")");
  }
  ForwardCache cache;
  net_forward(net, image, &cache);
  const int gh = net.config.image_h / net.config.downsample;
  const int gw = net.config.image_w / net.config.downsample;
  FeatureMap mask(gh, gw, 1);
  real max_v = real(0);
  for (int j = 0; j < n; ++j) max_v = std::max(max_v, cache.dependency.at(neuron_index, j));
  if (max_v > real(0)) {
    for (int j = 0; j < n; ++j) mask.data[j] = cache.dependency.at(neuron_index, j) / max_v;
  }
  return mask;
}

}  // namespace scaseg
