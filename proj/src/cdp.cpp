#include "scaseg/cdp.hpp"

#include <cstring>
#include <string>

#include "scaseg/threading.hpp"

namespace scaseg {

Matrix flatten_neurons(const FeatureMap& input) {
  // (h, w, c) row-major storage is already [n, C] row-major.
  Matrix rows(input.height * input.width, input.channels);
  rows.data = input.data;
  return rows;
}

FeatureMap unflatten_neurons(const Matrix& rows, int height, int width) {
  if (rows.rows != height * width) {
    throw ShapeError("unflatten_neurons: " + std::to_string(rows.rows) + " rows for " +
                     std::to_string(height) + "x" + std::to_string(width));
  }
  FeatureMap out(height, width, rows.cols);
  out.data = rows.data;
  return out;
}

FeatureMap pair_tensor(const Matrix& features) {
  const int n = features.rows;
  const int c = features.cols;
  FeatureMap out(n, n, 2 * c);
  parallel_for(0, n, [&](int i) {
    const real* f_i = features.data.data() + static_cast<size_t>(i) * c;
    for (int j = 0; j < n; ++j) {
      const real* f_j = features.data.data() + static_cast<size_t>(j) * c;
      real* entry = &out.at(i, j, 0);
      std::memcpy(entry, f_i, sizeof(real) * c);
      std::memcpy(entry + c, f_j, sizeof(real) * c);
    }
  });
  return out;
}

DependencyMatrix cdp_predict(const FeatureMap& input, const CdpParams& params, CdpCache* cache) {
  if (params.head.weight.rows != 1) {
    throw ShapeError("cdp_predict: head must have one output channel, weight is " +
                     params.head.weight.shape_str());
  }
  CdpCache local;
  CdpCache& c = cache ? *cache : local;
  c.input = input;
  c.hidden_pre.clear();
  c.hidden_post.clear();

  const FeatureMap* feat = &input;
  for (const Conv1x1Params& layer : params.hidden) {
    c.hidden_pre.push_back(conv1x1(*feat, layer));
    c.hidden_post.push_back(relu(c.hidden_pre.back()));
    feat = &c.hidden_post.back();
  }

  c.pair = pair_tensor(flatten_neurons(*feat));
  c.head_raw = conv1x1(c.pair, params.head);

  const int n = c.head_raw.height;
  DependencyMatrix a(n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      a.at(i, j) = (i == j) ? real(1) : softplus(c.head_raw.at(i, j, 0));
    }
  }
  return a;
}

CdpGradients cdp_backward(const CdpParams& params, const CdpCache& cache, const Matrix& d_coeff) {
  const int n = cache.head_raw.height;
  if (d_coeff.rows != n || d_coeff.cols != n) {
    throw ShapeError("cdp_backward: coefficient gradient " + d_coeff.shape_str() +
                     " does not match cached n = " + std::to_string(n));
  }
  if (cache.hidden_pre.size() != params.hidden.size()) {
    throw UsageError("cdp_backward: cache does not match parameters (" +
                     std::to_string(cache.hidden_pre.size()) + " cached layers, " +
                     std::to_string(params.hidden.size()) + " parameter sets)");
  }
  for (int i = 0; i < n; ++i) {
    if (d_coeff.at(i, i) != real(0)) {
      throw UsageError("cdp_backward: coefficient gradient has non-zero diagonal at " +
                       std::to_string(i));
    }
  }

  // Softplus; the diagonal was overwritten in the forward pass, so no
  // gradient flows through it.
  FeatureMap d_raw(n, n, 1);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      d_raw.at(i, j, 0) = (i == j) ? real(0)
                                   : d_coeff.at(i, j) * softplus_grad(cache.head_raw.at(i, j, 0));
    }
  }

  CdpGradients g;
  Conv1x1Grads head_g = conv1x1_backward(cache.pair, params.head.weight, d_raw);
  g.params.head.weight = std::move(head_g.weight);
  g.params.head.bias = std::move(head_g.bias);

  // Pair tensor backward: entry (i, j) read f_i in its first half and f_j
  // in its second, so scatter both halves back, rows first.
  const int c = head_g.input.channels / 2;
  Matrix d_feat(n, c);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      const real* d_entry = &head_g.input.at(i, j, 0);
      real* d_fi = d_feat.data.data() + static_cast<size_t>(i) * c;
      real* d_fj = d_feat.data.data() + static_cast<size_t>(j) * c;
      for (int ch = 0; ch < c; ++ch) {
        d_fi[ch] += d_entry[ch];
        d_fj[ch] += d_entry[c + ch];
      }
    }
  }

  const FeatureMap& last =
      params.hidden.empty() ? cache.input : cache.hidden_post.back();
  FeatureMap d_feat_map = unflatten_neurons(d_feat, last.height, last.width);

  g.params.hidden.resize(params.hidden.size());
  for (int layer = static_cast<int>(params.hidden.size()) - 1; layer >= 0; --layer) {
    FeatureMap d_pre = relu_backward(cache.hidden_pre[layer], d_feat_map);
    const FeatureMap& layer_in = layer == 0 ? cache.input : cache.hidden_post[layer - 1];
    Conv1x1Grads cg = conv1x1_backward(layer_in, params.hidden[layer].weight, d_pre);
    g.params.hidden[layer].weight = std::move(cg.weight);
    g.params.hidden[layer].bias = std::move(cg.bias);
    d_feat_map = std::move(cg.input);
  }
  g.input = std::move(d_feat_map);
  return g;
}

}  // namespace scaseg
