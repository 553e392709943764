#include "scaseg/sca.hpp"

#include <cmath>
#include <string>

#include "scaseg/threading.hpp"

namespace scaseg {

DependencyMatrix::DependencyMatrix(int n_, real off_diagonal) : n(n_) {
  if (n_ <= 0) throw ShapeError("DependencyMatrix: n must be positive, got " + std::to_string(n_));
  coeff.assign(static_cast<size_t>(n) * n, off_diagonal);
  for (int i = 0; i < n; ++i) at(i, i) = real(1);
}

DependencyMatrix DependencyMatrix::identity(int n) { return DependencyMatrix(n, real(0)); }

DependencyMatrix DependencyMatrix::all_ones(int n) { return DependencyMatrix(n, real(1)); }

void DependencyMatrix::validate() const {
  if (coeff.size() != static_cast<size_t>(n) * n) {
    throw ShapeError("DependencyMatrix: " + std::to_string(coeff.size()) + " coefficients for n = " +
                     std::to_string(n));
  }
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      const real v = at(i, j);
      if (!std::isfinite(v)) throw DataError("DependencyMatrix: non-finite coefficient");
      if (i == j && v != real(1)) {
        throw DataError("DependencyMatrix: diagonal entry " + std::to_string(i) + " is " +
                        std::to_string(v) + ", must be 1");
      }
      if (v < real(0)) {
        throw DataError("DependencyMatrix: negative coefficient at (" + std::to_string(i) + ", " +
                        std::to_string(j) + ")");
      }
    }
  }
}

namespace {

void check_sca_shapes(const FeatureMap& input, const DependencyMatrix& a, const ScaParams& params) {
  const int n = input.height * input.width;
  if (a.n != n) {
    throw ShapeError("sca: dependency matrix n = " + std::to_string(a.n) +
                     " does not match feature map " + input.shape_str() + " (n = " +
                     std::to_string(n) + ")");
  }
  if (!params.identity_weight.same_shape(params.context_weight)) {
    throw ShapeError("sca: identity weight " + params.identity_weight.shape_str() +
                     " and context weight " + params.context_weight.shape_str() + " differ");
  }
  if (params.identity_weight.cols != input.channels) {
    throw ShapeError("sca: weight " + params.identity_weight.shape_str() +
                     " does not match input channels " + std::to_string(input.channels));
  }
}

}  // namespace

FeatureMap sca_forward(const FeatureMap& input, const DependencyMatrix& a, const ScaParams& params) {
  check_sca_shapes(input, a, params);
  const int n = a.n;
  const int in_c = input.channels;
  const int out_c = params.identity_weight.rows;

  // Context features Wc x_j for every neuron, reused by every row.
  Matrix context(n, out_c);
  parallel_for(0, n, [&](int j) {
    matvec(params.context_weight, input.data.data() + static_cast<size_t>(j) * in_c,
           context.data.data() + static_cast<size_t>(j) * out_c);
  });

  FeatureMap out(input.height, input.width, out_c);
  parallel_for(0, n, [&](int i) {
    const real* x_i = input.data.data() + static_cast<size_t>(i) * in_c;
    real* h_i = out.data.data() + static_cast<size_t>(i) * out_c;
    matvec(params.identity_weight, x_i, h_i);
    const real a_ii = a.at(i, i);
    for (int c = 0; c < out_c; ++c) h_i[c] *= a_ii;

    real coeff_sum = real(0);
    for (int j = 0; j < n; ++j) {
      if (j != i) coeff_sum += a.at(i, j);
    }
    if (coeff_sum == real(0)) return;  // no context for this neuron

    const real norm = real(1) / (coeff_sum + real(kScaEpsilon));
    std::vector<real> ctx(out_c, real(0));
    for (int j = 0; j < n; ++j) {
      if (j == i) continue;
      const real a_ij = a.at(i, j);
      if (a_ij == real(0)) continue;
      const real* c_j = context.data.data() + static_cast<size_t>(j) * out_c;
      for (int c = 0; c < out_c; ++c) ctx[c] += a_ij * c_j[c];
    }
    for (int c = 0; c < out_c; ++c) h_i[c] += norm * ctx[c];
  });
  return out;
}

ScaGradients sca_backward(const FeatureMap& input, const DependencyMatrix& a, const ScaParams& params,
                          const FeatureMap& d_out) {
  check_sca_shapes(input, a, params);
  const int n = a.n;
  const int in_c = input.channels;
  const int out_c = params.identity_weight.rows;
  if (d_out.height != input.height || d_out.width != input.width || d_out.channels != out_c) {
    throw ShapeError("sca_backward: upstream gradient " + d_out.shape_str() + " does not match " +
                     std::to_string(input.height) + "x" + std::to_string(input.width) + "x" +
                     std::to_string(out_c));
  }

  ScaGradients g;
  g.input = FeatureMap(input.height, input.width, in_c);
  g.coeff = Matrix(n, n);
  g.identity_weight = Matrix(out_c, in_c);
  g.context_weight = Matrix(out_c, in_c);

  // Per-row off-diagonal sums and normalizers.
  std::vector<real> row_sum(n, real(0)), norm(n, real(0));
  for (int i = 0; i < n; ++i) {
    real s = real(0);
    for (int j = 0; j < n; ++j) {
      if (j != i) s += a.at(i, j);
    }
    row_sum[i] = s;
    norm[i] = real(1) / (s + real(kScaEpsilon));
  }

  // Context features c_j = Wc x_j and back-projected gradients u_k = Wc^T g_k.
  Matrix context(n, out_c);
  Matrix back(n, in_c);
  parallel_for(0, n, [&](int j) {
    matvec(params.context_weight, input.data.data() + static_cast<size_t>(j) * in_c,
           context.data.data() + static_cast<size_t>(j) * out_c);
    real* u = back.data.data() + static_cast<size_t>(j) * in_c;
    for (int c = 0; c < in_c; ++c) u[c] = real(0);
    matvec_transpose_accumulate(params.context_weight,
                                d_out.data.data() + static_cast<size_t>(j) * out_c, real(1), u);
  });

  // Input gradient: own identity route plus every row k that aggregated neuron i.
  parallel_for(0, n, [&](int i) {
    real* dx = g.input.data.data() + static_cast<size_t>(i) * in_c;
    matvec_transpose_accumulate(params.identity_weight,
                                d_out.data.data() + static_cast<size_t>(i) * out_c, a.at(i, i), dx);
    for (int k = 0; k < n; ++k) {
      if (k == i) continue;
      const real w = a.at(k, i) * norm[k];
      if (w == real(0)) continue;
      const real* u = back.data.data() + static_cast<size_t>(k) * in_c;
      for (int c = 0; c < in_c; ++c) dx[c] += w * u[c];
    }
  });

  // Coefficient gradient. Differentiating the normalized context sum gives
  //   dA_ij = g_i . (S_i c_j - sum_k a_ik c_k) / (S_i + eps)^2,  j != i.
  parallel_for(0, n, [&](int i) {
    if (row_sum[i] == real(0)) return;  // context term identically zero
    const real* g_i = d_out.data.data() + static_cast<size_t>(i) * out_c;
    std::vector<real> weighted(out_c, real(0));  // sum_{k != i} a_ik c_k
    for (int k = 0; k < n; ++k) {
      if (k == i) continue;
      const real a_ik = a.at(i, k);
      if (a_ik == real(0)) continue;
      const real* c_k = context.data.data() + static_cast<size_t>(k) * out_c;
      for (int c = 0; c < out_c; ++c) weighted[c] += a_ik * c_k[c];
    }
    real dot_weighted = real(0);
    for (int c = 0; c < out_c; ++c) dot_weighted += g_i[c] * weighted[c];
    const real n2 = norm[i] * norm[i];
    for (int j = 0; j < n; ++j) {
      if (j == i) continue;
      const real* c_j = context.data.data() + static_cast<size_t>(j) * out_c;
      real dot_cj = real(0);
      for (int c = 0; c < out_c; ++c) dot_cj += g_i[c] * c_j[c];
      g.coeff.at(i, j) = n2 * (row_sum[i] * dot_cj - dot_weighted);
    }
  });

  // Weight gradients: rank-one accumulation per neuron.
  for (int i = 0; i < n; ++i) {
    const real* g_i = d_out.data.data() + static_cast<size_t>(i) * out_c;
    const real* x_i = input.data.data() + static_cast<size_t>(i) * in_c;
    const real a_ii = a.at(i, i);
    for (int r = 0; r < out_c; ++r) {
      real* row = g.identity_weight.data.data() + static_cast<size_t>(r) * in_c;
      const real gr = a_ii * g_i[r];
      for (int c = 0; c < in_c; ++c) row[c] += gr * x_i[c];
    }
    if (row_sum[i] == real(0)) continue;
    std::vector<real> ctx_input(in_c, real(0));  // y_i = norm_i * sum_{j != i} a_ij x_j
    for (int j = 0; j < n; ++j) {
      if (j == i) continue;
      const real a_ij = a.at(i, j);
      if (a_ij == real(0)) continue;
      const real* x_j = input.data.data() + static_cast<size_t>(j) * in_c;
      for (int c = 0; c < in_c; ++c) ctx_input[c] += a_ij * x_j[c];
    }
    for (int r = 0; r < out_c; ++r) {
      real* row = g.context_weight.data.data() + static_cast<size_t>(r) * in_c;
      const real gr = norm[i] * g_i[r];
      for (int c = 0; c < in_c; ++c) row[c] += gr * ctx_input[c];
    }
  }
  return g;
}

ParamCount param_count(int64_t n, int64_t in_channels, int64_t out_channels) {
  if (n <= 0 || in_channels <= 0 || out_channels <= 0) {
    throw UsageError("param_count: all arguments must be positive");
  }
  return ParamCount{n * n * in_channels * out_channels, 2 * in_channels * out_channels};
}

}  // namespace scaseg
