#ifndef SCASEG_SCA_HPP_
#define SCASEG_SCA_HPP_

#include <cstdint>

#include "scaseg/tensor.hpp"

namespace scaseg {

// Guard added to every normalization denominator so rows whose off-diagonal
// coefficients sum to zero stay finite.
inline constexpr double kScaEpsilon = 1e-12;

// Pairwise dependency coefficients between the n neurons of a feature map,
// flattened row-major over (h, w). The diagonal is pinned to 1 and all
// entries are nonnegative.
struct DependencyMatrix {
  int n = 0;
  std::vector<real> coeff;  // n*n, coeff[i*n + j]

  DependencyMatrix() = default;
  explicit DependencyMatrix(int n_, real off_diagonal = real(0));

  real& at(int i, int j) { return coeff[static_cast<size_t>(i) * n + j]; }
  real at(int i, int j) const { return coeff[static_cast<size_t>(i) * n + j]; }

  static DependencyMatrix identity(int n);
  static DependencyMatrix all_ones(int n);

  // Throws on broken invariants (diagonal != 1, negative or non-finite entries).
  void validate() const;
};

struct ScaParams {
  Matrix identity_weight;  // maps a neuron's own features, [M, N]
  Matrix context_weight;   // maps its contribution to other neurons' context, [M, N]
};

struct ScaGradients {
  FeatureMap input;        // same shape as the forward input
  Matrix coeff;            // n x n, zero diagonal
  Matrix identity_weight;  // [M, N]
  Matrix context_weight;   // [M, N]
};

// Each output neuron blends its own identity feature with a normalized
// weighted sum of every other neuron's context feature:
//
//   out_i = a_ii * Wd x_i + (sum_{j != i} a_ij * Wc x_j) / (sum_{j != i} a_ij + eps)
//
// A row whose off-diagonal coefficients are all zero contributes no context.
FeatureMap sca_forward(const FeatureMap& input, const DependencyMatrix& a, const ScaParams& params);

// Reverse pass. Input and coefficient gradients follow from the forward
// definition; the weight gradients are
//   dWd = sum_i a_ii * g_i x_i^T
//   dWc = sum_i g_i y_i^T  with  y_i = (sum_{j != i} a_ij x_j) / (S_i + eps)
// and are checked against finite differences in the test suite. The
// diagonal of the coefficient gradient is zero since a_ii is pinned.
ScaGradients sca_backward(const FeatureMap& input, const DependencyMatrix& a, const ScaParams& params,
                          const FeatureMap& d_out);

struct ParamCount {
  int64_t fully_connected;  // n^2 * N * M, one weight matrix per neuron pair
  int64_t sca;              // 2 * N * M, shared identity + context matrices
};
ParamCount param_count(int64_t n, int64_t in_channels, int64_t out_channels);

}  // namespace scaseg

#endif  // SCASEG_SCA_HPP_
