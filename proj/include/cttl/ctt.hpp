// Copyright 2026 The cttlstm Authors. Apache 2.0 License.
//
// Convolutional tensor-train decomposition (CTTD) and the CTT transition
//
//   Phi = sum_{i=1..N} K(i) * H~(i),   K(1) = G(1),   K(i) = K(i-1) o G(i)
//
// where `o` is kernel composition with channel contraction. Factor G(i) is a
// [K, K, C(i), C(i-1)] kernel, i.e. it reads C(i) channels and writes C(i-1);
// C(0) is the output width of Phi.
//
// Also holds the classic tensor-train format used to compress a dense
// input-to-state kernel for the TT-ConvLSTM baseline.
#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "cttl/autodiff.hpp"
#include "cttl/tensor.hpp"

namespace cttl {

// Channel widths C(0), ..., C(N) and base filter size of a factor chain.
struct CttShape {
  std::size_t kernel = 0;
  std::vector<std::size_t> ranks;  // ranks[i] == C(i), size N + 1

  std::size_t order() const { return ranks.empty() ? 0 : ranks.size() - 1; }
  // Spatial extent of K(i): i (K - 1) + 1.
  std::size_t composed_extent(std::size_t i) const { return i * (kernel - 1) + 1; }
  // sum_i K^2 C(i) C(i-1).
  std::size_t parameter_count() const;
};

// Validates a factor chain and returns its shape. Throws ShapeError when a
// factor is not rank 4, extents differ or are even, or the rank chain breaks.
template <typename T>
CttShape ctt_shape(std::span<const Tensor<T>> factors);
template <typename T>
CttShape ctt_shape(std::span<const Var<T>> factors);

template <typename T>
struct CttFactors {
  std::vector<Tensor<T>> factors;  // G(1) ... G(N)

  CttShape shape() const { return ctt_shape(std::span<const Tensor<T>>(factors)); }
  std::size_t order() const { return factors.size(); }

  // Xavier-initialized chain for the given shape.
  static CttFactors random(const CttShape& shape, std::uint64_t seed);
};

// K(i) for 1 <= i <= N, built by composing G(i) onto K(i-1).
template <typename T>
Var<T> reconstruct_kernel(std::span<const Var<T>> factors, std::size_t i);
template <typename T>
Tensor<T> reconstruct_kernel(const CttFactors<T>& f, std::size_t i);

// Explicit-kernel evaluation: builds K(1..N) then sums N padded convolutions,
// accumulating i = 1..N in ascending order. Cubic in N.
template <typename T>
Var<T> ctt_naive(std::span<const Var<T>> states, std::span<const Var<T>> factors,
                 PadMode mode);
template <typename T>
Tensor<T> ctt_naive(std::span<const Tensor<T>> states, const CttFactors<T>& f, PadMode mode);

// Backward recursion V(i-1) = G(i) * (V(i) + H~(i)), V(N) = 0; returns V(0).
// Exactly N convolutions with K x K kernels. Linear in N.
template <typename T>
Var<T> ctt_linear(std::span<const Var<T>> states, std::span<const Var<T>> factors,
                  PadMode mode);
template <typename T>
Tensor<T> ctt_linear(std::span<const Tensor<T>> states, const CttFactors<T>& f, PadMode mode);

enum class CttAlgorithm { kNaive, kLinear };

template <typename T>
Var<T> ctt_apply(std::span<const Var<T>> states, std::span<const Var<T>> factors,
                 PadMode mode, CttAlgorithm alg);

// ---------------------------------------------------------------------------
// Classic tensor-train format of a dense [K, K, C_in, C_out] kernel.
//
//   W[i, j, (s1..sN), (t1..tN)] = sum_r G0[i,j,r0] G1[t1,s1,r0,r1] ... GN[tN,sN,r(N-1)]
//
// with C_out = prod T, C_in = prod S, and the first mode index most
// significant in both channel reshapes.
struct TtShape {
  std::size_t kernel = 0;
  std::vector<std::size_t> out_factors;  // T1..TN
  std::vector<std::size_t> in_factors;   // S1..SN
  std::vector<std::size_t> ranks;        // R0..R(N-1)

  std::size_t order() const { return out_factors.size(); }
  std::size_t out_channels() const;
  std::size_t in_channels() const;
  std::size_t parameter_count() const;
  // Throws ShapeError on inconsistent lengths or zero extents.
  void validate() const;
  // Shapes of G0, G1, ..., GN.
  std::vector<Shape> factor_shapes() const;
};

// Splits n into `parts` factors whose product is n, as balanced as the prime
// factorization allows, largest first.
std::vector<std::size_t> balanced_factorization(std::size_t n, std::size_t parts);

template <typename T>
struct TtCompressedKernel {
  TtShape shape;
  std::vector<Tensor<T>> factors;  // G0, G1, ..., GN

  static TtCompressedKernel random(const TtShape& shape, std::uint64_t seed);
  void validate() const;
};

template <typename T>
Var<T> tt_reconstruct_w(const TtShape& shape, std::span<const Var<T>> factors);
template <typename T>
Tensor<T> tt_reconstruct_w(const TtCompressedKernel<T>& k);

// Differentiable reshape (row-major reinterpretation).
template <typename T>
Var<T> reshape(const Var<T>& x, Shape dims);

// Merges a TT chain prefix Q[Ta,Sa,R0,Rm] with a core C[Tb,Sb,Rm,Rn] into
// [Ta*Tb, Sa*Sb, R0, Rn].
template <typename T>
Var<T> tt_merge(const Var<T>& prefix, const Var<T>& core);

// Contracts the spatial factor G0[K,K,R0] with a full chain Q[T,S,R0,1] into
// the dense kernel [K, K, S, T].
template <typename T>
Var<T> tt_spatial(const Var<T>& spatial, const Var<T>& chain);

}  // namespace cttl
