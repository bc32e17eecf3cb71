// Copyright 2026 The cttlstm Authors. Apache 2.0 License.
//
// Pure tensor kernels. Every function here is side-effect free apart from the
// thread-local FLOP meter, and produces a new tensor.
#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "cttl/tensor.hpp"

namespace cttl {

// Boundary policy for same-size convolution. Under kCircularSame reads wrap
// modulo the spatial extents, which makes kernel composition exact.
enum class PadMode { kZeroSame, kCircularSame };

// Convolutions are cross-correlations (no kernel flip), project-wide:
//   out[y,x,o] = sum_{dy,dx,i} in[y+dy-kh/2, x+dx-kw/2, i] * ker[dy,dx,i,o]
template <typename T>
Tensor<T> conv2d(const Tensor<T>& input, const Tensor<T>& kernel, PadMode mode);

// Adjoint of conv2d with respect to its input.
template <typename T>
Tensor<T> conv2d_grad_input(const Tensor<T>& grad_out, const Tensor<T>& kernel,
                            PadMode mode);

// Adjoint of conv2d with respect to its kernel.
template <typename T>
Tensor<T> conv2d_grad_kernel(const Tensor<T>& input, const Tensor<T>& grad_out,
                             std::size_t kh, std::size_t kw, PadMode mode);

// Kernel of the composite map x -> conv2d(conv2d(x, b), a).
// a: [ka,ka,c_mid,c_out], b: [kb,kb,c_in,c_mid] -> [ka+kb-1, ka+kb-1, c_in, c_out]
template <typename T>
Tensor<T> compose_kernels(const Tensor<T>& a, const Tensor<T>& b);

template <typename T>
void compose_kernels_grad(const Tensor<T>& grad_out, const Tensor<T>& a, const Tensor<T>& b,
                          Tensor<T>* grad_a, Tensor<T>* grad_b);

// Reverses both spatial axes; conv2d(x, flip_kernel(k)) is a true convolution.
template <typename T>
Tensor<T> flip_kernel(const Tensor<T>& kernel);

// Stacks rank-3 [h,w,c] tensors along the channel axis, in argument order.
template <typename T>
Tensor<T> concat_channels(std::span<const Tensor<T>> parts);

template <typename T>
Tensor<T> slice_channels(const Tensor<T>& x, std::size_t begin, std::size_t count);

template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b);
template <typename T>
Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b);
// Hadamard product.
template <typename T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b);
template <typename T>
Tensor<T> scale(const Tensor<T>& a, T s);
template <typename T>
Tensor<T> sigmoid(const Tensor<T>& a);
template <typename T>
Tensor<T> tanh(const Tensor<T>& a);
template <typename T>
Tensor<T> abs(const Tensor<T>& a);
template <typename T>
Tensor<T> sign(const Tensor<T>& a);
template <typename T>
Tensor<T> clamp(const Tensor<T>& a, T lo, T hi);
template <typename T>
T sum(const Tensor<T>& a);

// x[..., c] + bias[c] over the trailing axis.
template <typename T>
Tensor<T> add_channel_bias(const Tensor<T>& x, const Tensor<T>& bias);
// Sum over every axis but the last.
template <typename T>
Tensor<T> channel_sum(const Tensor<T>& x);

// Glorot uniform: i.i.d. U(-b, b) with b = sqrt(6 / (fan_in + fan_out)).
template <typename T>
Tensor<T> xavier_init(const Shape& dims, std::size_t fan_in, std::size_t fan_out,
                      std::uint64_t seed);

// Thread-local count of floating-point operations executed by the kernels in
// this header. A multiply-accumulate counts as 2, an elementwise op as 1.
namespace flops {
std::uint64_t& counter() noexcept;

class Scope {
 public:
  Scope() : start_(counter()) {}
  std::uint64_t count() const noexcept { return counter() - start_; }

 private:
  std::uint64_t start_;
};
}  // namespace flops

}  // namespace cttl
