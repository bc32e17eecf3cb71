// Copyright 2026 The cttlstm Authors. Apache 2.0 License.
//
// Tape-based reverse-mode differentiation over dense tensors.
//
// A Var is a handle to an immutable value node. Operations on Vars consult the
// tape that is active on the calling thread: when one is active and at least
// one operand requires a gradient, the result is recorded together with its
// adjoint rule. Otherwise the result is a plain constant and nothing is kept
// alive, so inference runs in bounded memory.
#pragma once

#include <functional>
#include <memory>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "cttl/ops.hpp"
#include "cttl/tensor.hpp"

namespace cttl {

template <typename T>
struct Node;

// Adjoint rule. `parent_grads[i]` is null when parent i needs no gradient;
// rules must accumulate into the slots, never overwrite them.
template <typename T>
using BackwardFn = std::function<void(const Node<T>& self, const Tensor<T>& grad_out,
                                      std::span<Tensor<T>* const> parent_grads)>;

template <typename T>
struct Node {
  Tensor<T> value;
  std::vector<std::shared_ptr<Node>> parents;
  BackwardFn<T> backward;
  bool requires_grad = false;
  std::string name;
};

template <typename T>
class Var {
 public:
  Var() = default;
  explicit Var(std::shared_ptr<Node<T>> node) : node_(std::move(node)) {}

  static Var constant(Tensor<T> value) {
    auto n = std::make_shared<Node<T>>();
    n->value = std::move(value);
    return Var(std::move(n));
  }

  static Var parameter(Tensor<T> value, std::string name = {}) {
    auto n = std::make_shared<Node<T>>();
    n->value = std::move(value);
    n->requires_grad = true;
    n->name = std::move(name);
    return Var(std::move(n));
  }

  const Tensor<T>& value() const { return node_->value; }
  const Shape& dims() const { return node_->value.dims(); }
  bool requires_grad() const { return node_ && node_->requires_grad; }
  const std::string& name() const { return node_->name; }
  Node<T>* node() const noexcept { return node_.get(); }
  const std::shared_ptr<Node<T>>& shared() const noexcept { return node_; }
  explicit operator bool() const noexcept { return static_cast<bool>(node_); }

  // Replaces the value of a leaf in place (optimizer updates). Never call
  // while a forward pass that reads this leaf is running on another thread.
  void assign(Tensor<T> value) const {
    if (!value.same_shape(node_->value))
      throw ShapeError("assign: shape change " + shape_str(node_->value.dims()) + " -> " +
                       shape_str(value.dims()));
    node_->value = std::move(value);
  }

 private:
  std::shared_ptr<Node<T>> node_;
};

template <typename T>
class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  // Makes a tape the recording target on the current thread.
  class Scope {
   public:
    explicit Scope(Tape& tape) : previous_(slot()) { slot() = &tape; }
    ~Scope() { slot() = previous_; }
    Scope(const Scope&) = delete;
    Scope& operator=(const Scope&) = delete;

   private:
    Tape* previous_;
  };

  static Tape* active() noexcept { return slot(); }

  // Registers a leaf so its gradient can be queried after backward().
  void watch(const Var<T>& leaf);

  // Builds the result node of an operation, recording it when appropriate.
  static Var<T> apply(Tensor<T> value, std::vector<Var<T>> inputs, BackwardFn<T> fn);

  std::size_t size() const noexcept { return order_.size(); }
  bool contains(const Var<T>& v) const { return index_.count(v.node()) != 0; }

  // Reverse sweep from a single-element root recorded on this tape.
  void backward(const Var<T>& root);

  // Gradient of the last backward() root with respect to `v`. Zero when v is
  // on the tape but the root does not depend on it.
  const Tensor<T>& grad(const Var<T>& v) const;

  std::vector<Tensor<T>> gradients(std::span<const Var<T>> params) const;

 private:
  static Tape*& slot() noexcept {
    thread_local Tape* current = nullptr;
    return current;
  }
  void push(const std::shared_ptr<Node<T>>& n);

  std::vector<std::shared_ptr<Node<T>>> order_;
  std::unordered_map<const Node<T>*, std::size_t> index_;
  mutable std::unordered_map<const Node<T>*, Tensor<T>> grads_;
};

// Differentiable counterparts of the tensor kernels.
template <typename T>
Var<T> add(const Var<T>& a, const Var<T>& b);
template <typename T>
Var<T> sub(const Var<T>& a, const Var<T>& b);
template <typename T>
Var<T> mul(const Var<T>& a, const Var<T>& b);
template <typename T>
Var<T> scale(const Var<T>& a, T s);
template <typename T>
Var<T> sigmoid(const Var<T>& a);
template <typename T>
Var<T> tanh(const Var<T>& a);
template <typename T>
Var<T> abs(const Var<T>& a);
// Single-element [1] result.
template <typename T>
Var<T> sum(const Var<T>& a);
template <typename T>
Var<T> conv2d(const Var<T>& input, const Var<T>& kernel, PadMode mode);
template <typename T>
Var<T> add_channel_bias(const Var<T>& x, const Var<T>& bias);
template <typename T>
Var<T> concat_channels(std::span<const Var<T>> parts);
template <typename T>
Var<T> slice_channels(const Var<T>& x, std::size_t begin, std::size_t count);
template <typename T>
Var<T> compose_kernels(const Var<T>& a, const Var<T>& b);

// Adds src into dst elementwise; shapes must match.
template <typename T>
void accumulate(Tensor<T>& dst, const Tensor<T>& src);

}  // namespace cttl
