// Copyright 2026 The cttlstm Authors. Apache 2.0 License.
#include "cttl/autodiff.hpp"

#include <algorithm>

namespace cttl {

template <typename T>
void accumulate(Tensor<T>& dst, const Tensor<T>& src) {
  if (!dst.same_shape(src))
    throw ShapeError("accumulate: " + shape_str(dst.dims()) + " vs " + shape_str(src.dims()));
  T* d = dst.raw();
  const T* s = src.raw();
  for (std::size_t i = 0; i < dst.size(); ++i) d[i] += s[i];
}

template <typename T>
void Tape<T>::push(const std::shared_ptr<Node<T>>& n) {
  if (index_.emplace(n.get(), order_.size()).second) order_.push_back(n);
}

template <typename T>
void Tape<T>::watch(const Var<T>& leaf) {
  if (!leaf) throw Error("watch: empty variable");
  push(leaf.shared());
}

template <typename T>
Var<T> Tape<T>::apply(Tensor<T> value, std::vector<Var<T>> inputs, BackwardFn<T> fn) {
  Tape* tape = active();
  const bool track =
      tape && std::any_of(inputs.begin(), inputs.end(),
                          [](const Var<T>& v) { return v.requires_grad(); });
  auto n = std::make_shared<Node<T>>();
  n->value = std::move(value);
  if (!track) return Var<T>(std::move(n));
  n->requires_grad = true;
  n->backward = std::move(fn);
  n->parents.reserve(inputs.size());
  for (auto& in : inputs) {
    // Leaves reached through an operation are on the tape implicitly.
    if (in.requires_grad() && !in.node()->backward) tape->push(in.shared());
    n->parents.push_back(in.shared());
  }
  tape->push(n);
  return Var<T>(std::move(n));
}

template <typename T>
void Tape<T>::backward(const Var<T>& root) {
  if (!root || !contains(root)) throw Error("backward: root was not recorded on this tape");
  if (root.value().size() != 1)
    throw ShapeError("backward: root must hold a single element, got " +
                     shape_str(root.dims()));
  grads_.clear();
  grads_.emplace(root.node(), Tensor<T>::ones(root.dims()));
  std::vector<Tensor<T>*> slots;
  for (std::size_t k = order_.size(); k-- > 0;) {
    const Node<T>* n = order_[k].get();
    if (!n->backward) continue;
    auto it = grads_.find(n);
    if (it == grads_.end()) continue;
    slots.assign(n->parents.size(), nullptr);
    for (std::size_t p = 0; p < n->parents.size(); ++p) {
      const Node<T>* parent = n->parents[p].get();
      if (!parent->requires_grad) continue;
      auto slot = grads_.try_emplace(parent, parent->value.dims()).first;
      slots[p] = &slot->second;
    }
    n->backward(*n, it->second, std::span<Tensor<T>* const>(slots));
  }
}

template <typename T>
const Tensor<T>& Tape<T>::grad(const Var<T>& v) const {
  if (!v || !contains(v)) throw Error("grad: variable is not on this tape");
  auto it = grads_.find(v.node());
  if (it == grads_.end()) it = grads_.try_emplace(v.node(), v.dims()).first;
  return it->second;
}

template <typename T>
std::vector<Tensor<T>> Tape<T>::gradients(std::span<const Var<T>> params) const {
  std::vector<Tensor<T>> out;
  out.reserve(params.size());
  for (const auto& p : params) out.push_back(contains(p) ? grad(p) : Tensor<T>(p.dims()));
  return out;
}

namespace {

template <typename T>
const Tensor<T>& pv(const Node<T>& self, std::size_t i) {
  return self.parents[i]->value;
}

}  // namespace

template <typename T>
Var<T> add(const Var<T>& a, const Var<T>& b) {
  return Tape<T>::apply(cttl::add(a.value(), b.value()), {a, b},
                        [](const Node<T>&, const Tensor<T>& g, std::span<Tensor<T>* const> pg) {
                          if (pg[0]) accumulate(*pg[0], g);
                          if (pg[1]) accumulate(*pg[1], g);
                        });
}

template <typename T>
Var<T> sub(const Var<T>& a, const Var<T>& b) {
  return Tape<T>::apply(cttl::sub(a.value(), b.value()), {a, b},
                        [](const Node<T>&, const Tensor<T>& g, std::span<Tensor<T>* const> pg) {
                          if (pg[0]) accumulate(*pg[0], g);
                          if (pg[1]) accumulate(*pg[1], cttl::scale(g, T(-1)));
                        });
}

template <typename T>
Var<T> mul(const Var<T>& a, const Var<T>& b) {
  return Tape<T>::apply(
      cttl::mul(a.value(), b.value()), {a, b},
      [](const Node<T>& self, const Tensor<T>& g, std::span<Tensor<T>* const> pg) {
        if (pg[0]) accumulate(*pg[0], cttl::mul(g, pv(self, 1)));
        if (pg[1]) accumulate(*pg[1], cttl::mul(g, pv(self, 0)));
      });
}

template <typename T>
Var<T> scale(const Var<T>& a, T s) {
  return Tape<T>::apply(cttl::scale(a.value(), s), {a},
                        [s](const Node<T>&, const Tensor<T>& g, std::span<Tensor<T>* const> pg) {
                          if (pg[0]) accumulate(*pg[0], cttl::scale(g, s));
                        });
}

template <typename T>
Var<T> sigmoid(const Var<T>& a) {
  return Tape<T>::apply(
      cttl::sigmoid(a.value()), {a},
      [](const Node<T>& self, const Tensor<T>& g, std::span<Tensor<T>* const> pg) {
        if (!pg[0]) return;
        const Tensor<T>& y = self.value;
        T* d = pg[0]->raw();
        for (std::size_t i = 0; i < y.size(); ++i) d[i] += g[i] * y[i] * (T(1) - y[i]);
      });
}

template <typename T>
Var<T> tanh(const Var<T>& a) {
  return Tape<T>::apply(
      cttl::tanh(a.value()), {a},
      [](const Node<T>& self, const Tensor<T>& g, std::span<Tensor<T>* const> pg) {
        if (!pg[0]) return;
        const Tensor<T>& y = self.value;
        T* d = pg[0]->raw();
        for (std::size_t i = 0; i < y.size(); ++i) d[i] += g[i] * (T(1) - y[i] * y[i]);
      });
}

template <typename T>
Var<T> abs(const Var<T>& a) {
  return Tape<T>::apply(
      cttl::abs(a.value()), {a},
      [](const Node<T>& self, const Tensor<T>& g, std::span<Tensor<T>* const> pg) {
        if (!pg[0]) return;
        const Tensor<T>& x = pv(self, 0);
        T* d = pg[0]->raw();
        for (std::size_t i = 0; i < x.size(); ++i)
          d[i] += g[i] * T((x[i] > 0) - (x[i] < 0));
      });
}

template <typename T>
Var<T> sum(const Var<T>& a) {
  return Tape<T>::apply(Tensor<T>({1}, cttl::sum(a.value())), {a},
                        [](const Node<T>&, const Tensor<T>& g, std::span<Tensor<T>* const> pg) {
                          if (!pg[0]) return;
                          const T s = g[0];
                          for (auto& v : pg[0]->data()) v += s;
                        });
}

template <typename T>
Var<T> conv2d(const Var<T>& input, const Var<T>& kernel, PadMode mode) {
  return Tape<T>::apply(
      cttl::conv2d(input.value(), kernel.value(), mode), {input, kernel},
      [mode](const Node<T>& self, const Tensor<T>& g, std::span<Tensor<T>* const> pg) {
        const Tensor<T>& x = pv(self, 0);
        const Tensor<T>& k = pv(self, 1);
        if (pg[0]) accumulate(*pg[0], conv2d_grad_input(g, k, mode));
        if (pg[1]) accumulate(*pg[1], conv2d_grad_kernel(x, g, k.dim(0), k.dim(1), mode));
      });
}

template <typename T>
Var<T> add_channel_bias(const Var<T>& x, const Var<T>& bias) {
  return Tape<T>::apply(cttl::add_channel_bias(x.value(), bias.value()), {x, bias},
                        [](const Node<T>&, const Tensor<T>& g, std::span<Tensor<T>* const> pg) {
                          if (pg[0]) accumulate(*pg[0], g);
                          if (pg[1]) accumulate(*pg[1], channel_sum(g));
                        });
}

template <typename T>
Var<T> concat_channels(std::span<const Var<T>> parts) {
  std::vector<Tensor<T>> values;
  values.reserve(parts.size());
  for (const auto& p : parts) values.push_back(p.value());
  std::vector<Var<T>> inputs(parts.begin(), parts.end());
  return Tape<T>::apply(
      cttl::concat_channels(std::span<const Tensor<T>>(values)), std::move(inputs),
      [](const Node<T>& self, const Tensor<T>& g, std::span<Tensor<T>* const> pg) {
        std::size_t offset = 0;
        for (std::size_t i = 0; i < self.parents.size(); ++i) {
          const std::size_t c = self.parents[i]->value.dim(2);
          if (pg[i]) accumulate(*pg[i], cttl::slice_channels(g, offset, c));
          offset += c;
        }
      });
}

template <typename T>
Var<T> slice_channels(const Var<T>& x, std::size_t begin, std::size_t count) {
  return Tape<T>::apply(
      cttl::slice_channels(x.value(), begin, count), {x},
      [begin, count](const Node<T>&, const Tensor<T>& g, std::span<Tensor<T>* const> pg) {
        if (!pg[0]) return;
        Tensor<T>& d = *pg[0];
        const std::size_t c = d.dim(2), hw = d.dim(0) * d.dim(1);
        for (std::size_t s = 0; s < hw; ++s)
          for (std::size_t k = 0; k < count; ++k) d[s * c + begin + k] += g[s * count + k];
      });
}

template <typename T>
Var<T> compose_kernels(const Var<T>& a, const Var<T>& b) {
  return Tape<T>::apply(
      cttl::compose_kernels(a.value(), b.value()), {a, b},
      [](const Node<T>& self, const Tensor<T>& g, std::span<Tensor<T>* const> pg) {
        Tensor<T> ga, gb;
        compose_kernels_grad(g, pv(self, 0), pv(self, 1), pg[0] ? &ga : nullptr,
                             pg[1] ? &gb : nullptr);
        if (pg[0]) accumulate(*pg[0], ga);
        if (pg[1]) accumulate(*pg[1], gb);
      });
}

#define CTTL_INSTANTIATE_AD(T)                                                   \
  template class Tape<T>;                                                        \
  template void accumulate(Tensor<T>&, const Tensor<T>&);                        \
  template Var<T> add(const Var<T>&, const Var<T>&);                             \
  template Var<T> sub(const Var<T>&, const Var<T>&);                             \
  template Var<T> mul(const Var<T>&, const Var<T>&);                             \
  template Var<T> scale(const Var<T>&, T);                                       \
  template Var<T> sigmoid(const Var<T>&);                                        \
  template Var<T> tanh(const Var<T>&);                                           \
  template Var<T> abs(const Var<T>&);                                            \
  template Var<T> sum(const Var<T>&);                                            \
  template Var<T> conv2d(const Var<T>&, const Var<T>&, PadMode);                 \
  template Var<T> add_channel_bias(const Var<T>&, const Var<T>&);                \
  template Var<T> concat_channels(std::span<const Var<T>>);                      \
  template Var<T> slice_channels(const Var<T>&, std::size_t, std::size_t);       \
  template Var<T> compose_kernels(const Var<T>&, const Var<T>&);

CTTL_INSTANTIATE_AD(float)
CTTL_INSTANTIATE_AD(double)

}  // namespace cttl
