// Copyright 2026 The cttlstm Authors. Apache 2.0 License.
//
// Oracle suite behind `cttl verify`: algorithm equivalence, gradient checks
// and metric oracles, each reported as a named pass/fail line.
#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "cttl/autodiff.hpp"
#include "cttl/ctt.hpp"

namespace cttl {

// Deliberate defects for demonstrating that the checks can fail.
enum class Mutation {
  kNone,
  kTransposeKernel,  // swaps the spatial axes of every factor fed to ctt_linear
};

struct VerifyOptions {
  bool quick = false;
  Mutation mutation = Mutation::kNone;
  std::uint64_t seed = 1;
};

struct CheckResult {
  std::string name;
  bool passed = false;
  std::string detail;
  double seconds = 0;
};

std::vector<CheckResult> run_verify(const VerifyOptions& opts,
                                    const std::function<void(const CheckResult&)>& on_result = {});

// Largest relative disagreement between the two CTT algorithms over a sweep.
// Relative error is max|naive - linear| / max|naive| per instance.
struct EquivalenceReport {
  double circular_double = 0;
  double circular_single = 0;
  double interior_double = 0;  // ZeroSame, margin N (K - 1) / 2
  std::size_t instances = 0;
};

EquivalenceReport ctt_equivalence_sweep(const std::vector<std::size_t>& orders,
                                        const std::vector<std::size_t>& ranks,
                                        const std::vector<std::size_t>& kernels,
                                        std::size_t instances, std::size_t size,
                                        std::uint64_t seed, Mutation mutation = Mutation::kNone);

// Max relative error between tape gradients of `loss` and central
// differences, over every element of every listed parameter.
double gradient_check(const std::function<Var<double>()>& loss,
                      const std::vector<Var<double>>& params, double eps = 1e-5);

// Spatially transposed copy of a [kh, kw, ci, co] kernel.
template <typename T>
Tensor<T> transpose_spatial(const Tensor<T>& k);

}  // namespace cttl
