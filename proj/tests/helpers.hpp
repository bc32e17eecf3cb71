// Copyright 2026 The cttlstm Authors. Apache 2.0 License.
#pragma once

#include <filesystem>
#include <string>

#include "cttl/rng.hpp"
#include "cttl/tensor.hpp"

namespace cttl::testing {

template <typename T = double>
Tensor<T> random_tensor(const Shape& dims, Rng& rng, double lo = -1.0, double hi = 1.0) {
  Tensor<T> t(dims);
  for (auto& v : t.data()) v = T(rng.uniform(lo, hi));
  return t;
}

// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag);
  ~TempDir();
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const noexcept { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

}  // namespace cttl::testing
