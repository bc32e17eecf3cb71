// Copyright 2026 The cttlstm Authors. Apache 2.0 License.
//
// Binary persistence.
//
// Tensor container, little-endian throughout:
//   "CTTL" | version u8 (=1) | scalar code u8 (0 f32, 1 f64) | rank u8 | 0 u8
//   | rank x u64 extents | row-major payload
//
// Checkpoint:
//   u64 entry count, then per entry u16 name length | UTF-8 name | container.
//   The final entry, "__config", holds the configuration text as
//   u64 byte length | bytes in place of a container.
#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <memory>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "cttl/error.hpp"
#include "cttl/tensor.hpp"

namespace cttl {

enum class ScalarCode : std::uint8_t { kF32 = 0, kF64 = 1 };

using AnyTensor = std::variant<Tensor<float>, Tensor<double>>;

inline constexpr std::uint8_t kContainerVersion = 1;
inline constexpr const char* kConfigEntry = "__config";

template <typename T>
constexpr ScalarCode scalar_code();
template <>
constexpr ScalarCode scalar_code<float>() { return ScalarCode::kF32; }
template <>
constexpr ScalarCode scalar_code<double>() { return ScalarCode::kF64; }

std::size_t scalar_width(ScalarCode code);

// Container header. Extents are validated against the rank limit of 255.
struct ContainerHeader {
  ScalarCode code = ScalarCode::kF32;
  Shape dims;

  std::size_t payload_bytes() const { return shape_size(dims) * scalar_width(code); }
  std::size_t header_bytes() const { return 8 + 8 * dims.size(); }
};

void write_header(std::ostream& out, const ContainerHeader& h);
ContainerHeader read_header(std::istream& in);

template <typename T>
void write_tensor(std::ostream& out, const Tensor<T>& t);
AnyTensor read_tensor(std::istream& in);
// Reads a container and requires its scalar code to match T.
template <typename T>
Tensor<T> read_tensor_as(std::istream& in);

template <typename T>
void save_tensor(const std::filesystem::path& path, const Tensor<T>& t);
AnyTensor load_tensor(const std::filesystem::path& path);
template <typename T>
Tensor<T> load_tensor_as(const std::filesystem::path& path);

// Streams a large f32 container to disk one leading-axis slice at a time.
class ContainerWriter {
 public:
  ContainerWriter(const std::filesystem::path& path, Shape dims);
  ~ContainerWriter();
  ContainerWriter(const ContainerWriter&) = delete;
  ContainerWriter& operator=(const ContainerWriter&) = delete;

  // Appends exactly one slice of prod(dims[1:]) scalars.
  void append(std::span<const float> slice);
  // Verifies every slice was written and flushes. Called by the destructor
  // when omitted, which then swallows errors.
  void close();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

// Random access to leading-axis slices of an f32 container on disk.
class ContainerReader {
 public:
  explicit ContainerReader(const std::filesystem::path& path);
  ~ContainerReader();
  ContainerReader(ContainerReader&&) noexcept;
  ContainerReader& operator=(ContainerReader&&) noexcept;

  const Shape& dims() const;
  std::size_t count() const { return dims()[0]; }
  // Slice i with the leading axis dropped.
  Tensor<float> slice(std::size_t i);

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

struct CheckpointEntry {
  std::string name;
  AnyTensor tensor;
};

struct Checkpoint {
  std::vector<CheckpointEntry> entries;
  std::string config;

  const CheckpointEntry* find(const std::string& name) const;
  template <typename T>
  const Tensor<T>& get(const std::string& name) const;
};

void write_checkpoint(std::ostream& out, const Checkpoint& ckpt);
Checkpoint read_checkpoint(std::istream& in);
void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& path);

// MNIST IDX images (magic 0x00000803, rank 3, 28 x 28), scaled to [0, 1].
std::vector<Tensor<float>> read_idx(std::istream& in);
std::vector<Tensor<float>> read_idx(const std::filesystem::path& path);

// Binary PGM (P5, maxval 255) with round-half-up quantization v * 255.
// Accepts [h, w] or [h, w, 1] frames with values in [0, 1].
void write_pgm(const std::filesystem::path& path, const Tensor<float>& frame);
// Writes frame_0000.pgm, frame_0001.pgm, ... for a [T, h, w, 1] sequence and
// returns the paths.
std::vector<std::filesystem::path> export_frames(const Tensor<float>& seq,
                                                 const std::filesystem::path& dir);

std::vector<char> read_file(const std::filesystem::path& path);
// 64-bit FNV-1a hash of a file's bytes.
std::uint64_t file_checksum(const std::filesystem::path& path);

}  // namespace cttl
