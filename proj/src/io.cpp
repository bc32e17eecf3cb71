// Copyright 2026 The cttlstm Authors. Apache 2.0 License.
#include "cttl/io.hpp"

#include <array>
#include <bit>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <istream>
#include <limits>
#include <ostream>
#include <set>

namespace cttl {

namespace {

using Kind = FormatError::Kind;

template <typename U>
void put_le(std::ostream& out, U v) {
  std::array<char, sizeof(U)> b;
  for (std::size_t i = 0; i < sizeof(U); ++i) b[i] = char((v >> (8 * i)) & 0xff);
  out.write(b.data(), b.size());
}

bool get_bytes(std::istream& in, char* dst, std::size_t n) {
  in.read(dst, std::streamsize(n));
  return std::size_t(in.gcount()) == n;
}

template <typename U>
U get_le(std::istream& in, Kind on_short, const char* what) {
  std::array<unsigned char, sizeof(U)> b;
  if (!get_bytes(in, reinterpret_cast<char*>(b.data()), b.size()))
    throw FormatError(on_short, std::string("unexpected end of data reading ") + what);
  U v = 0;
  for (std::size_t i = 0; i < sizeof(U); ++i) v |= U(b[i]) << (8 * i);
  return v;
}

// Bytes left in a seekable stream, or max() when unknown.
std::size_t remaining(std::istream& in) {
  const auto here = in.tellg();
  if (here < 0) return std::numeric_limits<std::size_t>::max();
  in.seekg(0, std::ios::end);
  const auto end = in.tellg();
  in.seekg(here);
  if (end < 0) return std::numeric_limits<std::size_t>::max();
  return std::size_t(end - here);
}

template <typename T>
void write_payload(std::ostream& out, std::span<const T> data) {
  if constexpr (std::endian::native == std::endian::little) {
    out.write(reinterpret_cast<const char*>(data.data()), std::streamsize(data.size_bytes()));
  } else {
    using U = std::conditional_t<sizeof(T) == 4, std::uint32_t, std::uint64_t>;
    for (T v : data) put_le(out, std::bit_cast<U>(v));
  }
}

template <typename T>
void read_payload(std::istream& in, std::span<T> data) {
  if (!get_bytes(in, reinterpret_cast<char*>(data.data()), data.size_bytes()))
    throw FormatError(Kind::kTruncated, "tensor payload is truncated");
  if constexpr (std::endian::native != std::endian::little) {
    using U = std::conditional_t<sizeof(T) == 4, std::uint32_t, std::uint64_t>;
    for (T& v : data) {
      U u = std::bit_cast<U>(v), r = 0;
      for (std::size_t i = 0; i < sizeof(U); ++i) r |= ((u >> (8 * i)) & 0xff) << (8 * (sizeof(U) - 1 - i));
      v = std::bit_cast<T>(r);
    }
  }
}

template <typename T>
Tensor<T> read_body(std::istream& in, const ContainerHeader& h) {
  if (h.payload_bytes() > remaining(in))
    throw FormatError(Kind::kTruncated, "tensor payload of " + std::to_string(h.payload_bytes()) +
                                            " bytes exceeds the data available");
  Tensor<T> t(h.dims);
  read_payload(in, t.data());
  return t;
}

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw FormatError(Kind::kIo, "cannot open " + path.string() + " for writing");
  return f;
}

std::ifstream open_in(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw FormatError(Kind::kIo, "cannot open " + path.string());
  return f;
}

void finish(std::ostream& out, const std::filesystem::path& path) {
  out.flush();
  if (!out) throw FormatError(Kind::kIo, "write to " + path.string() + " failed");
}

}  // namespace

std::size_t scalar_width(ScalarCode code) { return code == ScalarCode::kF32 ? 4 : 8; }

void write_header(std::ostream& out, const ContainerHeader& h) {
  if (h.dims.empty() || h.dims.size() > 255)
    throw ShapeError("container rank must lie in 1..255, got " + std::to_string(h.dims.size()));
  out.write("CTTL", 4);
  const char meta[4] = {char(kContainerVersion), char(h.code), char(h.dims.size()), 0};
  out.write(meta, 4);
  for (std::size_t d : h.dims) put_le<std::uint64_t>(out, d);
}

ContainerHeader read_header(std::istream& in) {
  char head[8];
  if (!get_bytes(in, head, 8)) throw FormatError(Kind::kTruncated, "container header is truncated");
  if (std::memcmp(head, "CTTL", 4) != 0) throw FormatError(Kind::kBadMagic, "not a CTTL container");
  if (std::uint8_t(head[4]) != kContainerVersion)
    throw FormatError(Kind::kVersion,
                      "unsupported container version " + std::to_string(std::uint8_t(head[4])));
  if (std::uint8_t(head[5]) > 1)
    throw FormatError(Kind::kBadType, "unknown scalar code " + std::to_string(std::uint8_t(head[5])));
  if (head[6] == 0) throw FormatError(Kind::kBadRank, "container rank is zero");
  if (head[7] != 0) throw FormatError(Kind::kCorruptEntry, "container reserved byte is nonzero");
  ContainerHeader h;
  h.code = ScalarCode(head[5]);
  std::size_t total = 1;
  for (std::size_t i = 0; i < std::uint8_t(head[6]); ++i) {
    const auto d = get_le<std::uint64_t>(in, Kind::kTruncated, "container extents");
    if (d != 0 && total > std::numeric_limits<std::size_t>::max() / 16 / d)
      throw FormatError(Kind::kBadDims, "container extents overflow");
    total *= d;
    h.dims.push_back(d);
  }
  return h;
}

template <typename T>
void write_tensor(std::ostream& out, const Tensor<T>& t) {
  write_header(out, {scalar_code<T>(), t.dims()});
  write_payload(out, t.data());
}

AnyTensor read_tensor(std::istream& in) {
  const ContainerHeader h = read_header(in);
  if (h.code == ScalarCode::kF32) return read_body<float>(in, h);
  return read_body<double>(in, h);
}

template <typename T>
Tensor<T> read_tensor_as(std::istream& in) {
  const ContainerHeader h = read_header(in);
  if (h.code != scalar_code<T>())
    throw FormatError(Kind::kBadType, "container holds the other scalar precision");
  return read_body<T>(in, h);
}

template <typename T>
void save_tensor(const std::filesystem::path& path, const Tensor<T>& t) {
  auto f = open_out(path);
  write_tensor(f, t);
  finish(f, path);
}

AnyTensor load_tensor(const std::filesystem::path& path) {
  auto f = open_in(path);
  return read_tensor(f);
}

template <typename T>
Tensor<T> load_tensor_as(const std::filesystem::path& path) {
  auto f = open_in(path);
  return read_tensor_as<T>(f);
}

// ---------------------------------------------------------------------------

struct ContainerWriter::Impl {
  std::filesystem::path path;
  std::ofstream out;
  Shape dims;
  std::size_t slice_size = 0;
  std::size_t written = 0;
  bool closed = false;
};

ContainerWriter::ContainerWriter(const std::filesystem::path& path, Shape dims)
    : impl_(std::make_unique<Impl>()) {
  if (dims.empty()) throw ShapeError("container writer needs at least one axis");
  impl_->path = path;
  impl_->out = open_out(path);
  impl_->slice_size = shape_size(Shape(dims.begin() + 1, dims.end()));
  impl_->dims = std::move(dims);
  write_header(impl_->out, {ScalarCode::kF32, impl_->dims});
}

ContainerWriter::~ContainerWriter() {
  if (impl_ && !impl_->closed) {
    try {
      close();
    } catch (const Error&) {
    }
  }
}

void ContainerWriter::append(std::span<const float> slice) {
  if (impl_->written == impl_->dims[0]) throw ShapeError("container writer: all slices written");
  if (slice.size() != impl_->slice_size)
    throw ShapeError("container writer: slice of " + std::to_string(slice.size()) +
                     " scalars, expected " + std::to_string(impl_->slice_size));
  write_payload(impl_->out, slice);
  ++impl_->written;
}

void ContainerWriter::close() {
  impl_->closed = true;
  if (impl_->written != impl_->dims[0])
    throw ShapeError("container writer: " + std::to_string(impl_->written) + " of " +
                     std::to_string(impl_->dims[0]) + " slices written");
  finish(impl_->out, impl_->path);
}

struct ContainerReader::Impl {
  std::ifstream in;
  ContainerHeader header;
  std::streamoff base = 0;
  std::size_t slice_size = 0;
};

ContainerReader::ContainerReader(const std::filesystem::path& path) : impl_(std::make_unique<Impl>()) {
  impl_->in = open_in(path);
  impl_->header = read_header(impl_->in);
  if (impl_->header.code != ScalarCode::kF32)
    throw FormatError(Kind::kBadType, path.string() + ": expected an f32 container");
  impl_->base = impl_->in.tellg();
  const Shape& d = impl_->header.dims;
  impl_->slice_size = shape_size(Shape(d.begin() + 1, d.end()));
  if (impl_->header.payload_bytes() > remaining(impl_->in))
    throw FormatError(Kind::kTruncated, path.string() + ": payload is truncated");
}

ContainerReader::~ContainerReader() = default;
ContainerReader::ContainerReader(ContainerReader&&) noexcept = default;
ContainerReader& ContainerReader::operator=(ContainerReader&&) noexcept = default;

const Shape& ContainerReader::dims() const { return impl_->header.dims; }

Tensor<float> ContainerReader::slice(std::size_t i) {
  const Shape& d = impl_->header.dims;
  if (i >= d[0]) throw ShapeError("container slice " + std::to_string(i) + " out of range");
  impl_->in.clear();
  impl_->in.seekg(impl_->base + std::streamoff(i * impl_->slice_size * 4));
  Tensor<float> t(d.size() == 1 ? Shape{1} : Shape(d.begin() + 1, d.end()));
  read_payload(impl_->in, t.data());
  return t;
}

// ---------------------------------------------------------------------------

const CheckpointEntry* Checkpoint::find(const std::string& name) const {
  for (const auto& e : entries)
    if (e.name == name) return &e;
  return nullptr;
}

template <typename T>
const Tensor<T>& Checkpoint::get(const std::string& name) const {
  const CheckpointEntry* e = find(name);
  if (!e) throw FormatError(Kind::kConfigMismatch, "checkpoint has no entry '" + name + "'");
  const auto* t = std::get_if<Tensor<T>>(&e->tensor);
  if (!t) throw FormatError(Kind::kBadType, "checkpoint entry '" + name + "' has the wrong precision");
  return *t;
}

void write_checkpoint(std::ostream& out, const Checkpoint& ckpt) {
  std::set<std::string> seen{kConfigEntry};
  for (const auto& e : ckpt.entries) {
    if (e.name.size() > 0xffff) throw FormatError(Kind::kCorruptEntry, "entry name is too long");
    if (!seen.insert(e.name).second)
      throw FormatError(Kind::kNameCollision, "duplicate checkpoint entry '" + e.name + "'");
  }
  put_le<std::uint64_t>(out, ckpt.entries.size() + 1);
  auto put_name = [&](const std::string& n) {
    put_le<std::uint16_t>(out, std::uint16_t(n.size()));
    out.write(n.data(), std::streamsize(n.size()));
  };
  for (const auto& e : ckpt.entries) {
    put_name(e.name);
    std::visit([&](const auto& t) { write_tensor(out, t); }, e.tensor);
  }
  put_name(kConfigEntry);
  put_le<std::uint64_t>(out, ckpt.config.size());
  out.write(ckpt.config.data(), std::streamsize(ckpt.config.size()));
}

Checkpoint read_checkpoint(std::istream& in) {
  const auto count = get_le<std::uint64_t>(in, Kind::kTruncated, "checkpoint entry count");
  if (count == 0) throw FormatError(Kind::kCorruptEntry, "checkpoint has no entries");
  Checkpoint ckpt;
  std::set<std::string> seen;
  bool have_config = false;
  for (std::uint64_t k = 0; k < count; ++k) {
    const auto len = get_le<std::uint16_t>(in, Kind::kCorruptEntry, "entry name length");
    std::string name(len, '\0');
    if (!get_bytes(in, name.data(), len))
      throw FormatError(Kind::kCorruptEntry, "entry name is truncated");
    if (!seen.insert(name).second)
      throw FormatError(Kind::kNameCollision, "duplicate checkpoint entry '" + name + "'");
    if (name == kConfigEntry) {
      if (k + 1 != count) throw FormatError(Kind::kCorruptEntry, "__config must be the final entry");
      const auto n = get_le<std::uint64_t>(in, Kind::kCorruptEntry, "config length");
      if (n > remaining(in)) throw FormatError(Kind::kCorruptEntry, "config text is truncated");
      ckpt.config.assign(n, '\0');
      if (!get_bytes(in, ckpt.config.data(), n))
        throw FormatError(Kind::kCorruptEntry, "config text is truncated");
      have_config = true;
      continue;
    }
    try {
      ckpt.entries.push_back({name, read_tensor(in)});
    } catch (const FormatError& e) {
      if (e.kind() == Kind::kVersion) throw;
      throw FormatError(Kind::kCorruptEntry, "checkpoint entry '" + name + "': " + e.what());
    }
  }
  if (!have_config) throw FormatError(Kind::kCorruptEntry, "checkpoint lacks the __config entry");
  if (in.peek() != std::char_traits<char>::eof())
    throw FormatError(Kind::kCorruptEntry, "trailing bytes after checkpoint");
  return ckpt;
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  // Write to a sibling file first so an interrupted save keeps the old one.
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    auto f = open_out(tmp);
    write_checkpoint(f, ckpt);
    finish(f, tmp);
  }
  std::filesystem::rename(tmp, path);
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  auto f = open_in(path);
  return read_checkpoint(f);
}

// ---------------------------------------------------------------------------

std::vector<Tensor<float>> read_idx(std::istream& in) {
  unsigned char head[16];
  if (!get_bytes(in, reinterpret_cast<char*>(head), 4))
    throw FormatError(Kind::kTruncated, "IDX header is truncated");
  if (head[0] != 0 || head[1] != 0) throw FormatError(Kind::kBadMagic, "IDX magic must start 00 00");
  if (head[2] != 0x08)
    throw FormatError(Kind::kBadType, "IDX type code " + std::to_string(head[2]) +
                                          " is not unsigned byte (0x08)");
  if (head[3] != 3)
    throw FormatError(Kind::kBadRank, "IDX rank " + std::to_string(head[3]) + ", expected 3");
  if (!get_bytes(in, reinterpret_cast<char*>(head + 4), 12))
    throw FormatError(Kind::kTruncated, "IDX dimensions are truncated");
  auto be32 = [&](int o) {
    return std::uint32_t(head[o]) << 24 | std::uint32_t(head[o + 1]) << 16 |
           std::uint32_t(head[o + 2]) << 8 | std::uint32_t(head[o + 3]);
  };
  const std::uint32_t count = be32(4), rows = be32(8), cols = be32(12);
  if (rows != 28 || cols != 28)
    throw FormatError(Kind::kBadDims, "IDX images are " + std::to_string(rows) + "x" +
                                          std::to_string(cols) + ", expected 28x28");
  const std::size_t need = std::size_t(count) * 784;
  if (need > remaining(in)) throw FormatError(Kind::kTruncated, "IDX payload is truncated");
  std::vector<Tensor<float>> out;
  out.reserve(count);
  std::vector<unsigned char> buf(784);
  for (std::uint32_t n = 0; n < count; ++n) {
    if (!get_bytes(in, reinterpret_cast<char*>(buf.data()), buf.size()))
      throw FormatError(Kind::kTruncated, "IDX payload is truncated at image " + std::to_string(n));
    Tensor<float> img({28, 28});
    for (std::size_t i = 0; i < 784; ++i) img[i] = float(buf[i]) / 255.0f;
    out.push_back(std::move(img));
  }
  return out;
}

std::vector<Tensor<float>> read_idx(const std::filesystem::path& path) {
  auto f = open_in(path);
  return read_idx(f);
}

void write_pgm(const std::filesystem::path& path, const Tensor<float>& frame) {
  const Shape& d = frame.dims();
  if (!(d.size() == 2 || (d.size() == 3 && d[2] == 1)))
    throw ShapeError("write_pgm: expected [h, w] or [h, w, 1], got " + shape_str(d));
  std::vector<unsigned char> bytes(frame.size());
  for (std::size_t i = 0; i < frame.size(); ++i) {
    const float v = frame[i];
    if (!(v >= 0.0f && v <= 1.0f))
      throw NumericError("write_pgm: value " + std::to_string(v) + " outside [0, 1]");
    bytes[i] = static_cast<unsigned char>(std::floor(double(v) * 255.0 + 0.5));
  }
  auto f = open_out(path);
  f << "P5\n" << d[1] << ' ' << d[0] << "\n255\n";
  f.write(reinterpret_cast<const char*>(bytes.data()), std::streamsize(bytes.size()));
  finish(f, path);
}

std::vector<std::filesystem::path> export_frames(const Tensor<float>& seq,
                                                 const std::filesystem::path& dir) {
  const Shape& d = seq.dims();
  if (d.size() != 4 || d[3] != 1)
    throw ShapeError("export_frames: expected [T, h, w, 1], got " + shape_str(d));
  std::filesystem::create_directories(dir);
  const std::size_t plane = d[1] * d[2];
  std::vector<std::filesystem::path> paths;
  for (std::size_t t = 0; t < d[0]; ++t) {
    Tensor<float> frame({d[1], d[2]});
    std::copy(seq.raw() + t * plane, seq.raw() + (t + 1) * plane, frame.raw());
    char name[32];
    std::snprintf(name, sizeof name, "frame_%04zu.pgm", t);
    paths.push_back(dir / name);
    write_pgm(paths.back(), frame);
  }
  return paths;
}

std::vector<char> read_file(const std::filesystem::path& path) {
  auto f = open_in(path);
  return std::vector<char>(std::istreambuf_iterator<char>(f), {});
}

std::uint64_t file_checksum(const std::filesystem::path& path) {
  auto f = open_in(path);
  std::uint64_t h = 0xcbf29ce484222325ull;
  char buf[1 << 16];
  while (f.read(buf, sizeof buf) || f.gcount() > 0) {
    for (std::streamsize i = 0; i < f.gcount(); ++i) {
      h ^= static_cast<unsigned char>(buf[i]);
      h *= 0x100000001b3ull;
    }
  }
  return h;
}

#define CTTL_INSTANTIATE_IO(T)                                                        \
  template void write_tensor(std::ostream&, const Tensor<T>&);                        \
  template Tensor<T> read_tensor_as(std::istream&);                                   \
  template void save_tensor(const std::filesystem::path&, const Tensor<T>&);          \
  template Tensor<T> load_tensor_as(const std::filesystem::path&);                    \
  template const Tensor<T>& Checkpoint::get(const std::string&) const;

CTTL_INSTANTIATE_IO(float)
CTTL_INSTANTIATE_IO(double)

}  // namespace cttl
