// Copyright 2026 The cttlstm Authors. Apache 2.0 License.
#include <fstream>
#include <sstream>

#include "cttl/io.hpp"
#include "cttl/training.hpp"
#include "doctest.h"
#include "helpers.hpp"

using namespace cttl;
using cttl::testing::random_tensor;
using cttl::testing::TempDir;

namespace {

template <typename T>
std::string encode(const Tensor<T>& t) {
  std::ostringstream out;
  write_tensor(out, t);
  return out.str();
}

FormatError::Kind tensor_error(const std::string& bytes) {
  std::istringstream in(bytes);
  try {
    read_tensor(in);
  } catch (const FormatError& e) {
    return e.kind();
  }
  FAIL("no FormatError raised");
  return FormatError::Kind::kIo;
}

FormatError::Kind checkpoint_error(const std::string& bytes) {
  std::istringstream in(bytes);
  try {
    read_checkpoint(in);
  } catch (const FormatError& e) {
    return e.kind();
  }
  FAIL("no FormatError raised");
  return FormatError::Kind::kIo;
}

std::string encode(const Checkpoint& c) {
  std::ostringstream out;
  write_checkpoint(out, c);
  return out.str();
}

Checkpoint sample_checkpoint() {
  Rng rng(3);
  Checkpoint c;
  c.entries.push_back({"w", Tensor<float>(random_tensor<float>({2, 3}, rng))});
  c.entries.push_back({"b", Tensor<double>(random_tensor({4}, rng))});
  c.config = "kind = conv-lstm\n";
  return c;
}

std::string idx_header(std::uint32_t n, std::uint32_t rows, std::uint32_t cols) {
  std::string s = {0, 0, 8, 3};
  for (std::uint32_t v : {n, rows, cols})
    for (int shift = 24; shift >= 0; shift -= 8) s.push_back(char((v >> shift) & 0xff));
  return s;
}

}  // namespace

TEST_CASE("tensor containers round trip bit-exactly") {
  Rng rng(1);
  for (std::size_t rank = 1; rank <= 5; ++rank) {
    Shape d;
    for (std::size_t i = 0; i < rank; ++i) d.push_back(1 + rng.below(4));
    const auto a = random_tensor(d, rng);
    std::istringstream in(encode(a));
    CHECK(read_tensor_as<double>(in) == a);
    const auto f = random_tensor<float>(d, rng);
    std::istringstream fin(encode(f));
    CHECK(std::get<Tensor<float>>(read_tensor(fin)) == f);
  }
  const std::string bytes = encode(Tensor<float>({2, 3}));
  CHECK(bytes.size() == 8 + 16 + 24);
  CHECK(bytes.substr(0, 4) == "CTTL");
  CHECK(bytes[4] == 1);
  CHECK(bytes[5] == 0);
  CHECK(bytes[6] == 2);
  CHECK(bytes[8] == 2);
  CHECK(bytes[16] == 3);
}

TEST_CASE("malformed containers raise the matching error kind") {
  using K = FormatError::Kind;
  const std::string good = encode(Tensor<double>({2, 2}, 1.0));
  std::string s = good;
  s[0] = 'X';
  CHECK(tensor_error(s) == K::kBadMagic);
  s = good;
  s[4] = 9;
  CHECK(tensor_error(s) == K::kVersion);
  s = good;
  s[5] = 7;
  CHECK(tensor_error(s) == K::kBadType);
  s = good;
  s[6] = 0;
  CHECK(tensor_error(s) == K::kBadRank);
  CHECK(tensor_error(good.substr(0, 5)) == K::kTruncated);
  CHECK(tensor_error(good.substr(0, 12)) == K::kTruncated);
  CHECK(tensor_error(good.substr(0, good.size() - 1)) == K::kTruncated);

  std::istringstream in(good);
  try {
    read_tensor_as<float>(in);
    FAIL("precision mismatch accepted");
  } catch (const FormatError& e) {
    CHECK(e.kind() == K::kBadType);
  }
}

TEST_CASE("files round trip and missing files are io errors") {
  TempDir dir("io");
  Rng rng(2);
  const auto t = random_tensor<float>({3, 4, 1}, rng);
  save_tensor(dir / "t.tc", t);
  CHECK(load_tensor_as<float>(dir / "t.tc") == t);
  try {
    load_tensor(dir / "missing.tc");
    FAIL("missing file accepted");
  } catch (const FormatError& e) {
    CHECK(e.kind() == FormatError::Kind::kIo);
  }
}

TEST_CASE("streamed containers") {
  TempDir dir("stream");
  Rng rng(3);
  const auto a = random_tensor<float>({2, 2}, rng), b = random_tensor<float>({2, 2}, rng);
  {
    ContainerWriter w(dir / "s.tc", {2, 2, 2});
    w.append(a.data());
    w.append(b.data());
    CHECK_THROWS(w.append(a.data()));
    w.close();
  }
  ContainerReader r(dir / "s.tc");
  CHECK(r.count() == 2);
  CHECK(r.slice(1) == b);
  CHECK(r.slice(0) == a);
  CHECK_THROWS(r.slice(2));
  ContainerWriter partial(dir / "p.tc", {2, 2, 2});
  partial.append(a.data());
  CHECK_THROWS(partial.close());
}

TEST_CASE("checkpoints round trip and reject corruption") {
  using K = FormatError::Kind;
  const auto c = sample_checkpoint();
  std::istringstream in(encode(c));
  const auto back = read_checkpoint(in);
  REQUIRE(back.entries.size() == 2);
  CHECK(back.config == c.config);
  CHECK(back.get<float>("w") == std::get<Tensor<float>>(c.entries[0].tensor));
  CHECK(back.get<double>("b") == std::get<Tensor<double>>(c.entries[1].tensor));
  CHECK_THROWS_AS(back.get<double>("w"), FormatError);
  CHECK(back.find("nope") == nullptr);

  auto dup = c;
  dup.entries.push_back({"w", Tensor<float>({1})});
  std::ostringstream out;
  try {
    write_checkpoint(out, dup);
    FAIL("duplicate names written");
  } catch (const FormatError& e) {
    CHECK(e.kind() == K::kNameCollision);
  }

  const std::string bytes = encode(c);
  CHECK(checkpoint_error(bytes.substr(0, bytes.size() - 3)) == K::kCorruptEntry);
  CHECK(checkpoint_error(bytes.substr(0, 20)) == K::kCorruptEntry);
  CHECK(checkpoint_error(bytes + "x") == K::kCorruptEntry);
  CHECK(checkpoint_error(bytes.substr(0, 4)) == K::kTruncated);
}

TEST_CASE("IDX images") {
  using K = FormatError::Kind;
  std::string one = idx_header(1, 28, 28) + std::string(784, '\0');
  one[16 + 5] = char(255);
  one[16 + 6] = char(51);
  std::istringstream in(one);
  const auto imgs = read_idx(in);
  REQUIRE(imgs.size() == 1);
  CHECK(imgs[0].dims() == Shape{28, 28});
  CHECK(imgs[0][5] == 1.0f);
  CHECK(imgs[0][6] == doctest::Approx(0.2));
  CHECK(imgs[0][0] == 0.0f);

  auto kind = [](const std::string& s) {
    std::istringstream is(s);
    try {
      read_idx(is);
    } catch (const FormatError& e) {
      return e.kind();
    }
    return K::kIo;
  };
  std::string bad = one;
  bad[0] = 1;
  CHECK(kind(bad) == K::kBadMagic);
  bad = one;
  bad[2] = 9;
  CHECK(kind(bad) == K::kBadType);
  bad = one;
  bad[3] = 2;
  CHECK(kind(bad) == K::kBadRank);
  CHECK(kind(idx_header(1, 27, 28) + std::string(756, '\0')) == K::kBadDims);
  CHECK(kind(one.substr(0, 10)) == K::kTruncated);
  CHECK(kind(one.substr(0, 500)) == K::kTruncated);
}

TEST_CASE("PGM export") {
  TempDir dir("pgm");
  Tensor<float> f({2, 3});
  f[0] = 0.5f;
  f[1] = 1.0f;
  write_pgm(dir / "a.pgm", f);
  const auto bytes = read_file(dir / "a.pgm");
  const std::string head = "P5\n3 2\n255\n";
  REQUIRE(bytes.size() == head.size() + 6);
  CHECK(std::string(bytes.begin(), bytes.begin() + long(head.size())) == head);
  CHECK((unsigned char)bytes[head.size()] == 128);
  CHECK((unsigned char)bytes[head.size() + 1] == 255);
  CHECK((unsigned char)bytes[head.size() + 2] == 0);
  CHECK_THROWS(write_pgm(dir / "b.pgm", Tensor<float>({2, 2}, 1.5f)));

  const auto paths = export_frames(Tensor<float>({4, 3, 3, 1}, 0.25f), dir / "seq");
  CHECK(paths.size() == 4);
  CHECK(paths[3].filename() == "frame_0003.pgm");
  for (const auto& p : paths) CHECK(std::filesystem::file_size(p) == 11 + 9);
}

TEST_CASE("checksums follow FNV-1a") {
  TempDir dir("sum");
  std::ofstream(dir / "empty").close();
  CHECK(file_checksum(dir / "empty") == 0xcbf29ce484222325ull);
  std::ofstream(dir / "a") << "a";
  CHECK(file_checksum(dir / "a") == 0xaf63dc4c8601ec8cull);
}

TEST_CASE("a twelve-layer checkpoint restores every parameter") {
  TempDir dir("ckpt");
  const auto cfg = twelve_layer_config(CellKind::kConvTtLstm);
  const auto model = Predictor<float>::build(cfg, 1);
  save_checkpoint(dir / "m.ckpt", make_checkpoint<float>(model, nullptr, "text"));
  auto other = Predictor<float>::build(cfg, 2);
  const auto loaded = load_checkpoint(dir / "m.ckpt");
  CHECK(loaded.config == "text");
  restore_checkpoint<float>(other, loaded, nullptr);
  const auto a = model.parameters(), b = other.parameters();
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i].value() == b[i].value());

  auto small = Predictor<float>::build(four_layer_config(CellKind::kConvTtLstm), 1);
  try {
    restore_checkpoint<float>(small, loaded, nullptr);
    FAIL("mismatched configuration restored");
  } catch (const FormatError& e) {
    CHECK(e.kind() == FormatError::Kind::kConfigMismatch);
  }
}
