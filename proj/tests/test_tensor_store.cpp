#include <gtest/gtest.h>

#include <cmath>
#include <cstring>
#include <functional>
#include <fstream>
#include <limits>
#include <random>
#include <string>

#include "attnbound/error.hpp"
#include "attnbound/tensor_store.hpp"
#include "test_util.hpp"

using namespace attnbound;
using attnbound::testutil::TempDir;

namespace {

// Hand-built NPY file, independent of encode_tensor.
std::vector<std::byte> npy_bytes(const std::string& dict, const void* payload, std::size_t payload_size,
                                 unsigned char major = 1) {
  std::string header = dict;
  const std::size_t total = 10 + header.size() + 1;
  header.append((64 - total % 64) % 64, ' ');
  header.push_back('\n');
  std::vector<std::byte> out(10 + header.size() + payload_size);
  const unsigned char magic[] = {0x93, 'N', 'U', 'M', 'P', 'Y'};
  std::memcpy(out.data(), magic, 6);
  out[6] = std::byte{major};
  out[7] = std::byte{0};
  out[8] = static_cast<std::byte>(header.size() & 0xFF);
  out[9] = static_cast<std::byte>(header.size() >> 8);
  std::memcpy(out.data() + 10, header.data(), header.size());
  if (payload_size) std::memcpy(out.data() + 10 + header.size(), payload, payload_size);
  return out;
}

ErrorKind kind_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.kind();
  }
  ADD_FAILURE() << "no error raised";
  return ErrorKind::contract;
}

void write_text(const std::filesystem::path& p, const std::string& text) {
  std::ofstream(p) << text;
}

}  // namespace

TEST(TensorStore, RoundtripIsBitIdentical) {
  TempDir dir("npy");
  std::mt19937_64 gen(1);
  for (auto [r, c] : {std::pair{1, 1}, {3, 1}, {2, 7}, {17, 5}}) {
    Matrix m = testutil::random_matrix(r, c, gen, -1e6, 1e6);
    m(0, 0) = std::numeric_limits<double>::denorm_min();
    write_tensor(m, dir.path() / "m.npy");
    EXPECT_EQ(read_tensor(dir.path() / "m.npy"), m);
  }
  const Matrix v(3, 1, {1.5, -2.0, 0.25});
  write_tensor(v, dir.path() / "v.npy");
  EXPECT_EQ(read_tensor(dir.path() / "v.npy"), v);
}

TEST(TensorStore, ReadsIndependentlyWrittenFile) {
  const double data[] = {1, 2, 3, 4};
  const auto bytes = npy_bytes("{'descr': '<f8', 'fortran_order': False, 'shape': (2, 2), }", data, sizeof data);
  EXPECT_EQ(parse_tensor(bytes), Matrix(2, 2, {1, 2, 3, 4}));
}

TEST(TensorStore, ReadsFloat32OneDimAndScalar) {
  const float f[] = {0.5f, -1.25f, 3.0f};
  const auto one_d = parse_tensor(npy_bytes("{'descr': '<f4', 'fortran_order': False, 'shape': (3,), }", f, sizeof f));
  EXPECT_EQ(one_d, Matrix(3, 1, {0.5, -1.25, 3.0}));
  const double x = 7.0;
  const auto scalar = parse_tensor(npy_bytes("{'descr': '<f8', 'fortran_order': False, 'shape': (), }", &x, 8));
  EXPECT_EQ(scalar, Matrix(1, 1, {7.0}));
}

TEST(TensorStore, ZeroMatrixEncodesAsHeaderPlusEightZeroBytes) {
  const auto bytes = encode_tensor(Matrix(1, 1, {0.0}));
  ASSERT_GE(bytes.size(), 18u);
  const std::size_t header_len = std::to_integer<std::size_t>(bytes[8]) | (std::to_integer<std::size_t>(bytes[9]) << 8);
  EXPECT_EQ(bytes.size(), 10 + header_len + 8);
  EXPECT_EQ((10 + header_len) % 64, 0u);
  for (std::size_t i = bytes.size() - 8; i < bytes.size(); ++i) EXPECT_EQ(bytes[i], std::byte{0});
}

TEST(TensorStore, IntegerDtypeIsUnsupported) {
  const long long ints[] = {1, 2};
  EXPECT_EQ(kind_of([&] { parse_tensor(npy_bytes("{'descr': '<i8', 'fortran_order': False, 'shape': (2,), }", ints, 16)); }),
            ErrorKind::unsupported_dtype);
}

TEST(TensorStore, MalformedInputsAreFormatErrors) {
  const double d[] = {1, 2, 3};
  EXPECT_EQ(kind_of([&] { parse_tensor(npy_bytes("{'descr': '<f8', 'fortran_order': False, 'shape': (2, 2), }", d, 24)); }),
            ErrorKind::format);
  EXPECT_EQ(kind_of([&] { parse_tensor(npy_bytes("{'descr': '<f8', 'fortran_order': True, 'shape': (3,), }", d, 24)); }),
            ErrorKind::format);
  EXPECT_EQ(kind_of([&] { parse_tensor(npy_bytes("{'descr': '<f8', 'fortran_order': False, 'shape': (3,), }", d, 24, 2)); }),
            ErrorKind::format);
  EXPECT_EQ(kind_of([&] { parse_tensor(npy_bytes("{'descr': '<f8', 'shape': (3,), }", d, 24)); }), ErrorKind::format);
  std::vector<std::byte> junk(5, std::byte{0x42});
  EXPECT_EQ(kind_of([&] { parse_tensor(junk); }), ErrorKind::format);
}

TEST(TensorStore, NonFiniteValuesAreRejectedBothWays) {
  const double d[] = {1.0, std::nan("")};
  EXPECT_EQ(kind_of([&] { parse_tensor(npy_bytes("{'descr': '<f8', 'fortran_order': False, 'shape': (2,), }", d, 16)); }),
            ErrorKind::data);
  TempDir dir("nan");
  EXPECT_EQ(kind_of([&] { write_tensor(Matrix(1, 2, {1.0, std::numeric_limits<double>::infinity()}), dir.path() / "x.npy"); }),
            ErrorKind::data);
  EXPECT_FALSE(std::filesystem::exists(dir.path() / "x.npy"));
}

TEST(TensorStore, FuzzedBytesNeverYieldAnInvalidMatrix) {
  std::mt19937_64 gen(99);
  const auto good = encode_tensor(Matrix(3, 2, {1, 2, 3, 4, 5, 6}));
  std::size_t accepted = 0;
  for (int trial = 0; trial < 3000; ++trial) {
    auto bytes = good;
    const int flips = 1 + static_cast<int>(gen() % 4);
    for (int f = 0; f < flips; ++f) bytes[gen() % bytes.size()] = static_cast<std::byte>(gen() & 0xFF);
    if (gen() % 5 == 0) bytes.resize(gen() % bytes.size());
    try {
      const Matrix m = parse_tensor(bytes);
      ++accepted;
      EXPECT_EQ(m.size(), m.rows() * m.cols());
      EXPECT_FALSE(m.first_non_finite().has_value());
    } catch (const Error&) {
    }
  }
  EXPECT_GT(accepted, 0u);  // payload-only flips still parse
}

TEST(Manifest, GridOf144HeadsLoads) {
  TempDir dir("manifest");
  write_tensor(Matrix(4, 2), dir.path() / "t.npy");
  std::string entries;
  for (int l = 0; l < 12; ++l) {
    for (int h = 0; h < 12; ++h) {
      if (!entries.empty()) entries += ",";
      entries += "{\"layer\":" + std::to_string(l) + ",\"head\":" + std::to_string(h) +
                 ",\"q\":\"t.npy\",\"k\":\"t.npy\",\"v\":\"t.npy\"}";
    }
  }
  write_text(dir.path() / "manifest.json",
             "{\"model_id\":\"gpt2\",\"d_model\":768,\"n_layers\":12,\"n_heads\":12,\"seq_len\":4,"
             "\"temperature\":null,\"entries\":[" + entries + "]}");
  const auto index = read_manifest(dir.path());
  EXPECT_EQ(index.entries.size(), 144u);
  EXPECT_FALSE(index.temperature.has_value());
  ASSERT_NE(index.find(11, 11), nullptr);
  EXPECT_EQ(index.find(12, 0), nullptr);
}

TEST(Manifest, EmptyEntriesIsNotAnError) {
  TempDir dir("empty");
  write_text(dir.path() / "manifest.json",
             R"({"model_id":"m","d_model":4,"n_layers":0,"n_heads":0,"seq_len":2,"temperature":2.0,"entries":[]})");
  const auto index = read_manifest(dir.path() / "manifest.json");
  EXPECT_TRUE(index.entries.empty());
  EXPECT_EQ(index.temperature, 2.0);
}

TEST(Manifest, DuplicateHeadIsAManifestError) {
  TempDir dir("dup");
  write_tensor(Matrix(2, 2), dir.path() / "t.npy");
  write_text(dir.path() / "manifest.json",
             R"({"model_id":"m","d_model":4,"n_layers":1,"n_heads":1,"seq_len":2,"temperature":null,"entries":[
                {"layer":0,"head":0,"q":"t.npy","k":"t.npy","v":"t.npy"},
                {"layer":0,"head":0,"q":"t.npy","k":"t.npy","v":"t.npy"}]})");
  EXPECT_EQ(kind_of([&] { read_manifest(dir.path()); }), ErrorKind::manifest);
}

TEST(Manifest, MissingTensorNamesThePath) {
  TempDir dir("missing");
  write_text(dir.path() / "manifest.json",
             R"({"model_id":"m","d_model":4,"n_layers":1,"n_heads":1,"seq_len":2,"temperature":null,"entries":[
                {"layer":0,"head":0,"q":"nope_q.npy","k":"nope_q.npy","v":"nope_q.npy"}]})");
  try {
    read_manifest(dir.path());
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::missing_file);
    EXPECT_NE(std::string(e.what()).find("nope_q.npy"), std::string::npos);
  }
}

TEST(Manifest, WriteThenReadAndLoadHead) {
  TempDir dir("heads");
  std::mt19937_64 gen(5);
  const Matrix q = testutil::random_matrix(3, 4, gen), k = testutil::random_matrix(3, 4, gen),
               v = testutil::random_matrix(3, 4, gen);
  write_tensor(q, dir.path() / "q.npy");
  write_tensor(k, dir.path() / "k.npy");
  write_tensor(v, dir.path() / "v.npy");
  DumpIndex index;
  index.root = dir.path();
  index.model_id = "toy";
  index.d_model = 8;
  index.n_layers = 1;
  index.n_heads = 1;
  index.seq_len = 3;
  index.entries.push_back({0, 0, "q.npy", "k.npy", "v.npy", std::nullopt});
  write_manifest(index);

  const auto back = read_manifest(dir.path());
  ASSERT_EQ(back.entries.size(), 1u);
  const auto head = load_head(back, back.entries[0]);
  EXPECT_EQ(head.q, q);
  EXPECT_EQ(head.v, v);
  EXPECT_DOUBLE_EQ(head.temperature, 2.0);  // sqrt(head_dim) when the manifest has none
}

TEST(Manifest, AttentionRowsMustBeDistributions) {
  HeadDump d;
  d.q = d.k = d.v = Matrix(2, 2, {1, 0, 0, 1});
  d.seq_len = 2;
  d.head_dim = 2;
  d.attention = Matrix(2, 2, {0.5, 0.5, 0.7, 0.2});
  EXPECT_EQ(kind_of([&] { validate(d); }), ErrorKind::data);
  d.attention = Matrix(2, 2, {0.5, 0.5, 0.3, 0.7});
  EXPECT_NO_THROW(validate(d));
}
