#include <gtest/gtest.h>

#include <fstream>

#include "plab/container.hpp"
#include "plab/error.hpp"
#include "test_util.hpp"

using namespace plab;

TEST(Sha256, KnownVectors) {
  EXPECT_EQ(sha256_hex(std::string("abc")), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
  EXPECT_EQ(sha256_hex(std::string()), "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
}

TEST(Container, RoundTrip) {
  Container c;
  const std::vector<double> x{1.5, -2.0, 3.25, 0.0, 1e-300, -7.0};
  const std::vector<std::int8_t> y{1, -1, 1};
  c.add("x", 3, 2, x);
  c.add("y", 3, 1, y);
  const auto bytes = c.serialize();
  const Container back = Container::deserialize(bytes);
  EXPECT_EQ(back.f64("x", 3, 2), x);
  EXPECT_EQ(back.i8("y", 3, 1), y);
  EXPECT_TRUE(back.has("x"));
  EXPECT_FALSE(back.has("z"));
  EXPECT_EQ(back.serialize(), bytes);
}

TEST(Container, ShapeAndNameChecks) {
  Container c;
  const std::vector<double> x(6);
  EXPECT_THROW(c.add("bad", 4, 2, x), Error);
  c.add("x", 3, 2, x);
  EXPECT_THROW(c.add("x", 3, 2, x), Error);
  EXPECT_THROW(c.f64("x", 2, 3), Error);
  EXPECT_THROW(c.i8("x"), Error);
  EXPECT_THROW(c.block("missing"), Error);
}

TEST(Container, CorruptInputIsFormatError) {
  Container c;
  const std::vector<double> x{1, 2, 3, 4};
  c.add("x", 2, 2, x);
  auto bytes = c.serialize();
  const auto expect_format = [](std::span<const std::uint8_t> b) {
    try {
      Container::deserialize(b);
      ADD_FAILURE() << "no throw";
    } catch (const Error& e) {
      EXPECT_EQ(e.kind(), ErrorKind::format);
    }
  };
  for (std::size_t cut = 0; cut < bytes.size(); ++cut) expect_format(std::span(bytes).first(cut));
  auto bad_magic = bytes;
  bad_magic[0] = 'X';
  expect_format(bad_magic);
  auto bad_version = bytes;
  bad_version[4] = 99;
  expect_format(bad_version);
  auto trailing = bytes;
  trailing.push_back(0);
  expect_format(trailing);
}

TEST(Container, FileRoundTripAndHash) {
  plab::testing::TempDir dir;
  Container c;
  const std::vector<double> x{0.25, 0.5};
  c.add("x", 1, 2, x);
  c.write(dir / "a.bin");
  EXPECT_EQ(Container::read(dir / "a.bin").f64("x"), x);
  const auto bytes = read_file_bytes(dir / "a.bin");
  EXPECT_EQ(sha256_file(dir / "a.bin"), sha256_hex(bytes));
  EXPECT_THROW(Container::read(dir / "missing.bin"), Error);
}

TEST(Container, JsonSidecar) {
  plab::testing::TempDir dir;
  EXPECT_EQ(sidecar_path(dir / "a.bin").filename().string(), "a.bin.json");
  write_json(dir / "m.json", nlohmann::json{{"k", 1}});
  EXPECT_EQ(read_json(dir / "m.json")["k"], 1);
  std::ofstream(dir / "bad.json") << "{not json";
  EXPECT_THROW(read_json(dir / "bad.json"), Error);
}
