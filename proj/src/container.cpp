#include "plab/container.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

#include "plab/error.hpp"

namespace plab {
namespace {

static_assert(std::endian::native == std::endian::little,
              "container IO assumes a little-endian host");

template <typename T>
void put(std::vector<std::uint8_t>& out, T value) {
  const auto* p = reinterpret_cast<const std::uint8_t*>(&value);
  out.insert(out.end(), p, p + sizeof(T));
}

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

  template <typename T>
  T get() {
    need(sizeof(T));
    T value;
    std::memcpy(&value, bytes_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return value;
  }

  void copy(void* dst, std::size_t n) {
    need(n);
    std::memcpy(dst, bytes_.data() + pos_, n);
    pos_ += n;
  }

  bool done() const { return pos_ == bytes_.size(); }

 private:
  void need(std::size_t n) const {
    require(bytes_.size() - pos_ >= n, ErrorKind::format, "container: truncated payload");
  }

  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

void Container::add(std::string name, std::uint64_t rows, std::uint64_t cols,
                    std::span<const double> data) {
  require(data.size() == rows * cols, ErrorKind::dimension_mismatch,
          "container: block '" + name + "' size does not match shape");
  require(!has(name), ErrorKind::invalid_argument, "container: duplicate block '" + name + "'");
  Block b;
  b.name = std::move(name);
  b.dtype = DType::f64;
  b.rows = rows;
  b.cols = cols;
  b.f64.assign(data.begin(), data.end());
  blocks_.push_back(std::move(b));
}

void Container::add(std::string name, std::uint64_t rows, std::uint64_t cols,
                    std::span<const std::int8_t> data) {
  require(data.size() == rows * cols, ErrorKind::dimension_mismatch,
          "container: block '" + name + "' size does not match shape");
  require(!has(name), ErrorKind::invalid_argument, "container: duplicate block '" + name + "'");
  Block b;
  b.name = std::move(name);
  b.dtype = DType::i8;
  b.rows = rows;
  b.cols = cols;
  b.i8.assign(data.begin(), data.end());
  blocks_.push_back(std::move(b));
}

bool Container::has(const std::string& name) const {
  return std::any_of(blocks_.begin(), blocks_.end(), [&](const Block& b) { return b.name == name; });
}

const Container::Block& Container::block(const std::string& name) const {
  for (const auto& b : blocks_) {
    if (b.name == name) return b;
  }
  fail(ErrorKind::format, "container: missing block '" + name + "'");
}

const std::vector<double>& Container::f64(const std::string& name, std::uint64_t rows,
                                          std::uint64_t cols) const {
  const Block& b = block(name);
  require(b.dtype == DType::f64, ErrorKind::format, "container: block '" + name + "' is not f64");
  require((rows == 0 || b.rows == rows) && (cols == 0 || b.cols == cols), ErrorKind::format,
          "container: block '" + name + "' has unexpected shape");
  return b.f64;
}

const std::vector<std::int8_t>& Container::i8(const std::string& name, std::uint64_t rows,
                                              std::uint64_t cols) const {
  const Block& b = block(name);
  require(b.dtype == DType::i8, ErrorKind::format, "container: block '" + name + "' is not i8");
  require((rows == 0 || b.rows == rows) && (cols == 0 || b.cols == cols), ErrorKind::format,
          "container: block '" + name + "' has unexpected shape");
  return b.i8;
}

std::vector<std::uint8_t> Container::serialize() const {
  std::vector<std::uint8_t> out;
  out.insert(out.end(), {'P', 'L', 'A', 'B'});
  put<std::uint32_t>(out, kVersion);
  put<std::uint32_t>(out, static_cast<std::uint32_t>(blocks_.size()));
  for (const auto& b : blocks_) {
    put<std::uint16_t>(out, static_cast<std::uint16_t>(b.name.size()));
    out.insert(out.end(), b.name.begin(), b.name.end());
    put<std::uint8_t>(out, static_cast<std::uint8_t>(b.dtype));
    put<std::uint64_t>(out, b.rows);
    put<std::uint64_t>(out, b.cols);
    if (b.dtype == DType::f64) {
      const auto* p = reinterpret_cast<const std::uint8_t*>(b.f64.data());
      out.insert(out.end(), p, p + b.f64.size() * sizeof(double));
    } else {
      const auto* p = reinterpret_cast<const std::uint8_t*>(b.i8.data());
      out.insert(out.end(), p, p + b.i8.size());
    }
  }
  return out;
}

Container Container::deserialize(std::span<const std::uint8_t> bytes) {
  Reader r(bytes);
  char magic[4];
  r.copy(magic, 4);
  require(std::memcmp(magic, "PLAB", 4) == 0, ErrorKind::format, "container: bad magic");
  const auto version = r.get<std::uint32_t>();
  require(version == kVersion, ErrorKind::format,
          "container: unsupported version " + std::to_string(version));
  const auto count = r.get<std::uint32_t>();
  Container c;
  for (std::uint32_t i = 0; i < count; ++i) {
    Block b;
    const auto len = r.get<std::uint16_t>();
    b.name.resize(len);
    r.copy(b.name.data(), len);
    const auto dtype = r.get<std::uint8_t>();
    require(dtype == 1 || dtype == 2, ErrorKind::format, "container: unknown dtype");
    b.dtype = static_cast<DType>(dtype);
    b.rows = r.get<std::uint64_t>();
    b.cols = r.get<std::uint64_t>();
    const std::uint64_t n = b.rows * b.cols;
    require(b.cols == 0 || n / b.cols == b.rows, ErrorKind::format, "container: shape overflow");
    if (b.dtype == DType::f64) {
      require(n <= bytes.size() / sizeof(double), ErrorKind::format, "container: truncated payload");
      b.f64.resize(n);
      r.copy(b.f64.data(), n * sizeof(double));
    } else {
      require(n <= bytes.size(), ErrorKind::format, "container: truncated payload");
      b.i8.resize(n);
      r.copy(b.i8.data(), n);
    }
    require(!c.has(b.name), ErrorKind::format, "container: duplicate block '" + b.name + "'");
    c.blocks_.push_back(std::move(b));
  }
  require(r.done(), ErrorKind::format, "container: trailing bytes");
  return c;
}

void Container::write(const std::filesystem::path& path) const { write_file_bytes(path, serialize()); }

Container Container::read(const std::filesystem::path& path) {
  return deserialize(read_file_bytes(path));
}

std::filesystem::path sidecar_path(const std::filesystem::path& path) {
  return std::filesystem::path(path.string() + ".json");
}

void write_json(const std::filesystem::path& path, const nlohmann::json& j) {
  write_text_file(path, j.dump(2) + "\n");
}

nlohmann::json read_json(const std::filesystem::path& path) {
  const auto bytes = read_file_bytes(path);
  try {
    return nlohmann::json::parse(bytes.begin(), bytes.end());
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::format, path.string() + ": " + e.what());
  }
}

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  require(static_cast<bool>(in), ErrorKind::io, "cannot open '" + path.string() + "'");
  return std::vector<std::uint8_t>(std::istreambuf_iterator<char>(in), {});
}

void write_file_bytes(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  require(static_cast<bool>(out), ErrorKind::io, "cannot write '" + path.string() + "'");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  require(static_cast<bool>(out), ErrorKind::io, "write failed for '" + path.string() + "'");
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
  write_file_bytes(path, std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

std::string sha256_hex(std::span<const std::uint8_t> bytes) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  require(EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(), nullptr) == 1,
          ErrorKind::io, "sha256 failed");
  static constexpr char kHex[] = "0123456789abcdef";
  std::string out;
  out.reserve(2 * len);
  for (unsigned int i = 0; i < len; ++i) {
    out.push_back(kHex[digest[i] >> 4]);
    out.push_back(kHex[digest[i] & 0xf]);
  }
  return out;
}

std::string sha256_hex(const std::string& text) {
  return sha256_hex(std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

std::string sha256_file(const std::filesystem::path& path) { return sha256_hex(read_file_bytes(path)); }

}  // namespace plab
