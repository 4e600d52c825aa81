#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

namespace plab {

/// Versioned little-endian binary container holding named 2-D arrays of
/// float64 or int8. Layout:
///
///   "PLAB" | u32 version | u32 block count
///   per block: u16 name length | name | u8 dtype (1 = f64, 2 = i8)
///              | u64 rows | u64 cols | row-major payload
///
/// Datasets, nets, traces and adversarial sets all use it, with a JSON
/// sidecar (`<path>.json`) for metadata.
class Container {
 public:
  static constexpr std::uint32_t kVersion = 1;

  enum class DType : std::uint8_t { f64 = 1, i8 = 2 };

  struct Block {
    std::string name;
    DType dtype = DType::f64;
    std::uint64_t rows = 0;
    std::uint64_t cols = 0;
    std::vector<double> f64;
    std::vector<std::int8_t> i8;
  };

  void add(std::string name, std::uint64_t rows, std::uint64_t cols, std::span<const double> data);
  void add(std::string name, std::uint64_t rows, std::uint64_t cols,
           std::span<const std::int8_t> data);

  bool has(const std::string& name) const;
  const Block& block(const std::string& name) const;
  const std::vector<Block>& blocks() const { return blocks_; }

  /// f64 block contents; checks shape when rows/cols are given (0 = any).
  const std::vector<double>& f64(const std::string& name, std::uint64_t rows = 0,
                                 std::uint64_t cols = 0) const;
  const std::vector<std::int8_t>& i8(const std::string& name, std::uint64_t rows = 0,
                                     std::uint64_t cols = 0) const;

  std::vector<std::uint8_t> serialize() const;
  static Container deserialize(std::span<const std::uint8_t> bytes);

  void write(const std::filesystem::path& path) const;
  static Container read(const std::filesystem::path& path);

 private:
  std::vector<Block> blocks_;
};

std::filesystem::path sidecar_path(const std::filesystem::path& path);

void write_json(const std::filesystem::path& path, const nlohmann::json& j);
nlohmann::json read_json(const std::filesystem::path& path);

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path);
void write_file_bytes(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);
void write_text_file(const std::filesystem::path& path, const std::string& text);

/// Lowercase hex SHA-256.
std::string sha256_hex(std::span<const std::uint8_t> bytes);
std::string sha256_hex(const std::string& text);
std::string sha256_file(const std::filesystem::path& path);

}  // namespace plab
