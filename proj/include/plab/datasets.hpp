#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

namespace plab {

/// Offset added to a synthetic dataset's seed to obtain its test stream.
inline constexpr std::uint64_t kTestSeedOffset = 1'000'003;

/// Where a dataset came from. Regenerating from the same meta gives the same
/// samples bit for bit.
struct DatasetMeta {
  std::string source;  // zero_mean_gaussian | shifted_gaussian | idx | derived
  std::string split = "train";
  std::size_t n = 0;
  std::size_t d = 0;
  double shift = 0.0;
  std::uint64_t seed = 0;

  // idx sources
  std::string images_path;
  std::string labels_path;
  std::string test_images_path;
  std::string test_labels_path;
  int class_pos = -1;
  int class_neg = -1;
  double pixel_scale = 1.0;
  std::size_t image_rows = 0;
  std::size_t image_cols = 0;

  // free-form provenance for derived datasets (e.g. adversarial training sets)
  nlohmann::json extra = nlohmann::json::object();

  bool synthetic() const { return source == "zero_mean_gaussian" || source == "shifted_gaussian"; }
};

void to_json(nlohmann::json& j, const DatasetMeta& m);
void from_json(const nlohmann::json& j, DatasetMeta& m);

/// Labeled samples (x_n, y_n), y_n in {+1, -1}, stored row-major.
class Dataset {
 public:
  Dataset() = default;
  Dataset(std::size_t d, std::vector<double> x, std::vector<std::int8_t> y, DatasetMeta meta);

  std::size_t size() const { return y_.size(); }
  std::size_t dim() const { return d_; }
  bool empty() const { return y_.empty(); }

  std::span<const double> row(std::size_t n) const { return {x_.data() + n * d_, d_}; }
  int label(std::size_t n) const { return y_[n]; }

  std::span<const double> features() const { return x_; }
  std::span<const std::int8_t> labels() const { return y_; }
  const DatasetMeta& meta() const { return meta_; }

  bool operator==(const Dataset& other) const {
    return d_ == other.d_ && x_ == other.x_ && y_ == other.y_;
  }

 private:
  std::size_t d_ = 0;
  std::vector<double> x_;
  std::vector<std::int8_t> y_;
  DatasetMeta meta_;
};

/// x ~ N(0, I), y ~ U({+1, -1}) independent of x.
Dataset gen_zero_mean_gaussian(std::size_t n, std::size_t d, std::uint64_t seed);

/// First n/2 samples labeled +1, the rest -1; x ~ N(shift * y * 1, I). n must be even.
Dataset gen_shifted_gaussian(std::size_t n, std::size_t d, double shift, std::uint64_t seed);

/// Loads an IDX image/label pair (optionally gzip-compressed, by ".gz"
/// extension), keeping classes class_pos (label +1) and class_neg (label -1).
/// Pixels are mapped to [0, pixel_scale].
Dataset load_idx_pair(const std::filesystem::path& images, const std::filesystem::path& labels,
                      int class_pos, int class_neg, double pixel_scale = 1.0);

/// Writes a dataset as an IDX pair. Labels map back to meta().class_pos/neg
/// (or 1/0 when the dataset did not come from IDX); pixels are
/// round(255 * x / pixel_scale), which must fit in a byte.
void write_idx_pair(const Dataset& ds, const std::filesystem::path& images,
                    const std::filesystem::path& labels);

/// Fresh test draw for a dataset description. Synthetic sources use
/// seed + kTestSeedOffset; IDX sources load the recorded test split.
Dataset holdout(const DatasetMeta& meta, std::size_t n_test, std::uint64_t train_seed);
Dataset holdout(const DatasetMeta& meta, std::size_t n_test);

/// Rebuilds a dataset from its meta (synthetic or idx sources).
Dataset regenerate(const DatasetMeta& meta);

/// Builds a dataset from explicit rows; meta.source = "derived".
Dataset make_dataset(std::size_t d, std::vector<double> x, std::vector<std::int8_t> y,
                     nlohmann::json provenance = nlohmann::json::object());

void save_dataset(const Dataset& ds, const std::filesystem::path& path);
Dataset load_dataset(const std::filesystem::path& path);

}  // namespace plab
