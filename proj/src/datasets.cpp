#include "plab/datasets.hpp"

#include <zlib.h>

#include <cmath>
#include <string>

#include "plab/container.hpp"
#include "plab/error.hpp"
#include "plab/rng.hpp"

namespace plab {

void to_json(nlohmann::json& j, const DatasetMeta& m) {
  j = nlohmann::json{{"source", m.source}, {"split", m.split}, {"n", m.n}, {"d", m.d}};
  if (m.source == "shifted_gaussian") j["shift"] = m.shift;
  if (m.synthetic()) j["seed"] = m.seed;
  if (m.source == "idx") {
    j["images_path"] = m.images_path;
    j["labels_path"] = m.labels_path;
    j["test_images_path"] = m.test_images_path;
    j["test_labels_path"] = m.test_labels_path;
    j["class_pos"] = m.class_pos;
    j["class_neg"] = m.class_neg;
    j["pixel_scale"] = m.pixel_scale;
    j["image_rows"] = m.image_rows;
    j["image_cols"] = m.image_cols;
  }
  if (!m.extra.empty()) j["extra"] = m.extra;
}

void from_json(const nlohmann::json& j, DatasetMeta& m) {
  m = DatasetMeta{};
  m.source = j.at("source").get<std::string>();
  m.split = j.value("split", "train");
  m.n = j.at("n").get<std::size_t>();
  m.d = j.at("d").get<std::size_t>();
  m.shift = j.value("shift", 0.0);
  m.seed = j.value("seed", std::uint64_t{0});
  m.images_path = j.value("images_path", "");
  m.labels_path = j.value("labels_path", "");
  m.test_images_path = j.value("test_images_path", "");
  m.test_labels_path = j.value("test_labels_path", "");
  m.class_pos = j.value("class_pos", -1);
  m.class_neg = j.value("class_neg", -1);
  m.pixel_scale = j.value("pixel_scale", 1.0);
  m.image_rows = j.value("image_rows", std::size_t{0});
  m.image_cols = j.value("image_cols", std::size_t{0});
  m.extra = j.value("extra", nlohmann::json::object());
}

Dataset::Dataset(std::size_t d, std::vector<double> x, std::vector<std::int8_t> y, DatasetMeta meta)
    : d_(d), x_(std::move(x)), y_(std::move(y)), meta_(std::move(meta)) {
  require(d_ >= 1, ErrorKind::invalid_argument, "dataset: dimension must be positive");
  require(x_.size() == y_.size() * d_, ErrorKind::dimension_mismatch,
          "dataset: feature buffer does not match N x d");
  for (auto label : y_) {
    require(label == 1 || label == -1, ErrorKind::invalid_argument, "dataset: labels must be +1/-1");
  }
  meta_.n = y_.size();
  meta_.d = d_;
}

Dataset gen_zero_mean_gaussian(std::size_t n, std::size_t d, std::uint64_t seed) {
  require(n >= 1 && d >= 1, ErrorKind::invalid_argument, "gen_zero_mean_gaussian: n and d must be >= 1");
  Rng rng(seed);
  std::vector<double> x(n * d);
  std::vector<std::int8_t> y(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < d; ++j) x[i * d + j] = rng.normal();
    y[i] = static_cast<std::int8_t>(rng.sign());
  }
  DatasetMeta meta;
  meta.source = "zero_mean_gaussian";
  meta.seed = seed;
  return Dataset(d, std::move(x), std::move(y), std::move(meta));
}

Dataset gen_shifted_gaussian(std::size_t n, std::size_t d, double shift, std::uint64_t seed) {
  require(n >= 1 && d >= 1, ErrorKind::invalid_argument, "gen_shifted_gaussian: n and d must be >= 1");
  require(n % 2 == 0, ErrorKind::invalid_argument, "gen_shifted_gaussian: n must be even");
  require(std::isfinite(shift), ErrorKind::invalid_argument, "gen_shifted_gaussian: shift must be finite");
  Rng rng(seed);
  std::vector<double> x(n * d);
  std::vector<std::int8_t> y(n);
  for (std::size_t i = 0; i < n; ++i) {
    const int label = i < n / 2 ? 1 : -1;
    y[i] = static_cast<std::int8_t>(label);
    for (std::size_t j = 0; j < d; ++j) x[i * d + j] = shift * label + rng.normal();
  }
  DatasetMeta meta;
  meta.source = "shifted_gaussian";
  meta.shift = shift;
  meta.seed = seed;
  return Dataset(d, std::move(x), std::move(y), std::move(meta));
}

namespace {

std::vector<std::uint8_t> read_maybe_gz(const std::filesystem::path& path) {
  if (path.extension() != ".gz") return read_file_bytes(path);
  gzFile f = gzopen(path.string().c_str(), "rb");
  require(f != nullptr, ErrorKind::io, "cannot open '" + path.string() + "'");
  std::vector<std::uint8_t> out;
  std::uint8_t buf[1 << 16];
  for (;;) {
    const int got = gzread(f, buf, sizeof(buf));
    if (got < 0) {
      gzclose(f);
      fail(ErrorKind::format, "gzip decode failed for '" + path.string() + "'");
    }
    if (got == 0) break;
    out.insert(out.end(), buf, buf + got);
  }
  gzclose(f);
  return out;
}

void write_maybe_gz(const std::filesystem::path& path, const std::vector<std::uint8_t>& bytes) {
  if (path.extension() != ".gz") {
    write_file_bytes(path, bytes);
    return;
  }
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  gzFile f = gzopen(path.string().c_str(), "wb");
  require(f != nullptr, ErrorKind::io, "cannot write '" + path.string() + "'");
  const int put = gzwrite(f, bytes.data(), static_cast<unsigned>(bytes.size()));
  gzclose(f);
  require(put == static_cast<int>(bytes.size()), ErrorKind::io, "gzip write failed");
}

std::uint32_t be32(const std::vector<std::uint8_t>& b, std::size_t off) {
  return (std::uint32_t{b[off]} << 24) | (std::uint32_t{b[off + 1]} << 16) |
         (std::uint32_t{b[off + 2]} << 8) | std::uint32_t{b[off + 3]};
}

void put_be32(std::vector<std::uint8_t>& b, std::uint32_t v) {
  b.push_back(static_cast<std::uint8_t>(v >> 24));
  b.push_back(static_cast<std::uint8_t>(v >> 16));
  b.push_back(static_cast<std::uint8_t>(v >> 8));
  b.push_back(static_cast<std::uint8_t>(v));
}

constexpr std::uint32_t kImagesMagic = 0x00000803;
constexpr std::uint32_t kLabelsMagic = 0x00000801;

}  // namespace

Dataset load_idx_pair(const std::filesystem::path& images, const std::filesystem::path& labels,
                      int class_pos, int class_neg, double pixel_scale) {
  require(class_pos != class_neg, ErrorKind::invalid_argument, "load_idx_pair: classes must differ");
  require(class_pos >= 0 && class_pos <= 9 && class_neg >= 0 && class_neg <= 9,
          ErrorKind::invalid_argument, "load_idx_pair: classes must be in 0..9");
  require(pixel_scale > 0 && std::isfinite(pixel_scale), ErrorKind::invalid_argument,
          "load_idx_pair: pixel_scale must be positive");

  const auto img = read_maybe_gz(images);
  const auto lab = read_maybe_gz(labels);
  require(img.size() >= 16, ErrorKind::format, "idx images: truncated header");
  require(lab.size() >= 8, ErrorKind::format, "idx labels: truncated header");
  require(be32(img, 0) == kImagesMagic, ErrorKind::format, "idx images: bad magic number");
  require(be32(lab, 0) == kLabelsMagic, ErrorKind::format, "idx labels: bad magic number");

  const std::size_t n = be32(img, 4);
  const std::size_t rows = be32(img, 8);
  const std::size_t cols = be32(img, 12);
  const std::size_t n_labels = be32(lab, 4);
  require(n == n_labels, ErrorKind::format, "idx: image and label counts differ");
  require(rows >= 1 && cols >= 1, ErrorKind::format, "idx images: empty image shape");
  const std::size_t d = rows * cols;
  require(img.size() - 16 == n * d, ErrorKind::format, "idx images: truncated or oversized payload");
  require(lab.size() - 8 == n, ErrorKind::format, "idx labels: truncated or oversized payload");

  std::vector<double> x;
  std::vector<std::int8_t> y;
  std::size_t n_pos = 0, n_neg = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const int label = lab[8 + i];
    require(label <= 9, ErrorKind::format, "idx labels: label " + std::to_string(label) + " outside 0-9");
    if (label != class_pos && label != class_neg) continue;
    const int y_i = label == class_pos ? 1 : -1;
    (y_i == 1 ? n_pos : n_neg) += 1;
    y.push_back(static_cast<std::int8_t>(y_i));
    const std::uint8_t* px = img.data() + 16 + i * d;
    for (std::size_t j = 0; j < d; ++j) x.push_back(pixel_scale * (px[j] / 255.0));
  }
  require(n_pos > 0, ErrorKind::format, "idx: class " + std::to_string(class_pos) + " has no samples");
  require(n_neg > 0, ErrorKind::format, "idx: class " + std::to_string(class_neg) + " has no samples");

  DatasetMeta meta;
  meta.source = "idx";
  meta.images_path = images.string();
  meta.labels_path = labels.string();
  meta.class_pos = class_pos;
  meta.class_neg = class_neg;
  meta.pixel_scale = pixel_scale;
  meta.image_rows = rows;
  meta.image_cols = cols;
  return Dataset(d, std::move(x), std::move(y), std::move(meta));
}

void write_idx_pair(const Dataset& ds, const std::filesystem::path& images,
                    const std::filesystem::path& labels) {
  const auto& meta = ds.meta();
  const bool from_idx = meta.source == "idx";
  const int pos = from_idx ? meta.class_pos : 1;
  const int neg = from_idx ? meta.class_neg : 0;
  const double scale = from_idx ? meta.pixel_scale : 1.0;
  std::size_t rows = meta.image_rows, cols = meta.image_cols;
  if (rows * cols != ds.dim()) {
    rows = 1;
    cols = ds.dim();
  }

  std::vector<std::uint8_t> img, lab;
  put_be32(img, kImagesMagic);
  put_be32(img, static_cast<std::uint32_t>(ds.size()));
  put_be32(img, static_cast<std::uint32_t>(rows));
  put_be32(img, static_cast<std::uint32_t>(cols));
  put_be32(lab, kLabelsMagic);
  put_be32(lab, static_cast<std::uint32_t>(ds.size()));
  for (std::size_t i = 0; i < ds.size(); ++i) {
    for (double v : ds.row(i)) {
      const double level = std::nearbyint(255.0 * v / scale);
      require(level >= 0 && level <= 255, ErrorKind::invalid_argument,
              "write_idx_pair: pixel value outside [0, pixel_scale]");
      img.push_back(static_cast<std::uint8_t>(level));
    }
    lab.push_back(static_cast<std::uint8_t>(ds.label(i) == 1 ? pos : neg));
  }
  write_maybe_gz(images, img);
  write_maybe_gz(labels, lab);
}

Dataset holdout(const DatasetMeta& meta, std::size_t n_test, std::uint64_t train_seed) {
  if (meta.synthetic()) {
    if (n_test == 0) {
      DatasetMeta m = meta;
      m.split = "test";
      m.seed = train_seed + kTestSeedOffset;
      return Dataset(meta.d, {}, {}, std::move(m));
    }
    Dataset ds = meta.source == "shifted_gaussian"
                     ? gen_shifted_gaussian(n_test, meta.d, meta.shift, train_seed + kTestSeedOffset)
                     : gen_zero_mean_gaussian(n_test, meta.d, train_seed + kTestSeedOffset);
    DatasetMeta m = ds.meta();
    m.split = "test";
    return Dataset(ds.dim(), std::vector<double>(ds.features().begin(), ds.features().end()),
                   std::vector<std::int8_t>(ds.labels().begin(), ds.labels().end()), std::move(m));
  }
  require(meta.source == "idx", ErrorKind::invalid_argument,
          "holdout: source '" + meta.source + "' has no test distribution");
  require(!meta.test_images_path.empty() && !meta.test_labels_path.empty(), ErrorKind::invalid_argument,
          "holdout: file-backed dataset has no test split");
  Dataset ds = load_idx_pair(meta.test_images_path, meta.test_labels_path, meta.class_pos,
                             meta.class_neg, meta.pixel_scale);
  DatasetMeta m = ds.meta();
  m.split = "test";
  m.test_images_path = meta.test_images_path;
  m.test_labels_path = meta.test_labels_path;
  return Dataset(ds.dim(), std::vector<double>(ds.features().begin(), ds.features().end()),
                 std::vector<std::int8_t>(ds.labels().begin(), ds.labels().end()), std::move(m));
}

Dataset holdout(const DatasetMeta& meta, std::size_t n_test) { return holdout(meta, n_test, meta.seed); }

Dataset regenerate(const DatasetMeta& meta) {
  if (meta.source == "zero_mean_gaussian") return gen_zero_mean_gaussian(meta.n, meta.d, meta.seed);
  if (meta.source == "shifted_gaussian") return gen_shifted_gaussian(meta.n, meta.d, meta.shift, meta.seed);
  if (meta.source == "idx") {
    Dataset ds = load_idx_pair(meta.images_path, meta.labels_path, meta.class_pos, meta.class_neg,
                               meta.pixel_scale);
    DatasetMeta m = ds.meta();
    m.test_images_path = meta.test_images_path;
    m.test_labels_path = meta.test_labels_path;
    return Dataset(ds.dim(), std::vector<double>(ds.features().begin(), ds.features().end()),
                   std::vector<std::int8_t>(ds.labels().begin(), ds.labels().end()), std::move(m));
  }
  fail(ErrorKind::invalid_argument, "regenerate: source '" + meta.source + "' is not reproducible");
}

Dataset make_dataset(std::size_t d, std::vector<double> x, std::vector<std::int8_t> y,
                     nlohmann::json provenance) {
  DatasetMeta meta;
  meta.source = "derived";
  meta.extra = std::move(provenance);
  return Dataset(d, std::move(x), std::move(y), std::move(meta));
}

void save_dataset(const Dataset& ds, const std::filesystem::path& path) {
  Container c;
  c.add("x", ds.size(), ds.dim(), ds.features());
  c.add("y", ds.size(), 1, ds.labels());
  c.write(path);
  write_json(sidecar_path(path), nlohmann::json(ds.meta()));
}

Dataset load_dataset(const std::filesystem::path& path) {
  const Container c = Container::read(path);
  const auto& xb = c.block("x");
  const auto& y = c.i8("y", xb.rows, 1);
  const auto& x = c.f64("x");
  DatasetMeta meta;
  if (std::filesystem::exists(sidecar_path(path))) meta = read_json(sidecar_path(path)).get<DatasetMeta>();
  return Dataset(xb.cols, x, y, std::move(meta));
}

}  // namespace plab
