#include <gtest/gtest.h>

#include <cmath>

#include "plab/container.hpp"
#include "plab/datasets.hpp"
#include "plab/error.hpp"
#include "test_util.hpp"

using namespace plab;

TEST(Datasets, ShiftedGaussianLayoutAndMoments) {
  const std::size_t n = 2000, d = 5;
  const Dataset ds = gen_shifted_gaussian(n, d, 0.7, 11);
  ASSERT_EQ(ds.size(), n);
  ASSERT_EQ(ds.dim(), d);
  double mean_pos = 0, mean_neg = 0;
  for (std::size_t i = 0; i < n; ++i) {
    EXPECT_EQ(ds.label(i), i < n / 2 ? 1 : -1);
    const double s = ds.row(i)[2];
    (i < n / 2 ? mean_pos : mean_neg) += s / (n / 2);
  }
  const double se = 5.0 / std::sqrt(n / 2.0);
  EXPECT_NEAR(mean_pos, 0.7, se);
  EXPECT_NEAR(mean_neg, -0.7, se);
  EXPECT_THROW(gen_shifted_gaussian(3, d, 0.1, 1), Error);
}

TEST(Datasets, ZeroMeanGaussianLabelsBalanced) {
  const Dataset ds = gen_zero_mean_gaussian(4000, 3, 5);
  int s = 0;
  double m = 0;
  for (std::size_t i = 0; i < ds.size(); ++i) {
    s += ds.label(i);
    m += ds.row(i)[0];
  }
  EXPECT_LE(std::abs(s), 5 * std::sqrt(4000.0));
  EXPECT_LE(std::abs(m / 4000), 5 / std::sqrt(4000.0));
}

TEST(Datasets, DeterministicAndRegenerable) {
  const Dataset a = gen_shifted_gaussian(20, 4, 0.3, 9);
  EXPECT_EQ(a, gen_shifted_gaussian(20, 4, 0.3, 9));
  EXPECT_FALSE(a == gen_shifted_gaussian(20, 4, 0.3, 10));
  EXPECT_EQ(regenerate(a.meta()), a);
}

TEST(Datasets, HoldoutUsesOffsetSeed) {
  const Dataset train = gen_shifted_gaussian(20, 4, 0.3, 9);
  const Dataset test = holdout(train.meta(), 30);
  EXPECT_EQ(test.size(), 30u);
  EXPECT_EQ(test, gen_shifted_gaussian(30, 4, 0.3, 9 + kTestSeedOffset));
  EXPECT_EQ(test.meta().split, "test");
}

TEST(Datasets, SaveLoadRoundTrip) {
  plab::testing::TempDir dir;
  const Dataset a = gen_zero_mean_gaussian(10, 3, 2);
  save_dataset(a, dir / "ds.bin");
  const Dataset b = load_dataset(dir / "ds.bin");
  EXPECT_EQ(a, b);
  EXPECT_EQ(b.meta().source, "zero_mean_gaussian");
  EXPECT_EQ(b.meta().seed, 2u);
}

namespace {

Dataset pixel_dataset(std::size_t n, std::size_t d, double scale) {
  std::vector<double> x(n * d);
  std::vector<std::int8_t> y(n);
  for (std::size_t i = 0; i < n; ++i) {
    y[i] = i % 3 == 0 ? -1 : 1;
    for (std::size_t j = 0; j < d; ++j) x[i * d + j] = scale * static_cast<double>((i * 31 + j * 7) % 256) / 255.0;
  }
  return make_dataset(d, std::move(x), std::move(y));
}

}  // namespace

class IdxRoundTrip : public ::testing::TestWithParam<const char*> {};

TEST_P(IdxRoundTrip, WriteThenLoad) {
  plab::testing::TempDir dir;
  const std::string ext = GetParam();
  const Dataset a = pixel_dataset(12, 16, 1.0);
  write_idx_pair(a, dir / ("img" + ext), dir / ("lab" + ext));
  // class 1 -> +1, class 0 -> -1 for datasets without IDX provenance
  const Dataset b = load_idx_pair(dir / ("img" + ext), dir / ("lab" + ext), 1, 0, 1.0);
  ASSERT_EQ(b.size(), a.size());
  ASSERT_EQ(b.dim(), a.dim());
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(b.label(i), a.label(i));
    for (std::size_t j = 0; j < a.dim(); ++j) EXPECT_NEAR(b.row(i)[j], a.row(i)[j], 1e-12);
  }
  EXPECT_EQ(b.meta().source, "idx");
  EXPECT_EQ(b.meta().image_rows * b.meta().image_cols, 16u);
}

INSTANTIATE_TEST_SUITE_P(Plain, IdxRoundTrip, ::testing::Values("", ".gz"));

TEST(Idx, ClassFilterAndScale) {
  plab::testing::TempDir dir;
  const Dataset a = pixel_dataset(9, 4, 1.0);
  write_idx_pair(a, dir / "img", dir / "lab");
  const Dataset both = load_idx_pair(dir / "img", dir / "lab", 1, 0, 1.0);
  EXPECT_EQ(both.size(), 9u);
  EXPECT_THROW(load_idx_pair(dir / "img", dir / "lab", 7, 0, 1.0), Error);
  const Dataset scaled = load_idx_pair(dir / "img", dir / "lab", 1, 0, 255.0);
  EXPECT_NEAR(scaled.row(1)[1], 255.0 * a.row(1)[1], 1e-9);
  EXPECT_THROW(load_idx_pair(dir / "img", dir / "lab", 1, 1, 1.0), Error);
}

TEST(Idx, MalformedFilesAreFormatErrors) {
  plab::testing::TempDir dir;
  const Dataset a = pixel_dataset(4, 4, 1.0);
  write_idx_pair(a, dir / "img", dir / "lab");
  auto bytes = read_file_bytes(dir / "img");
  bytes.resize(bytes.size() - 1);
  write_file_bytes(dir / "short", bytes);
  try {
    load_idx_pair(dir / "short", dir / "lab", 1, 0);
    ADD_FAILURE() << "no throw";
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::format);
  }
  EXPECT_THROW(load_idx_pair(dir / "lab", dir / "img", 1, 0), Error);
}

TEST(Idx, HoldoutLoadsTestSplit) {
  plab::testing::TempDir dir;
  const Dataset tr = pixel_dataset(6, 4, 1.0), te = pixel_dataset(9, 4, 1.0);
  write_idx_pair(tr, dir / "tr_img", dir / "tr_lab");
  write_idx_pair(te, dir / "te_img", dir / "te_lab");
  DatasetMeta meta = load_idx_pair(dir / "tr_img", dir / "tr_lab", 1, 0).meta();
  meta.test_images_path = (dir / "te_img").string();
  meta.test_labels_path = (dir / "te_lab").string();
  const Dataset h = holdout(meta, 0);
  EXPECT_EQ(h.size(), 9u);
}
