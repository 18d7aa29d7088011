#include <gtest/gtest.h>

#include <filesystem>
#include <sstream>

#include "mtdtl/core/config.hpp"
#include "mtdtl/core/csv.hpp"
#include "mtdtl/core/random.hpp"
#include "mtdtl/core/tensor_io.hpp"

using namespace mtdtl;

TEST(TensorIo, HeaderIsBitExact) {
  Tensor<float> t({2, 3}, std::vector<float>{1, 2, 3, 4, 5, 6.5f});
  std::ostringstream os;
  io::write_tensor(os, t);
  const std::string bytes = os.str();
  ASSERT_EQ(bytes.size(), 4u + 1u + 2u * 4u + 6u * 4u);
  EXPECT_EQ(bytes.substr(0, 4), "MRT1");
  EXPECT_EQ(static_cast<unsigned char>(bytes[4]), 2);
  EXPECT_EQ(static_cast<unsigned char>(bytes[5]), 2);  // dim0 = 2 little-endian
  EXPECT_EQ(bytes[6], 0);
  EXPECT_EQ(static_cast<unsigned char>(bytes[9]), 3);
  float last = 0;
  std::memcpy(&last, bytes.data() + bytes.size() - 4, 4);
  EXPECT_EQ(last, 6.5f);
}

TEST(TensorIo, RoundTripsRandomTensorsThroughConcatenatedStream) {
  Rng rng(3);
  std::stringstream ss;
  std::vector<Tensor<float>> written;
  for (int trial = 0; trial < 20; ++trial) {
    Shape shape(1 + uniform_index(rng, 4));
    for (auto& d : shape) d = 1 + uniform_index(rng, 5);
    Tensor<float> t(shape);
    for (auto& v : t.storage()) v = static_cast<float>(normal01(rng));
    io::write_tensor(ss, t);
    written.push_back(t);
  }
  for (const auto& t : written) EXPECT_EQ(io::read_tensor<float>(ss), t);
}

TEST(TensorIo, RejectsBadMagicAndTruncation) {
  std::istringstream bad("XXXX");
  EXPECT_THROW(io::read_tensor<float>(bad), IoError);
  Tensor<float> t({4});
  std::ostringstream os;
  io::write_tensor(os, t);
  std::istringstream cut(os.str().substr(0, os.str().size() - 2));
  EXPECT_THROW(io::read_tensor<float>(cut), IoError);
}

TEST(Config, ParsesKeyValueAndRejectsUnknownKeys) {
  std::istringstream is("# comment\nalpha = 0.5\n name = hello world \n");
  auto cfg = io::KeyValueConfig::parse(is);
  EXPECT_DOUBLE_EQ(cfg.get_number<double>("alpha"), 0.5);
  EXPECT_EQ(cfg.get("name"), "hello world");
  EXPECT_NO_THROW(cfg.check_keys({"alpha", "name"}));
  EXPECT_THROW(cfg.check_keys({"alpha"}), IoError);
  std::istringstream bad("alpha = x\n");
  auto cfg2 = io::KeyValueConfig::parse(bad);
  EXPECT_THROW(cfg2.get_number<double>("alpha"), IoError);
  std::istringstream noeq("alpha\n");
  EXPECT_THROW(io::KeyValueConfig::parse(noeq), IoError);
}

TEST(Csv, RejectsWrongHeader) {
  const auto path = std::filesystem::temp_directory_path() / "mtdtl_csv_test.csv";
  io::write_csv(path, {{"a", "b"}, {{"1", "2"}}});
  EXPECT_NO_THROW(io::read_csv(path, {"a", "b"}));
  EXPECT_THROW(io::read_csv(path, {"a", "c"}), IoError);
  std::filesystem::remove(path);
}

TEST(Random, DerivedSeedsAreDistinctAndStable) {
  EXPECT_EQ(derive_seed(1, 2), derive_seed(1, 2));
  EXPECT_NE(derive_seed(1, 2), derive_seed(1, 3));
  EXPECT_NE(derive_seed(1, 2), derive_seed(2, 2));
}
