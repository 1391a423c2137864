#include "sndiff/binary_io.hpp"
#include "test_util.hpp"

#include <gtest/gtest.h>

#include <cstring>
#include <fstream>

using namespace sndiff;

TEST(BinaryIo, ArrayRoundTripIsBitExact) {
  const auto dir = sndiff::testing::temp_dir("binio");
  Rng rng(1);
  std::vector<Vector> rows;
  for (int i = 0; i < 5; ++i) rows.push_back(standard_normal(7, rng));
  rows[2][3] = -0.0;
  rows[4][0] = 1e-310;
  write_array(dir / "a.bin", rows);
  const auto back = read_array(dir / "a.bin");
  ASSERT_EQ(back.size(), rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    EXPECT_EQ(std::memcmp(back[i].data(), rows[i].data(), sizeof(double) * 7), 0);
  }
}

TEST(BinaryIo, HeaderCarriesShapeAndExtras) {
  const auto dir = sndiff::testing::temp_dir("binio_hdr");
  write_vector(dir / "v.bin", Vector::Ones(4), {{"kind", "estimate"}});
  const auto f = read_flat(dir / "v.bin");
  EXPECT_EQ(f.header.at("count"), 4);
  EXPECT_EQ(f.header.at("kind"), "estimate");
  EXPECT_EQ(read_vector(dir / "v.bin"), Vector::Ones(4));
}

TEST(BinaryIo, RejectsCorruptFiles) {
  const auto dir = sndiff::testing::temp_dir("binio_bad");
  std::ofstream(dir / "junk.bin") << "not a flat file";
  EXPECT_THROW(read_flat(dir / "junk.bin"), DataError);
  EXPECT_THROW(read_flat(dir / "missing.bin"), DataError);
  write_vector(dir / "v.bin", Vector::Ones(8));
  std::filesystem::resize_file(dir / "v.bin", std::filesystem::file_size(dir / "v.bin") - 4);
  EXPECT_THROW(read_flat(dir / "v.bin"), DataError);
}
