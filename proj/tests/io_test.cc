#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>

#include "sgski/error.h"
#include "sgski/io.h"
#include "support.h"

namespace sgski {
namespace {

namespace fs = std::filesystem;

class TempDir : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("sgski_io_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  std::string write(const std::string& name, const std::string& text) {
    const auto p = (dir_ / name).string();
    std::ofstream(p) << text;
    return p;
  }

  fs::path dir_;
};

std::string error_of(const std::string& path) {
  try {
    read_csv_dataset(path);
  } catch (const InputError& e) {
    return e.what();
  }
  return {};
}

TEST(Base64, RoundTripsDoublesExactly) {
  testing::Gen gen(1);
  std::vector<double> v = gen.vector(257);
  v.push_back(0.0);
  v.push_back(-0.0);
  v.push_back(std::numeric_limits<double>::denorm_min());
  v.push_back(std::numeric_limits<double>::max());
  const auto back = decode_doubles(encode_doubles(v));
  ASSERT_EQ(back.size(), v.size());
  for (std::size_t i = 0; i < v.size(); ++i) {
    EXPECT_EQ(std::signbit(back[i]), std::signbit(v[i]));
    EXPECT_EQ(back[i], v[i]);
  }
  EXPECT_TRUE(decode_doubles(encode_doubles({})).empty());
  EXPECT_THROW(decode_doubles("not base64!"), InputError);
}

TEST_F(TempDir, ReadsHeaderedAndBareFiles) {
  const auto with_header = write("h.csv", "a,b,target\n1,2,3\n4,5,6\n");
  const Dataset d = read_csv_dataset(with_header);
  EXPECT_EQ(d.columns, (std::vector<std::string>{"a", "b", "target"}));
  ASSERT_EQ(d.x.rows(), 2);
  ASSERT_EQ(d.x.cols(), 2);
  EXPECT_EQ(d.x(1, 0), 4.0);
  EXPECT_EQ(d.y, (std::vector<double>{3.0, 6.0}));

  const auto bare = write("b.csv", "1,2,3\n\n4,5,6\n");
  const Dataset e = read_csv_dataset(bare);
  EXPECT_TRUE(e.columns.empty());
  EXPECT_EQ(e.y, (std::vector<double>{3.0, 6.0}));
}

TEST_F(TempDir, ErrorsNameTheLine) {
  EXPECT_NE(error_of(write("a.csv", "x,y\n1,2\n3,oops\n")).find(":3:"), std::string::npos);
  EXPECT_NE(error_of(write("b.csv", "1,2\n3,4,5\n")).find(":2:"), std::string::npos);
  EXPECT_NE(error_of(write("c.csv", "1,2\n3,nan\n")).find(":2:"), std::string::npos);
  EXPECT_NE(error_of(write("d.csv", "1,2\n3,\n")).find(":2:"), std::string::npos);
  EXPECT_FALSE(error_of(write("e.csv", "x,y\n")).empty());
  EXPECT_FALSE(error_of(write("f.csv", "1\n2\n")).empty());
  EXPECT_FALSE(error_of((dir_ / "missing.csv").string()).empty());
}

TEST_F(TempDir, DatasetRoundTrip) {
  testing::Gen gen(2);
  Dataset d;
  d.x = gen.points(20, 3, -1.0, 1.0);
  d.y = gen.vector(20);
  d.columns = {"x0", "x1", "x2", "y"};
  const auto p = (dir_ / "rt.csv").string();
  write_csv_dataset(p, d);
  const Dataset back = read_csv_dataset(p);
  EXPECT_EQ(back.columns, d.columns);
  EXPECT_EQ(back.x, d.x);
  EXPECT_EQ(back.y, d.y);
}

TEST_F(TempDir, JsonFiles) {
  const auto p = (dir_ / "x.json").string();
  write_json_file(p, nlohmann::json{{"a", 1}, {"b", {1.5, 2.5}}});
  EXPECT_EQ(read_json_file(p)["b"][1], 2.5);
  EXPECT_THROW(read_json_file(write("bad.json", "{nope")), InputError);
}

}  // namespace
}  // namespace sgski
