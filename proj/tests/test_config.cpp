#include <gtest/gtest.h>

#include <filesystem>

#include "i2drnn/config.hpp"
#include "i2drnn/numerics.hpp"

using namespace i2drnn;

TEST(Config, UnknownKeyRejectedWithLine) {
  try {
    Config::parse("seed = 3\n\nmodel.layer = 10,10\n");
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("3"), std::string::npos);
  }
  Config c;
  EXPECT_THROW(c.set("nope", "1"), ConfigError);
  EXPECT_THROW(c.set_assignment("seed"), ConfigError);
}

TEST(Config, CommentsAndOverrides) {
  auto c = Config::parse("# note\nseed = 17  \nmodel.layers=5, 6,7\n");
  EXPECT_EQ(c.get_u64("seed"), 17u);
  EXPECT_EQ(c.get_sizes("model.layers"), (std::vector<std::size_t>{5, 6, 7}));
  c.set_assignment("seed=2");
  EXPECT_EQ(c.get_u64("seed"), 2u);
}

TEST(Config, BadNumbersAreConfigErrors) {
  Config c;
  c.set("seed", "x1");
  EXPECT_THROW(c.get_u64("seed"), ConfigError);
  c.set("train.step_size", "1e-3junk");
  EXPECT_THROW(c.get_double("train.step_size"), ConfigError);
  c.set("train.step_size", "1e-3");
  EXPECT_DOUBLE_EQ(c.get_double("train.step_size"), 1e-3);
}

TEST(Config, ResolvedRoundTrips) {
  Config c;
  c.set("seed", "99");
  c.set("task", "farima");
  const auto text = c.resolved();
  const auto back = Config::parse(text);
  EXPECT_EQ(back.resolved(), text);
  const auto p = std::filesystem::temp_directory_path() / "i2drnn_cfg_rt.conf";
  c.save(p);
  EXPECT_EQ(Config::load(p).resolved(), text);
  std::filesystem::remove(p);
  EXPECT_THROW(Config::load("/nonexistent/dir/x.conf"), IoError);
}

TEST(Config, SizeGrid) {
  EXPECT_EQ(size_grid("20:20:100"), (std::vector<std::size_t>{20, 40, 60, 80, 100}));
  EXPECT_EQ(size_grid("5,7,9"), (std::vector<std::size_t>{5, 7, 9}));
  EXPECT_THROW(size_grid("10:0:20"), ConfigError);
  EXPECT_THROW(size_grid(""), ConfigError);
}

TEST(Config, DatasetFollowsTask) {
  Config c;
  c.set("samples", "12");
  auto ds = build_dataset(c);
  EXPECT_EQ(ds.samples.size(), 12u);
  c.set("task", "farima");
  c.set("farima.series", "4");
  ds = build_dataset(c);
  EXPECT_EQ(ds.samples[0].inputs[0].same.size(), 4u);
  c.set("task", "csv");
  EXPECT_THROW(build_dataset(c), ConfigError);
}
