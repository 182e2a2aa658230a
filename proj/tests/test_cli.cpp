#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "cli.hpp"
#include "i2drnn/manifest.hpp"
#include "json.hpp"

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

struct Out {
  int rc;
  std::string out, err;
};

Out cli(std::vector<std::string> args) {
  args.insert(args.begin(), "i2drnn");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream o, e;
  const int rc = i2drnn::run_cli(static_cast<int>(argv.size()), argv.data(), o, e);
  return {rc, o.str(), e.str()};
}

class Cli : public ::testing::Test {
 protected:
  void SetUp() override {
    root = fs::temp_directory_path() / ("i2drnn_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(root);
    fs::create_directories(root);
  }
  void TearDown() override { fs::remove_all(root); }
  std::string dir(const std::string& n) const { return (root / n).string(); }
  static json read_json(const fs::path& p) {
    std::ifstream f(p);
    return json::parse(f);
  }
  fs::path root;
};

const std::vector<std::string> kSmall = {"--set", "samples=24", "--set", "model.layers=4,4",
                                         "--set", "train.max_epochs=2", "--set", "train.patience=2"};

std::vector<std::string> with(std::vector<std::string> a, const std::vector<std::string>& b) {
  a.insert(a.end(), b.begin(), b.end());
  return a;
}

}  // namespace

TEST_F(Cli, GenIsDeterministic) {
  auto a = cli({"gen", "--seed", "5", "--out", dir("a"), "--set", "samples=10"});
  auto b = cli({"gen", "--seed", "5", "--out", dir("b"), "--set", "samples=10"});
  auto c = cli({"gen", "--seed", "6", "--out", dir("c"), "--set", "samples=10"});
  ASSERT_EQ(a.rc, 0) << a.err;
  ASSERT_EQ(b.rc, 0);
  ASSERT_EQ(c.rc, 0);
  // The resolved config records the output directory, so only the data files must agree.
  auto data = [&](const char* d) {
    json out = json::array();
    const json m = read_json(root / d / i2drnn::kManifestName);
    for (const auto& f : m["files"])
      if (f["path"].get<std::string>().rfind("sample_", 0) == 0) out.push_back(f);
    return out;
  };
  EXPECT_EQ(data("a").size(), 20u);
  EXPECT_EQ(data("a"), data("b"));
  EXPECT_NE(data("a"), data("c"));
  EXPECT_TRUE(i2drnn::verify_manifest(root / "a").ok);
}

TEST_F(Cli, FarimaSeriesCount) {
  auto r = cli({"gen", "--out", dir("f"), "--set", "task=farima", "--set", "farima.series=20"});
  ASSERT_EQ(r.rc, 0) << r.err;
  const auto j = json::parse(r.out);
  EXPECT_EQ(j["input_dim"], 20);
  EXPECT_EQ(j["output_dim"], 20);
}

TEST_F(Cli, ExitCodes) {
  EXPECT_EQ(cli({}).rc, 2);
  EXPECT_EQ(cli({"train", "--bogus-flag"}).rc, 2);
  EXPECT_EQ(cli({"train", "--out", dir("x"), "--set", "no.such.key=1"}).rc, 2);
  EXPECT_EQ(cli({"reproduce", "nope", "--out", dir("x")}).rc, 2);
  EXPECT_EQ(cli({"eval", "--out", dir("x"), "--checkpoint", dir("missing.json")}).rc, 4);
  EXPECT_EQ(cli({"capacity", "--out", dir("x"), "--set", "capacity.k=0.5"}).rc, 2);
  EXPECT_EQ(cli({"gen", "--config", dir("absent.conf"), "--out", dir("x")}).rc, 4);
  EXPECT_EQ(cli({"--help"}).rc, 0);
}

TEST_F(Cli, CapacitySynthetic) {
  auto r = cli({"capacity", "--out", dir("c"), "--set", "capacity.a=1", "--set", "capacity.k=0.5"});
  ASSERT_EQ(r.rc, 0) << r.err;
  const auto j = json::parse(r.out);
  EXPECT_NEAR(j["alpha"].get<double>(), 1.0, 1e-9);
  EXPECT_NEAR(j["lambdas"][0].get<double>(), 2.0 - std::sqrt(2.0), 1e-12);
  EXPECT_TRUE(fs::exists(root / "c" / "layer_curves.csv"));
}

TEST_F(Cli, DiagnoseZeroModelHasNoInformation) {
  auto r = cli(with({"diagnose", "--out", dir("d"), "--set", "diagnose.model=zero"}, kSmall));
  ASSERT_EQ(r.rc, 0) << r.err;
  for (const auto& v : json::parse(r.out)["max_mi_per_layer"]) EXPECT_EQ(v.get<double>(), 0.0);
}

TEST_F(Cli, TrainEvalResume) {
  auto t = cli(with({"train", "--out", dir("t")}, kSmall));
  ASSERT_EQ(t.rc, 0) << t.err;
  const std::string ck = dir("t/checkpoint.json");
  auto e1 = cli(with({"eval", "--out", dir("e1"), "--checkpoint", ck}, kSmall));
  auto e2 = cli(with({"eval", "--out", dir("e2"), "--checkpoint", ck}, kSmall));
  ASSERT_EQ(e1.rc, 0) << e1.err;
  EXPECT_EQ(e1.out, e2.out);
  EXPECT_EQ(json::parse(e1.out)["rmse"], json::parse(t.out)["test"]["rmse"]);

  auto r = cli(with({"train", "--out", dir("r"), "--resume", ck}, kSmall));
  ASSERT_EQ(r.rc, 0) << r.err;
  const auto first = json::parse(r.out)["first_epoch"].get<int>();
  EXPECT_EQ(first, json::parse(t.out)["best_epoch"].get<int>() + 1);
  std::ifstream f(root / "r" / "train_loss.csv");
  std::string header, line;
  std::getline(f, header);
  std::getline(f, line);
  EXPECT_EQ(line.substr(0, line.find(',')), std::to_string(first));

  // Wrong shape for the configured data.
  auto bad = cli(with({"eval", "--out", dir("b"), "--checkpoint", ck, "--set", "copy.channels=3"}, kSmall));
  EXPECT_NE(bad.rc, 0);
}

TEST_F(Cli, StackedTrainsAndEvaluates) {
  auto s = with({"--set", "model.arch=stacked"}, kSmall);
  auto t = cli(with({"train", "--out", dir("t")}, s));
  ASSERT_EQ(t.rc, 0) << t.err;
  EXPECT_EQ(json::parse(t.out)["arch"], "StackedRNN");
  auto e = cli(with({"eval", "--out", dir("e"), "--checkpoint", dir("t/checkpoint.json"), "--split", "val"}, s));
  ASSERT_EQ(e.rc, 0) << e.err;
  EXPECT_EQ(json::parse(e.out)["split"], "val");
}

TEST_F(Cli, ConfigureAndMicurve) {
  auto c = cli({"configure", "--out", dir("c"), "--set", "capacity.a=2", "--set", "capacity.k=0.9", "--format", "csv"});
  ASSERT_EQ(c.rc, 0) << c.err;
  EXPECT_EQ(c.out.rfind("size", 0), 0u) << c.out.substr(0, 40);
  auto m = cli({"micurve", "--out", dir("m"), "--set", "task=farima", "--set", "farima.series=3"});
  ASSERT_EQ(m.rc, 0) << m.err;
  const auto j = json::parse(m.out);
  EXPECT_GT(j["k"].get<double>(), 0.0);
  EXPECT_LT(j["k"].get<double>(), 1.0);
}
