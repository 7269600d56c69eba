#include <filesystem>
#include <fstream>
#include <sstream>

#include <gtest/gtest.h>

#include "tweezer/config.hpp"
#include "tweezer/io.hpp"

namespace {

using namespace tweezer;
namespace fs = std::filesystem;

Json base_infinite() {
  return Json::parse(R"({"schema": "tweezer-config/1", "command": "design",
    "system": {"kind": "infinite", "p": 6, "epsilon": 0.07, "nu0": 0.4}})");
}

std::vector<Diagnostic> errors_of(const Json& j) {
  try {
    parse_config(j);
  } catch (const SchemaError& e) {
    return e.diagnostics;
  }
  return {};
}

bool has_path(const std::vector<Diagnostic>& d, const std::string& path) {
  for (const auto& x : d)
    if (x.path == path) return true;
  return false;
}

TEST(Config, MinimalInfiniteParses) {
  std::vector<Diagnostic> w;
  const RunConfig c = parse_config(base_infinite(), &w);
  EXPECT_EQ(c.command, "design");
  EXPECT_EQ(c.system.cell.p, 6);
  EXPECT_TRUE(w.empty());
}

TEST(Config, CellSizeTwoIsSchemaError) {
  Json j = base_infinite();
  j["system"]["p"] = 2;
  EXPECT_TRUE(has_path(errors_of(j), "/system/p"));
}

TEST(Config, EmptyObjectListsEveryMissingField) {
  const auto d = errors_of(Json::object());
  EXPECT_TRUE(has_path(d, "/schema"));
  EXPECT_TRUE(has_path(d, "/command"));
}

TEST(Config, UnknownFieldIsRejected) {
  Json j = base_infinite();
  j["system"]["nu"] = 0.4;
  EXPECT_FALSE(errors_of(j).empty());
}

TEST(Config, WrongTypeIsRejected) {
  Json j = base_infinite();
  j["system"]["epsilon"] = "small";
  EXPECT_TRUE(has_path(errors_of(j), "/system/epsilon"));
}

TEST(Config, WeakPinningWarns) {
  Json j = base_infinite();
  j["system"]["nu0"] = 0.05;
  std::vector<Diagnostic> w;
  parse_config(j, &w);
  ASSERT_EQ(w.size(), 1u);
  EXPECT_EQ(w[0].level, "warning");
  EXPECT_EQ(w[0].path, "/system/nu0");
}

TEST(Config, ZigzagProximityWarns) {
  const Json j = Json::parse(R"({"schema": "tweezer-config/1", "command": "design",
    "system": {"kind": "finite", "n_ions": 130, "n_buffer": 15, "epsilon": 0.07, "gamma_y": 0.05, "p": 6,
               "nu0": 0.4}})");
  std::vector<Diagnostic> w;
  parse_config(j, &w);
  EXPECT_TRUE(has_path(w, "/system/epsilon"));
}

TEST(Config, ShippedConfigsAreClean) {
  int seen = 0;
  for (const auto& entry : fs::directory_iterator(fs::path(TWEEZER_SOURCE_DIR) / "configs")) {
    if (entry.path().extension() != ".json") continue;
    ++seen;
    const auto d = validate_config(entry.path().string());
    for (const auto& x : d) {
      // Sweep grids deliberately reach into weak pinning.
      if (x.level == "warning" && x.path == "/sweep") continue;
      ADD_FAILURE() << entry.path() << ": " << x.level << " " << x.path << " " << x.message;
    }
  }
  EXPECT_GE(seen, 5);
}

TEST(Config, ResolvedConfigRoundTrips) {
  for (const auto& entry : fs::directory_iterator(fs::path(TWEEZER_SOURCE_DIR) / "configs")) {
    if (entry.path().extension() != ".json") continue;
    const RunConfig c = parse_config(read_json_file(entry.path().string()));
    const Json once = to_json(c);
    EXPECT_EQ(to_json(parse_config(once)).dump(), once.dump()) << entry.path();
  }
}

TEST(Csv, QuotesAndFormatsDeterministically) {
  const fs::path p = fs::temp_directory_path() / "tweezer_csv_test.csv";
  {
    io::CsvWriter w(p.string(), "test figure", {"name", "value", "count"});
    w.row({std::string("a,b"), 0.1, 3LL});
    w.row({std::string("say \"hi\""), 1e-20, -1LL});
    EXPECT_THROW(w.row({1.0}), ConfigError);
  }
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  EXPECT_EQ(ss.str(), "# figure: test figure\r\nname,value,count\r\n\"a,b\",0.1,3\r\n\"say \"\"hi\"\"\",1e-20,-1\r\n");
  fs::remove(p);
}

}  // namespace
